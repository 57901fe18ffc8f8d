"""
Shadowing diagnostics for discretized orbits and convergence of maximal invariant sets
across resolutions.

The continuous reference orbit is itself iterated in double precision, so defects measure
the gap between the discretization and floating-point iteration.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from torus_discretization.errors import CapacityError, DomainError
from torus_discretization.graph_core import analyze, philox_generator
from torus_discretization.map_kit import discretize
from torus_discretization.settings import DEFAULT_MAX_BYTES
from torus_discretization.torus_grid import (
    centers_of,
    make_grid,
    project_coords,
    wrap_delta,
    wrap_distances,
)

# Above this many point pairs, Hausdorff distances use a periodic k-d tree
BRUTE_FORCE_PAIRS = 10**8

# Rows of the distance matrix computed per batch in the brute-force path
BRUTE_FORCE_BATCH = 2**22


@dataclass(frozen=True)
class ShadowReport:
    defect: float
    first_violation: int
    horizon: int
    delta: float = None


@dataclass(frozen=True)
class OmegaSeriesEntry:
    k: int
    card_omega: int = None
    hausdorff_to_previous: float = None
    status: str = "ok"


def _orbit_defects(f, g, xs, ys, horizon, delta=None):
    """
    Iterates continuous and discrete orbits of many points side by side.

    Returns:
        tuple (numpy.ndarray, numpy.ndarray): the largest defect of each orbit over steps
            0..horizon, and the first step exceeding delta (-1 when none or delta is None).
    """
    discrete = discretize(f, g, materialize=False)
    cells = project_coords(xs, ys, g)
    defects = np.zeros(len(xs))
    first = np.full(len(xs), -1, dtype=np.int64)
    for m in range(horizon + 1):
        if m:
            xs, ys = f.evaluate(xs, ys)
            cells = discrete.image(cells)
        step = wrap_distances(xs, ys, *centers_of(cells, g))
        defects = np.maximum(defects, step)
        if delta is not None:
            first = np.where((first < 0) & (step > delta), m, first)
    return defects, first


def shadowing_defect(f, g, x, horizon, delta=None):
    """
    Measures how far the discretized orbit of x_N strays from the orbit of x.

    Args:
        f (MapExpr): the map.
        g (GridSpec): the grid.
        x (TorusPoint): the starting point.
        horizon: number of steps, at least 1.
        delta: optional threshold for first_violation.
    Returns:
        ShadowReport: the largest wrap distance between f^m(x) and the center of f_N^m(x_N).
    """
    if horizon < 1:
        raise DomainError("horizon must be at least 1, got {}".format(horizon))
    defects, first = _orbit_defects(f, g, np.array([x.x]), np.array([x.y]), horizon, delta)
    violation = int(first[0]) if first[0] >= 0 else None
    return ShadowReport(float(defects[0]), violation, horizon, delta)


def shadow_fraction(f, g, delta, horizon, sample_count, seed):
    """
    Fraction of uniformly drawn starting points whose discretized orbit delta-shadows.

    Args:
        f (MapExpr): the map.
        g (GridSpec): the grid.
        delta: shadowing tolerance.
        horizon: number of steps.
        sample_count: number of starting points, at least 1.
        seed: seed of the counter-based generator drawing the points.
    Returns:
        float: a value in [0, 1].
    """
    if sample_count < 1:
        raise DomainError("sample_count must be at least 1, got {}".format(sample_count))
    points = philox_generator(seed).random((sample_count, 2))
    defects, _ = _orbit_defects(f, g, points[:, 0], points[:, 1], horizon)
    fraction = int(np.count_nonzero(defects <= delta)) / sample_count
    logging.info(
        "Shadow fraction of {} on {} at delta={} horizon={}: {}".format(
            f, g, delta, horizon, fraction
        )
    )
    return fraction


def _directed_brute_force(ax, ay, bx, by):
    worst = 0.0
    batch = max(1, BRUTE_FORCE_BATCH // len(bx))
    for start in range(0, len(ax), batch):
        dx = wrap_delta(ax[start : start + batch, None], bx[None, :])
        dy = wrap_delta(ay[start : start + batch, None], by[None, :])
        worst = max(worst, float(np.hypot(dx, dy).min(axis=1).max()))
    return worst


def _directed_tree(ax, ay, bx, by):
    tree = cKDTree(np.column_stack([bx, by]), boxsize=1.0)
    distances, _ = tree.query(np.column_stack([ax, ay]))
    return float(distances.max())


def hausdorff_points(a, b):
    """
    Hausdorff distance between two nonempty point sets under the flat torus metric.

    Args:
        a: tuple of x and y coordinate arrays, in [0, 1).
        b: tuple of x and y coordinate arrays, in [0, 1).
    Returns:
        float: the distance.
    """
    (ax, ay), (bx, by) = a, b
    if len(ax) == 0 or len(bx) == 0:
        raise DomainError("Hausdorff distance needs nonempty sets")
    directed = _directed_brute_force if len(ax) * len(bx) <= BRUTE_FORCE_PAIRS else _directed_tree
    return max(directed(ax, ay, bx, by), directed(bx, by, ax, ay))


def hausdorff_distance(a, b, g):
    """
    Hausdorff distance between two cell sets of a grid, measured between cell centers.

    Args:
        a: cell linearizations.
        b: cell linearizations.
        g (GridSpec): the grid.
    Returns:
        float: the distance.
    """
    a, b = np.unique(np.asarray(a, dtype=np.int64)), np.unique(np.asarray(b, dtype=np.int64))
    if a.size == 0 or b.size == 0:
        raise DomainError("Hausdorff distance needs nonempty cell sets")
    return hausdorff_points(centers_of(a, g), centers_of(b, g))


def omega_convergence_series(f, ks, max_bytes=DEFAULT_MAX_BYTES):
    """
    Analyzes the maximal invariant set of f_N at increasing resolutions.

    Args:
        f (MapExpr): the map.
        ks: strictly increasing grid orders.
        max_bytes: memory budget per resolution.
    Returns:
        list: one OmegaSeriesEntry per order. A resolution over budget is marked
            "skipped-capacity" and the next distance is taken to the last analyzed set.
    """
    ks = list(ks)
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise DomainError("Resolutions must be strictly increasing, got {}".format(ks))
    series = []
    previous = None
    for k in ks:
        try:
            g = make_grid(k)
            _, labeling = analyze(discretize(f, g, max_bytes=max_bytes), max_bytes=max_bytes)
        except CapacityError as e:
            logging.warning("Skipping k={} in the Omega series: {}".format(k, e))
            series.append(OmegaSeriesEntry(k, status="skipped-capacity"))
            continue
        omega = centers_of(labeling.omega_cells(), g)
        distance = None if previous is None else hausdorff_points(omega, previous)
        series.append(OmegaSeriesEntry(k, len(omega[0]), distance))
        previous = omega
    return series
