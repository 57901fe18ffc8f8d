"""
Cyclic approximations of conservative torus maps and permutation surgeries on them.

The approximation matches every cube to a cube its image meets (Hall's marriage lemma),
then turns the matching into a single cycle by post-composing with a permutation that
moves no cell by more than two steps of the snake order.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from torus_discretization.disjoint_set import DisjointSet
from torus_discretization.errors import (
    ConsistencyError,
    DomainError,
    MatchingError,
    SearchError,
    TilingError,
)
from torus_discretization.graph_core import analyze, permutation_cycle_labels
from torus_discretization.map_kit import DiscreteMap, grid_sup_distance
from torus_discretization.matching import perfect_matching
from torus_discretization.torus_grid import (
    CellIndex,
    GridSpec,
    cell_center,
    centers_of,
    project_coords,
    reduce_mod1,
    unlin,
    wrap_delta,
    wrap_distance,
)

# Center distance between cells at most two snake positions apart, in meshes
SNAKE_SPAN = math.sqrt(5)

# Floating slack allowed when checking the certificate inequality
CERTIFICATE_SLACK = 1e-12

# Number of times the matching is retried with a doubled inflate
MATCHING_RETRIES = 3

DEFAULT_SAMPLES_PER_AXIS = 3


class SnakeOrder:
    """
    Serpentine numbering of the cells: even rows left to right, odd rows right to left.

    Consecutive positions are edge-adjacent cells.
    """

    def __init__(self, grid):
        self.grid = grid
        k = grid.k
        rows, offsets = np.divmod(np.arange(grid.q, dtype=np.int64), k)
        columns = np.where(rows % 2 == 0, offsets, k - 1 - offsets)
        self.cells = rows * k + columns
        self.positions = np.empty_like(self.cells)
        self.positions[self.cells] = np.arange(grid.q, dtype=np.int64)

    def cell_at(self, position):
        return int(self.cells[position])

    def position_of(self, cell):
        return int(self.positions[cell])


@dataclass(frozen=True)
class CubeRelation:
    """
    For each cube C, the sorted cubes C' with C related to C'.
    """

    q: int
    neighbours: tuple

    def pairs(self):
        return [(c, int(d)) for c, adj in enumerate(self.neighbours) for d in adj]


@dataclass(frozen=True)
class LaxCertificate:
    is_cyclic: bool
    displacement_max: int
    d_n: float
    matching_d_n: float
    eps: float
    k: int

    @property
    def bound(self):
        """
        matching_d_n plus the largest center gap a displacement of two snake steps can add.
        """
        span = SNAKE_SPAN / self.k if self.displacement_max else 0.0
        return self.matching_d_n + span

    @property
    def holds(self):
        return (
            self.is_cyclic
            and self.displacement_max <= 2
            and self.d_n <= self.bound + CERTIFICATE_SLACK
        )

    @property
    def below_threshold(self):
        """
        True when the approximation is not eps-close; a finer grid is needed.
        """
        return self.d_n > self.eps


def _sample_offsets(samples_per_axis, k):
    if samples_per_axis == 1:
        return np.zeros(1)
    return (np.arange(samples_per_axis) / (samples_per_axis - 1) - 0.5) / k


def default_inflate(k, samples_per_axis):
    return math.sqrt(2) / (2 * k * samples_per_axis)


def cube_adjacency(f, g, samples_per_axis=DEFAULT_SAMPLES_PER_AXIS, inflate=None):
    """
    Relates each cube to the cubes that its sampled image comes close to.

    Args:
        f (MapExpr): the map.
        g (GridSpec): the grid.
        samples_per_axis: sample points per axis in each cube, corners included when > 1.
        inflate: how close (wrap distance) an image sample must come to a cube.
    Returns:
        CubeRelation: the relation.
    """
    if samples_per_axis < 1:
        raise DomainError("Need at least one sample per axis, got {}".format(samples_per_axis))
    if inflate is None:
        inflate = default_inflate(g.k, samples_per_axis)
    if inflate < 0:
        raise DomainError("inflate must not be negative, got {}".format(inflate))
    k, q = g.k, g.q
    half = 0.5 / k
    reach = int(math.ceil(inflate * k)) + 1
    cells = np.arange(q, dtype=np.int64)
    cx, cy = centers_of(cells, g)
    offsets = _sample_offsets(samples_per_axis, k)

    keys = []
    for dx in offsets:
        for dy in offsets:
            fx, fy = f.evaluate(reduce_mod1(cx + dx), reduce_mod1(cy + dy))
            bi, bj = unlin(project_coords(fx, fy, g), g)
            for di in range(-reach, reach + 1):
                for dj in range(-reach, reach + 1):
                    ni, nj = (bi + di) % k, (bj + dj) % k
                    gap_x = np.maximum(wrap_delta(fx, ni / k) - half, 0.0)
                    gap_y = np.maximum(wrap_delta(fy, nj / k) - half, 0.0)
                    close = np.hypot(gap_x, gap_y) <= inflate
                    keys.append(cells[close] * q + ni[close] * k + nj[close])
    left, right = np.divmod(np.unique(np.concatenate(keys)), q)
    bounds = np.searchsorted(left, np.arange(1, q))
    return CubeRelation(q, tuple(np.split(right, bounds)))


def hall_matching(rel, q):
    """
    Finds a perfect matching inside a cube relation.

    Args:
        rel (CubeRelation): the relation, or any sequence of neighbour lists.
        q: number of cubes on each side.
    Returns:
        numpy.ndarray: a permutation of the cells respecting the relation.
    """
    neighbours = rel.neighbours if isinstance(rel, CubeRelation) else rel
    return np.array(perfect_matching(neighbours, q), dtype=np.int64)


def _check_permutation(perm):
    q = len(perm)
    if q == 0 or not np.array_equal(np.sort(perm), np.arange(q)):
        raise DomainError("Input is not a permutation of [0, {})".format(q))


def alpern_cyclize(s):
    """
    Post-composes a permutation with a short-range permutation tau so the product is one cycle.

    A left-to-right scan selects the adjacent transpositions (p, p+1) joining positions of
    different cycles (tracked by union-find). They form a spanning forest of the cycles, so
    applying them in any order merges everything; applying those with even p first and odd p
    second makes tau a product of two layers of disjoint transpositions.

    Args:
        s: a permutation of [0, q), in snake positions.
    Returns:
        tuple (numpy.ndarray, numpy.ndarray): tau and the single q-cycle tau o s.
    """
    s = np.asarray(s, dtype=np.int64)
    _check_permutation(s)
    q = len(s)
    labels = permutation_cycle_labels(s).tolist()
    cycles = DisjointSet(q)
    layers = (np.arange(q, dtype=np.int64), np.arange(q, dtype=np.int64))
    for p in range(q - 1):
        if cycles.merge(labels[p], labels[p + 1]):
            layer = layers[p % 2]
            layer[p], layer[p + 1] = p + 1, p
    even, odd = layers
    tau = odd[even]
    return tau, tau[s]


def _single_cycle(table, grid):
    stats, _ = analyze(DiscreteMap.from_table(grid, table))
    return stats.is_cyclic_permutation


def lax_cyclic_approximation(
    f, g, eps, samples_per_axis=None, inflate=None, retries=MATCHING_RETRIES
):
    """
    Builds a cyclic permutation of the grid close to a conservative map.

    Args:
        f (MapExpr): the map.
        g (GridSpec): the grid.
        eps: the target distance.
        samples_per_axis: sampling density of cube_adjacency. Defaults to cell centers only
            for compositions of linear automorphisms, whose centers map onto centers, and to
            DEFAULT_SAMPLES_PER_AXIS otherwise.
        inflate: initial inflate of cube_adjacency; doubled on each retry. Defaults to 0 for
            linear automorphisms and to default_inflate otherwise.
        retries: number of retries when no perfect matching exists.
    Returns:
        tuple (DiscreteMap, LaxCertificate): the cyclic permutation and its certificate. The
            certificate's below_threshold flag is set when d_N exceeds eps.
    """
    if eps <= 0:
        raise DomainError("eps must be positive, got {}".format(eps))
    exact = f.exact_matrix() is not None
    if samples_per_axis is None:
        samples_per_axis = 1 if exact else DEFAULT_SAMPLES_PER_AXIS
    if inflate is None:
        inflate = 0.0 if exact else default_inflate(g.k, samples_per_axis)
    for attempt in range(retries + 1):
        rel = cube_adjacency(f, g, samples_per_axis, inflate)
        try:
            sigma = hall_matching(rel, g.q)
            break
        except MatchingError as e:
            if attempt == retries:
                raise
            logging.warning(
                "No perfect matching for {} on {} with inflate {} ({}), retrying".format(
                    f, g, inflate, e
                )
            )
            inflate = 2 * inflate if inflate else default_inflate(g.k, samples_per_axis)
    matching_d_n = grid_sup_distance(f, DiscreteMap.from_table(g, sigma))

    snake = SnakeOrder(g)
    tau, cyclic = alpern_cyclize(snake.positions[sigma[snake.cells]])
    table = np.empty(g.q, dtype=np.int64)
    table[snake.cells] = snake.cells[cyclic]
    result = DiscreteMap.from_table(g, table)

    certificate = LaxCertificate(
        is_cyclic=_single_cycle(table, g),
        displacement_max=int(np.max(np.abs(tau - np.arange(g.q)))),
        d_n=grid_sup_distance(f, result),
        matching_d_n=matching_d_n,
        eps=eps,
        k=g.k,
    )
    if not certificate.holds:
        raise ConsistencyError("Lax certificate failed: {}".format(certificate))
    if certificate.below_threshold:
        logging.warning(
            "Cyclic approximation of {} on {} has d_N={} above eps={}".format(
                f, g, certificate.d_n, eps
            )
        )
    return result, certificate


def collapse_to_short_cycle(s, x, eps, max_tau):
    """
    Turns a cyclic permutation into a map with a single short cycle and one long tail.

    Finds the first return tau of x within eps and redirects s^(tau-1)(x) to x.

    Args:
        s (DiscreteMap): a cyclic permutation of a grid.
        x (CellIndex): the starting cell.
        eps: return distance.
        max_tau: longest return time searched, at most q.
    Returns:
        DiscreteMap: the map; its maximal invariant set is the tau-cycle through x.
    """
    g = s.grid
    if max_tau > g.q:
        raise DomainError("max_tau={} exceeds q={}".format(max_tau, g.q))
    table = s.image(np.arange(g.q))
    if not _single_cycle(table, g):
        raise DomainError("Input map is not a cyclic permutation")
    start = x.i * g.k + x.j
    origin = cell_center(x, g)
    step = table.tolist()
    previous, current = start, step[start]
    best = math.inf
    for tau in range(1, max_tau + 1):
        distance = wrap_distance(origin, cell_center(CellIndex(*divmod(current, g.k)), g))
        if distance < eps:
            table = table.copy()
            table[previous] = start
            logging.info("Collapsed onto a cycle of length {} through cell {}".format(tau, x))
            return DiscreteMap.from_table(g, table)
        best = min(best, distance)
        previous, current = current, step[current]
    raise SearchError("No return within eps={} after {} steps".format(eps, max_tau), best)


def coarsen_image(s, k_coarse):
    """
    Snaps every image to the nearest cell of a coarser lattice embedded in the grid.

    Args:
        s (DiscreteMap): a map on a grid of order k.
        k_coarse: order of the coarse lattice, dividing k.
    Returns:
        DiscreteMap: a map on the same grid with at most k_coarse**2 image cells.
    """
    g = s.grid
    if k_coarse < 1 or not g.refines(GridSpec(k_coarse)):
        raise TilingError("{} does not divide the order of {}".format(k_coarse, g))
    m = g.k // k_coarse
    i, j = unlin(s.image(np.arange(g.q)), g)
    # Round half up onto the coarse lattice, in integers
    ci = (2 * i + m) // (2 * m) % k_coarse * m
    cj = (2 * j + m) // (2 * m) % k_coarse * m
    return DiscreteMap.from_table(g, ci * g.k + cj)


def replicate_cycles(base, g):
    """
    Copies a permutation of a coarse grid onto every translate of that grid inside a finer one.

    The block (u, v) is the coarse lattice shifted by (u/k, v/k); each block carries the base
    map conjugated by that translation.

    Args:
        base (DiscreteMap): a permutation of a grid of order k0.
        g (GridSpec): the target grid, with k0 dividing k.
    Returns:
        DiscreteMap: a permutation of g with (k/k0)**2 copies of each cycle of base.
    """
    coarse = base.grid
    if not g.refines(coarse):
        raise TilingError("{} does not refine {}".format(g, coarse))
    base_table = base.image(np.arange(coarse.q))
    _check_permutation(base_table)
    b = g.k // coarse.k
    i, j = unlin(np.arange(g.q, dtype=np.int64), g)
    (i0, u), (j0, v) = np.divmod(i, b), np.divmod(j, b)
    a, c = unlin(base_table[i0 * coarse.k + j0], coarse)
    return DiscreteMap.from_table(g, (a * b + u) * g.k + c * b + v)
