"""
Uniform grids on the two-torus, the projection onto them and the flat torus metric.

A grid of order k holds the q = k*k points (i/k, j/k). Cell (i, j) is linearized as i*k + j.
"""

import math
from dataclasses import dataclass

import numpy as np

from torus_discretization.errors import CapacityError, DomainError
from torus_discretization.settings import DEFAULT_Q_LIMIT

DIM = 2

# Every torus point is within this many meshes of a cell center
HALF_DIAGONAL = math.sqrt(2) / 2


def reduce_mod1(values):
    """
    Reduces coordinates into [0, 1), negative inputs included.

    Args:
        values: a float or a numpy array of floats.
    Returns:
        The reduced value(s), of the same kind as the input.
    """
    # x - floor(x) rounds up to 1.0 for tiny negative x
    if np.ndim(values):
        reduced = values - np.floor(values)
        reduced[reduced >= 1.0] = 0.0
        return reduced
    reduced = float(values) - math.floor(values)
    return 0.0 if reduced >= 1.0 else reduced


@dataclass(frozen=True)
class GridSpec:
    """
    A uniform subdivision of the torus into k x k cells.
    """

    k: int

    @property
    def dim(self):
        return DIM

    @property
    def q(self):
        return self.k**DIM

    @property
    def mesh(self):
        return 1.0 / self.k

    @property
    def projection_bound(self):
        """
        Distance within which every torus point lies from its nearest cell center.
        """
        return HALF_DIAGONAL / self.k

    def refines(self, other):
        """
        Whether this grid contains every point of the other grid.
        """
        return self.k % other.k == 0

    def __str__(self):
        return "grid k={} (q={})".format(self.k, self.q)


@dataclass(frozen=True)
class CellIndex:
    i: int
    j: int


@dataclass(frozen=True)
class TorusPoint:
    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", reduce_mod1(float(self.x)))
        object.__setattr__(self, "y", reduce_mod1(float(self.y)))


def make_grid(k, q_limit=DEFAULT_Q_LIMIT):
    """
    Builds the uniform grid with k cells per axis.

    Args:
        k: cells per axis, at least 2.
        q_limit: largest accepted total cell count.
    Returns:
        GridSpec: the grid.
    """
    if int(k) != k or k < 2:
        raise CapacityError("grid order", "k >= 2", k)
    k = int(k)
    if k * k > q_limit:
        raise CapacityError("grid of order {}".format(k), "q = {}".format(k * k), q_limit)
    return GridSpec(k)


def lin(i, j, g):
    return i * g.k + j


def unlin(cells, g):
    """
    Splits cell linearizations into their (i, j) indices.
    """
    return np.divmod(cells, g.k)


def project_coords(xs, ys, g):
    """
    Vectorized projection of torus coordinates to cell linearizations.

    The tie policy is round-half-up per axis: index = floor(x*k + 1/2) mod k.
    """
    k = g.k
    i = np.floor(np.asarray(xs) * k + 0.5).astype(np.int64) % k
    j = np.floor(np.asarray(ys) * k + 0.5).astype(np.int64) % k
    return i * k + j


def project(p, g):
    """
    Projects a torus point to its nearest cell.

    Args:
        p (TorusPoint): the point.
        g (GridSpec): the grid.
    Returns:
        CellIndex: the cell whose center is nearest to p on each axis.
    """
    k = g.k
    return CellIndex(math.floor(p.x * k + 0.5) % k, math.floor(p.y * k + 0.5) % k)


def centers_of(cells, g):
    """
    Vectorized cell centers for an array of linearizations.

    Returns:
        tuple: arrays of x and y coordinates.
    """
    i, j = unlin(np.asarray(cells), g)
    return i / g.k, j / g.k


def cell_center(c, g):
    """
    Gets the center (i/k, j/k) of a cell.

    Args:
        c (CellIndex): the cell.
        g (GridSpec): the grid it belongs to.
    Returns:
        TorusPoint: the center.
    """
    if not (0 <= c.i < g.k and 0 <= c.j < g.k):
        raise DomainError("Cell {} lies outside {}".format(c, g))
    return TorusPoint(c.i / g.k, c.j / g.k)


def wrap_delta(a, b):
    """
    Per-axis distance on the circle R/Z, vectorized.
    """
    d = np.abs(np.asarray(a) - np.asarray(b)) % 1.0
    return np.minimum(d, 1.0 - d)


def wrap_distances(x1, y1, x2, y2):
    """
    Vectorized flat torus distance between paired coordinate arrays.
    """
    return np.hypot(wrap_delta(x1, x2), wrap_delta(y1, y2))


def wrap_distance(p, q):
    """
    Flat Euclidean quotient distance between two torus points.

    Args:
        p (TorusPoint): first point.
        q (TorusPoint): second point.
    Returns:
        float: the distance, at most sqrt(2)/2.
    """
    dx = abs(p.x - q.x) % 1.0
    dy = abs(p.y - q.y) % 1.0
    return math.hypot(min(dx, 1.0 - dx), min(dy, 1.0 - dy))


def ball_cells(center, radius, g):
    """
    Gets the cells whose centers lie at wrap distance less than radius from a point.

    Only the index window around the point is scanned.

    Returns:
        numpy.ndarray: sorted cell linearizations, possibly empty.
    """
    k = g.k
    reach = min(int(math.ceil(radius * k)), k // 2)
    offsets = np.arange(-reach, reach + 2)
    i = np.unique((math.floor(center.x * k) + offsets) % k)
    j = np.unique((math.floor(center.y * k) + offsets) % k)
    ii, jj = np.meshgrid(i, j, indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    distances = wrap_distances(ii / k, jj / k, center.x, center.y)
    return np.sort(ii[distances < radius] * k + jj[distances < radius])
