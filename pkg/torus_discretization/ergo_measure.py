"""
Exact invariant measures of finite maps and their coarse density images.

The canonical measure of a finite map is the Cesaro limit of the pushforwards of the
uniform measure. It is uniform on each cycle, and a cycle of length l with a basin of b
cells carries b / (q * l) on each of its cells. Masses are kept as Fractions; floats only
appear in density images.
"""

import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from torus_discretization.errors import ConsistencyError, DomainError, TilingError
from torus_discretization.graph_core import analyze
from torus_discretization.settings import DEFAULT_PX
from torus_discretization.torus_grid import unlin

# Log10 value of a pixel carrying no mass
FLOOR = float("-inf")


@dataclass(eq=False)
class AtomGroup:
    """
    Cells that all carry the same mass.
    """

    cells: np.ndarray
    mass: Fraction


class DiscreteMeasure:
    """
    An atomic probability measure on the cells of a grid, with exact rational masses.
    """

    def __init__(self, grid, groups):
        self.grid = grid
        self.groups = tuple(groups)
        self._masses = None

    @classmethod
    def from_masses(cls, grid, masses):
        """
        Builds a measure from a mapping of cell to mass, dropping zero masses.
        """
        by_mass = defaultdict(list)
        for cell, mass in masses.items():
            if mass:
                by_mass[mass].append(cell)
        return cls(
            grid,
            [AtomGroup(np.array(sorted(cells), dtype=np.int64), m) for m, cells in by_mass.items()],
        )

    def total_mass(self):
        return sum((g.mass * len(g.cells) for g in self.groups), Fraction(0))

    def max_atom(self):
        return max(g.mass for g in self.groups)

    def support(self):
        return np.sort(np.concatenate([g.cells for g in self.groups]))

    def as_dict(self):
        """
        Returns:
            dict: cell linearization to Fraction mass, for cells with positive mass.
        """
        if self._masses is None:
            self._masses = {int(c): g.mass for g in self.groups for c in g.cells}
        return self._masses

    def mass_of(self, cell):
        return self.as_dict().get(int(cell), Fraction(0))

    def __eq__(self, other):
        return self.grid == other.grid and self.as_dict() == other.as_dict()

    def __repr__(self):
        return "DiscreteMeasure({}, {} atoms)".format(self.grid, len(self.as_dict()))


@dataclass(eq=False)
class DensityImage:
    """
    Log10 of the mass carried by each pixel; pixels with no mass hold FLOOR.

    values[a, b] aggregates cells whose first index falls in block a and second in block b.
    """

    px: int
    values: np.ndarray


def _check_labeling(s, labeling):
    q = len(s)
    if len(labeling.cycle_id) != q or len(labeling.tail_height) != q:
        raise ConsistencyError(
            "Labeling covers {} cells but the map has {}".format(len(labeling.cycle_id), q)
        )
    if int(labeling.basin_count.sum()) != q:
        raise ConsistencyError("Basin counts do not add up to {}".format(q))
    cells = np.arange(q)
    images = s.image(cells)
    on_tail = labeling.tail_height > 0
    expected = np.where(on_tail, labeling.tail_height - 1, 0)
    if not (
        np.array_equal(labeling.tail_height[images], expected)
        and np.array_equal(labeling.cycle_id[images], labeling.cycle_id)
    ):
        raise ConsistencyError("Labeling was not produced from this map")


def invariant_measure(s, labeling):
    """
    Builds the canonical invariant measure mu_N of a finite map.

    Args:
        s (DiscreteMap): the map.
        labeling (BasinLabeling): the labeling analyze produced for s.
    Returns:
        DiscreteMeasure: uniform on each cycle, each cycle weighted by its basin size.
    """
    _check_labeling(s, labeling)
    q = len(s)
    groups = [
        AtomGroup(cells, Fraction(int(basin), q * len(cells)))
        for cells, basin in zip(labeling.cycle_cells(), labeling.basin_count)
    ]
    return DiscreteMeasure(s.grid, groups)


def restricted_measure(s, cells, labeling=None):
    """
    Builds mu_{N,U}, the Cesaro limit starting from the uniform measure on a cell subset U.

    Args:
        s (DiscreteMap): the map.
        cells: the cell linearizations making up U.
        labeling (BasinLabeling): labeling of s; computed when not given.
    Returns:
        DiscreteMeasure: uniform on each cycle, weighted by how much of U its basin holds.
    """
    subset = np.unique(np.asarray(cells, dtype=np.int64))
    if subset.size == 0:
        raise DomainError("The cell subset must not be empty")
    outside = subset[(subset < 0) | (subset >= len(s))]
    if outside.size:
        raise DomainError("Cells {} lie outside {}".format(outside.tolist(), s.grid))
    if labeling is None:
        labeling = analyze(s)[1]
    else:
        _check_labeling(s, labeling)
    hits = np.bincount(labeling.cycle_id[subset], minlength=labeling.num_cycles)
    groups = [
        AtomGroup(cycle, Fraction(int(hit), subset.size * len(cycle)))
        for cycle, hit in zip(labeling.cycle_cells(), hits)
        if hit
    ]
    return DiscreteMeasure(s.grid, groups)


def pushforward(m, s):
    """
    The image measure s_* m, exact.
    """
    masses = defaultdict(Fraction)
    for group in m.groups:
        images, counts = np.unique(s.image(group.cells), return_counts=True)
        for cell, count in zip(images.tolist(), counts.tolist()):
            masses[cell] += group.mass * count
    return DiscreteMeasure.from_masses(m.grid, masses)


def average_measures(measures, weights):
    """
    The convex combination sum(w * m) of measures on one grid, exact.
    """
    masses = defaultdict(Fraction)
    for measure, weight in zip(measures, weights):
        for cell, mass in measure.as_dict().items():
            masses[cell] += Fraction(weight) * mass
    return DiscreteMeasure.from_masses(measures[0].grid, masses)


def pixel_masses(m, px):
    """
    Sums the atoms falling in each pixel of a px x px tiling of the torus.

    Returns:
        dict: (a, b) pixel to Fraction mass, for pixels with positive mass.
    """
    k = m.grid.k
    if px < 1 or k % px:
        raise TilingError("{} pixels per axis do not tile {}".format(px, m.grid))
    block = k // px
    masses = defaultdict(Fraction)
    for group in m.groups:
        i, j = unlin(group.cells, m.grid)
        pixels, counts = np.unique((i // block) * px + j // block, return_counts=True)
        for pixel, count in zip(pixels.tolist(), counts.tolist()):
            masses[divmod(pixel, px)] += group.mass * count
    return masses


def _log10(mass):
    return math.log10(mass.numerator) - math.log10(mass.denominator)


def coarse_density(m, px=DEFAULT_PX):
    """
    Renders a measure as a px x px image of log10 pixel masses.

    Args:
        m (DiscreteMeasure): the measure.
        px: pixels per axis; must divide the grid order.
    Returns:
        DensityImage: the image.
    """
    values = np.full((px, px), FLOOR)
    for (a, b), mass in pixel_masses(m, px).items():
        values[a, b] = _log10(mass)
    return DensityImage(px, values)


def coarse_total_variation(a, b, px=DEFAULT_PX):
    """
    Half the l1 distance between the pixel masses of two measures.

    The grids may differ as long as px divides both orders.

    Returns:
        float: a value in [0, 1].
    """
    first, second = pixel_masses(a, px), pixel_masses(b, px)
    pixels = set(first) | set(second)
    total = sum(
        (abs(first.get(p, Fraction(0)) - second.get(p, Fraction(0))) for p in pixels),
        Fraction(0),
    )
    return float(total / 2)


def save_density(img, path):
    with open(path, "wb") as f:
        np.save(f, img.values)


def load_density(path):
    with open(path, "rb") as f:
        values = np.load(f)
    return DensityImage(values.shape[0], values)
