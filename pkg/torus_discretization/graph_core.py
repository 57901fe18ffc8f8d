"""
Functional-graph analysis of finite self-maps: the maximal invariant set, cycles, basins,
image cardinality and stabilization time, with a slow independent oracle for tests.

The fast path peels cells of in-degree zero in rounds. Survivors form the maximal invariant
set, the number of rounds is the stabilization time, and replaying the rounds backwards
labels every tail cell with its cycle and height.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from torus_discretization.errors import CapacityError, DomainError
from torus_discretization.map_kit import DiscreteMap, table_bytes
from torus_discretization.settings import DEFAULT_MAX_BYTES
from torus_discretization.torus_grid import ball_cells

# Auxiliary bytes per cell: in-degree, Omega mask, peel order, tail height, cycle id
ANALYSIS_BYTES_PER_CELL = 4 + 1 + 8 + 4 + 4

# Largest q the naive oracle accepts
ORACLE_MAX_Q = 10**6


@dataclass(frozen=True)
class CellSet:
    """
    The cells {0, ..., q-1} of a map with no geometry attached, such as a random map.
    """

    q: int

    def __str__(self):
        return "cell set (q={})".format(self.q)


@dataclass(frozen=True)
class FuncGraphStats:
    q: int
    card_omega: int
    num_cycles: int
    # Sorted (length, multiplicity) pairs
    cycle_lengths: tuple
    max_cycle_len: int
    image_card: int
    stabilization_time: int

    @property
    def recurrence_rate(self):
        return self.card_omega / self.q

    @property
    def is_permutation(self):
        return self.image_card == self.q

    @property
    def is_cyclic_permutation(self):
        return self.num_cycles == 1 and self.card_omega == self.q


@dataclass(eq=False)
class BasinLabeling:
    """
    Per-cell cycle identifiers and tail heights, and per-cycle basin sizes.

    Cycles are numbered in increasing order of their smallest cell.
    """

    cycle_id: np.ndarray
    basin_count: np.ndarray
    tail_height: np.ndarray

    def __eq__(self, other):
        return (
            np.array_equal(self.cycle_id, other.cycle_id)
            and np.array_equal(self.basin_count, other.basin_count)
            and np.array_equal(self.tail_height, other.tail_height)
        )

    @property
    def num_cycles(self):
        return len(self.basin_count)

    def omega_cells(self):
        return np.flatnonzero(self.tail_height == 0)

    def cycle_cells(self):
        """
        Gets the cells of every cycle.

        Returns:
            list: one sorted array of cells per cycle, in cycle id order.
        """
        omega = self.omega_cells()
        ids = self.cycle_id[omega]
        order = np.argsort(ids, kind="stable")
        bounds = np.cumsum(np.bincount(ids, minlength=self.num_cycles))[:-1]
        return np.split(omega[order], bounds)


def required_bytes(q, entry_bytes=None):
    """
    Estimates the memory analyze needs for q cells, table included.
    """
    table = table_bytes(q) if entry_bytes is None else q * entry_bytes
    return table + q * ANALYSIS_BYTES_PER_CELL


def _length_histogram(lengths):
    values, counts = np.unique(np.asarray(lengths, dtype=np.int64), return_counts=True)
    return tuple((int(v), int(c)) for v, c in zip(values, counts))


def _label_cycles(omega, table):
    """
    Labels each cell of Omega with the smallest cell of its cycle by pointer doubling.

    After t rounds a label is the minimum over a window of 2**t steps along the cycle; once a
    doubling round changes nothing, every window minimum is the cycle minimum.
    """
    succ = np.searchsorted(omega, table[omega])
    label = omega.copy()
    while True:
        doubled = np.minimum(label, label[succ])
        if np.array_equal(doubled, label):
            return label
        label = doubled
        succ = succ[succ]


def analyze(s, max_bytes=DEFAULT_MAX_BYTES, deadline=None):
    """
    Computes the functional-graph statistics and the basin labeling of a finite map.

    Args:
        s (DiscreteMap): the map, materialized or lazy.
        max_bytes: memory budget for the table and the peel buffers.
        deadline (Deadline): optional time budget checked between peel rounds.
    Returns:
        tuple (FuncGraphStats, BasinLabeling): the exact statistics and labeling.
    """
    q = len(s)
    if required_bytes(q) > max_bytes:
        raise CapacityError("analysis of {}".format(s.grid), required_bytes(q), max_bytes)
    table = s.materialize(max_bytes, deadline).table

    indegree = np.bincount(table.astype(np.int64, copy=False), minlength=q).astype(np.int32)
    image_card = int(np.count_nonzero(indegree))

    on_omega = np.ones(q, dtype=bool)
    rounds = []
    frontier = np.flatnonzero(indegree == 0)
    while frontier.size:
        if deadline is not None:
            deadline.check()
        rounds.append(frontier)
        on_omega[frontier] = False
        targets, counts = np.unique(table[frontier], return_counts=True)
        indegree[targets] -= counts
        frontier = targets[indegree[targets] == 0]
    del indegree

    omega = np.flatnonzero(on_omega)
    del on_omega
    minima, inverse, lengths = np.unique(
        _label_cycles(omega, table), return_inverse=True, return_counts=True
    )
    num_cycles = len(minima)

    id_dtype = np.int32 if num_cycles < 2**31 else np.int64
    cycle_id = np.empty(q, dtype=id_dtype)
    cycle_id[omega] = inverse.ravel()
    tail_height = np.zeros(q, dtype=np.int32 if len(rounds) < 2**31 else np.int64)
    for frontier in reversed(rounds):
        successors = table[frontier]
        tail_height[frontier] = tail_height[successors] + 1
        cycle_id[frontier] = cycle_id[successors]

    stats = FuncGraphStats(
        q=q,
        card_omega=len(omega),
        num_cycles=num_cycles,
        cycle_lengths=_length_histogram(lengths),
        max_cycle_len=int(lengths.max()),
        image_card=image_card,
        stabilization_time=len(rounds),
    )
    labeling = BasinLabeling(
        cycle_id=cycle_id,
        basin_count=np.bincount(cycle_id, minlength=num_cycles),
        tail_height=tail_height,
    )
    logging.info(
        "Analyzed {}: |Omega|={} cycles={} stabilization={}".format(
            s.grid, stats.card_omega, stats.num_cycles, stats.stabilization_time
        )
    )
    return stats, labeling


def naive_oracle(s, max_q=ORACLE_MAX_Q):
    """
    Recomputes analyze by walking the orbit of every cell with visited marks.

    Used only to check analyze; it is plain Python and slow.

    Args:
        s (DiscreteMap): the map.
        max_q: largest accepted number of cells.
    Returns:
        tuple (FuncGraphStats, BasinLabeling): the same contract as analyze.
    """
    q = len(s)
    if q > max_q:
        raise CapacityError("naive oracle", q, max_q)
    table = s.image(np.arange(q)).tolist()

    new, on_path, done = 0, 1, 2
    state = [new] * q
    height = [0] * q
    representative = [-1] * q
    cycle_lengths = {}
    for start in range(q):
        path = []
        x = start
        while state[x] == new:
            state[x] = on_path
            path.append(x)
            x = table[x]
        if state[x] == on_path:
            first = path.index(x)
            cycle = path[first:]
            smallest = min(cycle)
            cycle_lengths[smallest] = len(cycle)
            for y in cycle:
                representative[y] = smallest
                state[y] = done
            path = path[:first]
        for y in reversed(path):
            height[y] = height[table[y]] + 1
            representative[y] = representative[table[y]]
            state[y] = done

    ids = {smallest: n for n, smallest in enumerate(sorted(cycle_lengths))}
    cycle_id = np.array([ids[r] for r in representative], dtype=np.int64)
    lengths = [cycle_lengths[smallest] for smallest in sorted(cycle_lengths)]
    stats = FuncGraphStats(
        q=q,
        card_omega=sum(lengths),
        num_cycles=len(lengths),
        cycle_lengths=_length_histogram(lengths),
        max_cycle_len=max(lengths),
        image_card=len(set(table)),
        stabilization_time=max(height),
    )
    labeling = BasinLabeling(
        cycle_id=cycle_id,
        basin_count=np.bincount(cycle_id, minlength=len(lengths)),
        tail_height=np.array(height, dtype=np.int64),
    )
    return stats, labeling


def max_basin_atom(stats, labeling):
    """
    Largest atom of the canonical invariant measure, max over cycles of b / (q * length).

    Returns:
        Fraction: the exact value.
    """
    lengths = np.bincount(labeling.cycle_id[labeling.omega_cells()], minlength=stats.num_cycles)
    return max(
        Fraction(int(b), stats.q * int(length))
        for b, length in zip(labeling.basin_count, lengths)
    )


def philox_generator(seed):
    """
    The counter-based generator used wherever this package draws random numbers.
    """
    return np.random.Generator(np.random.Philox(seed))


def random_endomap(q, seed):
    """
    Draws a uniformly random self-map of {0, ..., q-1}.

    Args:
        q: number of cells, at least 1.
        seed: unsigned 64-bit seed.
    Returns:
        DiscreteMap: a materialized map on a CellSet.
    """
    if q < 1:
        raise DomainError("A random map needs at least one cell, got q={}".format(q))
    table = philox_generator(seed).integers(0, q, size=q, dtype=np.int64)
    return DiscreteMap.from_table(CellSet(q), table)


def random_permutation(q, seed):
    """
    Draws a uniformly random permutation of {0, ..., q-1}.
    """
    return philox_generator(seed).permutation(q)


def epsilon_weak_mixing(s, eps, pairs, max_m):
    """
    Finds the first power of s sending every ball of each pair across to its partner.

    Args:
        s (DiscreteMap): a map on a grid.
        eps: the scale; balls have radius eps / 2.
        pairs: list of (TorusPoint, TorusPoint) ball centers.
        max_m: largest power tried, at least 1.
    Returns:
        int: the smallest m in [1, max_m] such that s^m(B) meets B' for every pair, or None.
    """
    if not pairs:
        raise DomainError("Need at least one pair of balls")
    if max_m < 1:
        raise DomainError("max_m must be at least 1, got {}".format(max_m))
    radius = eps / 2
    sources, targets = [], []
    for source, target in pairs:
        for center in (source, target):
            if ball_cells(center, radius, s.grid).size == 0:
                raise DomainError(
                    "Ball of radius {} around ({}, {}) contains no cell of {}".format(
                        radius, center.x, center.y, s.grid
                    )
                )
        sources.append(ball_cells(source, radius, s.grid))
        targets.append(ball_cells(target, radius, s.grid))

    for m in range(1, max_m + 1):
        sources = [np.unique(s.image(cells)) for cells in sources]
        if all(np.isin(cells, target).any() for cells, target in zip(sources, targets)):
            return m
    return None


def permutation_cycle_labels(perm):
    """
    Labels every element of a permutation with the smallest element of its cycle.
    """
    perm = np.asarray(perm, dtype=np.int64)
    return _label_cycles(np.arange(len(perm)), perm)
