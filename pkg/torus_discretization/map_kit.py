"""
Torus maps built from shears and integer automorphisms, their discretizations and the
distances d(f, g) and d_N(f, sigma).

A MapExpr is a composition f = a_1 o a_2 o ... o a_n of atoms, applied right to left. The
documents accepted by parse_map_document mirror that tree one to one.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.stats import qmc

from torus_discretization.errors import CapacityError, ConfigError, UnknownMapError
from torus_discretization.settings import CHUNK_CELLS, DEFAULT_MAX_BYTES
from torus_discretization.torus_grid import (
    TorusPoint,
    centers_of,
    project_coords,
    reduce_mod1,
    unlin,
    wrap_distances,
)

TWO_PI = 2.0 * math.pi
TRIG_KINDS = ("cos", "sin")
VARIABLES = ("x", "y")


@dataclass(frozen=True)
class TrigTerm:
    """
    coef * cos(2 pi freq v) or coef * sin(2 pi freq v) for v one of the coordinates.
    """

    coef: float
    freq: int
    kind: str = "cos"
    var: str = "x"

    def __post_init__(self):
        if self.kind not in TRIG_KINDS:
            raise ValueError("Trig kind must be one of {}, got {}".format(TRIG_KINDS, self.kind))
        if self.var not in VARIABLES:
            raise ValueError("Variable must be one of {}, got {}".format(VARIABLES, self.var))
        if int(self.freq) != self.freq or self.freq < 1:
            raise ValueError("Frequency must be a positive integer, got {}".format(self.freq))

    def evaluate(self, xs, ys):
        v = xs if self.var == "x" else ys
        # The argument is reduced mod 1 before scaling to keep it in [0, 2 pi)
        arg = TWO_PI * np.mod(self.freq * v, 1.0)
        wave = np.cos(arg) if self.kind == "cos" else np.sin(arg)
        return self.coef * wave

    @property
    def amplitude(self):
        return abs(self.coef)


@dataclass(frozen=True)
class TanhTerm:
    """
    coef * tanh(slope * inner) for a trigonometric inner term.
    """

    coef: float
    slope: float
    inner: TrigTerm

    def evaluate(self, xs, ys):
        return self.coef * np.tanh(self.slope * self.inner.evaluate(xs, ys))

    @property
    def amplitude(self):
        return abs(self.coef)


@dataclass(frozen=True)
class ScalarField:
    """
    A finite sum of terms, summed left to right as listed.
    """

    terms: tuple = ()

    def evaluate(self, xs, ys):
        total = np.zeros(np.shape(xs))
        for term in self.terms:
            total = total + term.evaluate(xs, ys)
        return total

    @property
    def amplitude(self):
        """
        Upper bound of |field| over the torus.
        """
        return sum(term.amplitude for term in self.terms)


@dataclass(frozen=True)
class ShearY:
    """
    (x, y) -> (x, y + p(x, y)).
    """

    field: ScalarField

    def evaluate(self, xs, ys):
        return xs, reduce_mod1(ys + self.field.evaluate(xs, ys))


@dataclass(frozen=True)
class ShearX:
    """
    (x, y) -> (x + q(x, y), y).
    """

    field: ScalarField

    def evaluate(self, xs, ys):
        return reduce_mod1(xs + self.field.evaluate(xs, ys)), ys


@dataclass(frozen=True)
class LinearAuto:
    """
    The automorphism of the torus induced by an integer matrix of determinant +1 or -1.
    """

    matrix: tuple

    def __post_init__(self):
        if len(self.matrix) != 2 or any(len(row) != 2 for row in self.matrix):
            raise ValueError("Matrix must be 2x2, got {}".format(self.matrix))
        if any(int(v) != v for row in self.matrix for v in row):
            raise ValueError("Matrix entries must be integers, got {}".format(self.matrix))
        rows = tuple(tuple(int(v) for v in row) for row in self.matrix)
        (a, b), (c, d) = rows
        if abs(a * d - b * c) != 1:
            raise ValueError("Matrix {} does not have determinant +1 or -1".format(rows))
        object.__setattr__(self, "matrix", rows)

    def evaluate(self, xs, ys):
        (a, b), (c, d) = self.matrix
        return reduce_mod1(a * xs + b * ys), reduce_mod1(c * xs + d * ys)


@dataclass(frozen=True)
class Identity:
    def evaluate(self, xs, ys):
        return xs, ys


IDENTITY_MATRIX = ((1, 0), (0, 1))


def _matmul(m, n):
    return tuple(
        tuple(sum(m[r][t] * n[t][c] for t in range(2)) for c in range(2)) for r in range(2)
    )


@dataclass(frozen=True)
class MapExpr:
    """
    A composition of atoms, the last one applied first.
    """

    atoms: tuple = ()
    name: str = field(default=None, compare=False)

    def evaluate(self, xs, ys):
        """
        Vectorized evaluation on coordinate arrays.

        Returns:
            tuple: the image coordinates, reduced into [0, 1).
        """
        for atom in reversed(self.atoms):
            xs, ys = atom.evaluate(xs, ys)
        return xs, ys

    def exact_matrix(self):
        """
        Gets the integer matrix of the composition when it has no nonlinear atom.

        Returns:
            tuple: the 2x2 matrix, or None if a shear is present.
        """
        matrix = IDENTITY_MATRIX
        for atom in self.atoms:
            if isinstance(atom, LinearAuto):
                matrix = _matmul(matrix, atom.matrix)
            elif not isinstance(atom, Identity):
                return None
        return matrix

    def __str__(self):
        return self.name or "map({} atoms)".format(len(self.atoms))


def _trig(coef, freq, kind, var):
    return TrigTerm(coef, freq, kind, var)


def _tanh(coef, freq, var):
    return TanhTerm(coef, 50.0, TrigTerm(1.0, freq, "cos", var))


def _f1_fields():
    p = ScalarField((_trig(1 / 259, 227, "cos", "x"), _trig(1 / 271, 253, "sin", "x")))
    q = ScalarField((_trig(1 / 287, 241, "cos", "y"), _trig(1 / 263, 217, "sin", "y")))
    return p, q


ANOSOV = LinearAuto(((1, 1), (1, 2)))


def _identity():
    return MapExpr((Identity(),), name="identity")


def _anosov():
    return MapExpr((ANOSOV,), name="anosov")


def _f1():
    p, q = _f1_fields()
    return MapExpr((ShearY(p), ShearX(q), ShearY(p)), name="f1")


def _f2():
    p, q = _f1_fields()
    return MapExpr((ShearY(p), ShearX(q), ShearY(p), ANOSOV), name="f2")


def _f3():
    p = ScalarField((_trig(1 / 259, 227, "cos", "y"), _trig(1 / 271, 233, "sin", "x")))
    q = ScalarField(
        (
            _trig(1 / 287, 241, "cos", "y"),
            _trig(1 / 263, 217, "sin", "y"),
            _trig(1 / 263, 271, "cos", "x"),
        )
    )
    return MapExpr((ShearX(q), ShearY(p)), name="f3")


def _f4():
    p = ScalarField((_tanh(1 / 259, 1, "y"), _tanh(1 / 271, 5, "x")))
    q = ScalarField((_tanh(1 / 287, 1, "y"), _tanh(1 / 263, 7, "y"), _tanh(1 / 263, 3, "x")))
    return MapExpr((ShearY(p), ShearX(q), ShearY(p)), name="f4")


BUILTIN_MAPS = {
    "identity": _identity,
    "anosov": _anosov,
    "f1": _f1,
    "f2": _f2,
    "f3": _f3,
    "f4": _f4,
}


def builtin_map(name):
    """
    Gets one of the maps used in the simulations.

    Args:
        name: identity, anosov, f1, f2, f3 or f4.
    Returns:
        MapExpr: the map.
    """
    try:
        return BUILTIN_MAPS[name]()
    except KeyError:
        raise UnknownMapError(name, BUILTIN_MAPS) from None


def eval_map(f, p):
    """
    Evaluates a map at a single point.

    Args:
        f (MapExpr): the map.
        p (TorusPoint): the point.
    Returns:
        TorusPoint: f(p).
    """
    xs, ys = f.evaluate(np.array([p.x]), np.array([p.y]))
    return TorusPoint(xs[0], ys[0])


def table_dtype(q):
    return np.uint32 if q <= 2**32 else np.uint64


def table_bytes(q):
    return q * np.dtype(table_dtype(q)).itemsize


class DiscreteMap:
    """
    A self-map of the cells of a grid, either held as an index table or evaluated on demand.
    """

    def __init__(self, grid, table=None, evaluator=None):
        if (table is None) == (evaluator is None):
            raise ValueError("A discrete map needs exactly one of a table or an evaluator")
        self.grid = grid
        self._table = table
        self._evaluator = evaluator

    @classmethod
    def from_table(cls, grid, table):
        """
        Wraps an explicit table, checking that it is a self-map of the grid's cells.
        """
        table = np.asarray(table)
        if table.shape != (grid.q,):
            raise ValueError("Table has shape {} but {} needs {}".format(table.shape, grid, grid.q))
        if grid.q and (table.min() < 0 or table.max() >= grid.q):
            raise ValueError("Table entries must lie in [0, {})".format(grid.q))
        return cls(grid, table=table.astype(table_dtype(grid.q), copy=False))

    @property
    def is_materialized(self):
        return self._table is not None

    @property
    def table(self):
        if self._table is None:
            raise ValueError("Discrete map is lazy, materialize it first")
        return self._table

    def __len__(self):
        return self.grid.q

    def image(self, cells):
        """
        Gets the images of an array of cells.

        Returns:
            numpy.ndarray: int64 linearizations of the images.
        """
        cells = np.asarray(cells, dtype=np.int64)
        if self._table is not None:
            return self._table[cells].astype(np.int64)
        return self._evaluator(cells)

    def materialize(self, max_bytes=DEFAULT_MAX_BYTES, deadline=None):
        """
        Fills the full table, chunk by chunk.

        Args:
            max_bytes: memory budget for the table.
            deadline (Deadline): optional time budget checked between chunks.
        Returns:
            DiscreteMap: a materialized map with identical entries.
        """
        if self._table is not None:
            return self
        q = self.grid.q
        required = table_bytes(q)
        if required > max_bytes:
            raise CapacityError("table for {}".format(self.grid), required, max_bytes)
        table = np.empty(q, dtype=table_dtype(q))
        for start in range(0, q, CHUNK_CELLS):
            if deadline is not None:
                deadline.check()
            stop = min(start + CHUNK_CELLS, q)
            table[start:stop] = self._evaluator(np.arange(start, stop, dtype=np.int64))
        return DiscreteMap(self.grid, table=table)


def _exact_evaluator(matrix, g):
    (a, b), (c, d) = matrix
    k = g.k

    def evaluate(cells):
        i, j = unlin(cells, g)
        return ((a * i + b * j) % k) * k + (c * i + d * j) % k

    return evaluate


def _float_evaluator(f, g):
    def evaluate(cells):
        xs, ys = centers_of(cells, g)
        return project_coords(*f.evaluate(xs, ys), g)

    return evaluate


def discretize(f, g, materialize=True, max_bytes=DEFAULT_MAX_BYTES, deadline=None):
    """
    Builds the discretization f_N = P_N o f on a grid.

    Compositions of linear automorphisms alone are evaluated in exact integer arithmetic
    on cell indices; everything else is evaluated in floating point at cell centers.

    Args:
        f (MapExpr): the map.
        g (GridSpec): the grid.
        materialize: whether to fill the full table now.
        max_bytes: memory budget for the table.
        deadline (Deadline): optional time budget.
    Returns:
        DiscreteMap: the discretization.
    """
    matrix = f.exact_matrix()
    if matrix is not None:
        evaluator = _exact_evaluator(matrix, g)
    else:
        evaluator = _float_evaluator(f, g)
    lazy = DiscreteMap(g, evaluator=evaluator)
    if not materialize:
        return lazy
    discrete = lazy.materialize(max_bytes, deadline)
    logging.info("Discretized {} on {}".format(f, g))
    return discrete


def grid_sup_distance(f, s):
    """
    The distance d_N(f, sigma): the largest gap between f at a cell center and the center
    of the cell sigma sends it to.

    Args:
        f (MapExpr): the map.
        s (DiscreteMap): a self-map of the grid's cells.
    Returns:
        float: the distance.
    """
    g = s.grid
    worst = 0.0
    for start in range(0, g.q, CHUNK_CELLS):
        cells = np.arange(start, min(start + CHUNK_CELLS, g.q), dtype=np.int64)
        fx, fy = f.evaluate(*centers_of(cells, g))
        sx, sy = centers_of(s.image(cells), g)
        worst = max(worst, float(np.max(wrap_distances(fx, fy, sx, sy))))
    return worst


def halton_points(samples):
    """
    The first points of the unscrambled two-dimensional Halton sequence.

    Prefixes are nested, so a larger sample set always contains a smaller one.
    """
    points = qmc.Halton(d=2, scramble=False).random(samples)
    return points[:, 0], points[:, 1]


def map_sup_distance(f, h, samples):
    """
    Lower estimate of d(f, h) = sup_x d(f(x), h(x)) over a low-discrepancy sample.

    Args:
        f (MapExpr): first map.
        h (MapExpr): second map.
        samples: number of sample points, at least 1.
    Returns:
        float: the largest sampled distance.
    """
    if samples < 1:
        raise ValueError("Need at least one sample, got {}".format(samples))
    xs, ys = halton_points(samples)
    fx, fy = f.evaluate(xs, ys)
    hx, hy = h.evaluate(xs, ys)
    return float(np.max(wrap_distances(fx, fy, hx, hy)))


def number_field(value, path):
    if isinstance(value, bool):
        raise ConfigError(path, "expected a number, got {!r}".format(value))
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(Fraction(value))
        except (ValueError, ZeroDivisionError):
            pass
    raise ConfigError(path, "expected a number or an 'a/b' string, got {!r}".format(value))


def integer_field(value, path):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, "expected an integer, got {!r}".format(value))
    return value


def field_path(path, key):
    return "{}.{}".format(path, key) if path else key


def expect_keys(doc, path, required, optional=()):
    if not isinstance(doc, dict):
        raise ConfigError(path, "expected an object, got {!r}".format(doc))
    for key in required:
        if key not in doc:
            raise ConfigError(field_path(path, key), "missing field")
    for key in doc:
        if key not in required and key not in optional:
            raise ConfigError(field_path(path, key), "unknown field")


def _parse_trig(doc, path):
    expect_keys(doc, path, ("kind", "coef", "freq", "var"))
    try:
        return TrigTerm(
            number_field(doc["coef"], path + ".coef"),
            integer_field(doc["freq"], path + ".freq"),
            doc["kind"],
            doc["var"],
        )
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(path, str(e)) from None


def _parse_term(doc, path):
    if isinstance(doc, dict) and doc.get("kind") == "tanh":
        expect_keys(doc, path, ("kind", "coef", "slope", "inner"))
        return TanhTerm(
            number_field(doc["coef"], path + ".coef"),
            number_field(doc["slope"], path + ".slope"),
            _parse_trig(doc["inner"], path + ".inner"),
        )
    return _parse_trig(doc, path)


def _parse_field(doc, path):
    if not isinstance(doc, list):
        raise ConfigError(path, "expected a list of terms, got {!r}".format(doc))
    return ScalarField(tuple(_parse_term(t, "{}[{}]".format(path, n)) for n, t in enumerate(doc)))


def _parse_atom(doc, path):
    if not isinstance(doc, dict) or len(doc) != 1:
        raise ConfigError(path, "expected an object with a single atom key, got {!r}".format(doc))
    (kind, body), = doc.items()
    inner_path = "{}.{}".format(path, kind)
    if kind == "shear_y":
        return ShearY(_parse_field(body, inner_path))
    if kind == "shear_x":
        return ShearX(_parse_field(body, inner_path))
    if kind == "identity":
        return Identity()
    if kind == "linear":
        if not isinstance(body, list) or any(not isinstance(row, list) for row in body):
            raise ConfigError(inner_path, "expected a 2x2 list of integers")
        rows = tuple(
            tuple(
                integer_field(v, "{}[{}][{}]".format(inner_path, r, c)) for c, v in enumerate(row)
            )
            for r, row in enumerate(body)
        )
        try:
            return LinearAuto(rows)
        except ValueError as e:
            raise ConfigError(inner_path, str(e)) from None
    raise ConfigError(path, "unknown atom '{}'".format(kind))


def parse_map_document(doc, path="map"):
    """
    Builds a MapExpr from a built-in name or an inline composition document.

    Args:
        doc: a map name, or {"compose": [atom, ...]} with atoms such as
            {"shear_y": [term, ...]}, {"shear_x": [...]}, {"linear": [[1, 1], [1, 2]]}
            or {"identity": null}.
        path: the location of the document, used in error messages.
    Returns:
        MapExpr: the map.
    """
    if isinstance(doc, str):
        return builtin_map(doc)
    expect_keys(doc, path, ("compose",), ("name",))
    atoms = doc["compose"]
    if not isinstance(atoms, list):
        raise ConfigError(path + ".compose", "expected a list of atoms")
    return MapExpr(
        tuple(_parse_atom(a, "{}.compose[{}]".format(path, n)) for n, a in enumerate(atoms)),
        name=doc.get("name"),
    )


def _term_document(term):
    if isinstance(term, TanhTerm):
        return {
            "kind": "tanh",
            "coef": term.coef,
            "slope": term.slope,
            "inner": _term_document(term.inner),
        }
    return {"kind": term.kind, "coef": term.coef, "freq": term.freq, "var": term.var}


def map_document(f):
    """
    Gets the inline document describing a map; parse_map_document inverts it.
    """
    atoms = []
    for atom in f.atoms:
        if isinstance(atom, ShearY):
            atoms.append({"shear_y": [_term_document(t) for t in atom.field.terms]})
        elif isinstance(atom, ShearX):
            atoms.append({"shear_x": [_term_document(t) for t in atom.field.terms]})
        elif isinstance(atom, LinearAuto):
            atoms.append({"linear": [list(row) for row in atom.matrix]})
        else:
            atoms.append({"identity": None})
    doc = {"compose": atoms}
    if f.name:
        doc["name"] = f.name
    return doc
