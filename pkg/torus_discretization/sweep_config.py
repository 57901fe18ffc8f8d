"""
Sweep configuration documents.

A document is a JSON object such as:

    {
        "map": "f1",
        "schedule": {"base": 128, "multipliers": [1, 2, 3]},
        "analyses": ["stats", "measure"],
        "budgets": {"max_bytes": 1073741824, "max_seconds": 60},
        "seed": 0,
        "output_dir": "results"
    }

The schedule may instead list grid orders directly: {"ks": [64, 128]}. The map is a built-in
name or an inline composition (see map_kit.parse_map_document).
"""

import json
from dataclasses import dataclass, field

from torus_discretization.errors import ConfigError
from torus_discretization.map_kit import (
    expect_keys,
    integer_field,
    map_document,
    number_field,
    parse_map_document,
)
from torus_discretization.settings import DEFAULT_MAX_BYTES, DEFAULT_PX
from torus_discretization.sweep import parse_predicate
from torus_discretization.torus_grid import TorusPoint

ANALYSES = ("stats", "measure", "weakmix", "shadow")

DEFAULT_OUTPUT_DIR = "sweep_output"

MAX_SEED = 2**64 - 1

TOP_LEVEL_KEYS = (
    "analyses",
    "budgets",
    "seed",
    "output_dir",
    "workers",
    "px",
    "shadow",
    "weakmix",
    "frequencies",
)


@dataclass(frozen=True)
class ShadowSettings:
    delta: float = 1e-2
    horizon: int = 100
    samples: int = 1000


@dataclass(frozen=True)
class WeakMixSettings:
    eps: float = 0.25
    pairs: tuple = ((TorusPoint(0.25, 0.25), TorusPoint(0.75, 0.75)),)
    max_m: int = 100


@dataclass(frozen=True)
class SweepConfig:
    map: object
    ks: tuple
    analyses: frozenset = frozenset({"stats"})
    max_bytes: int = DEFAULT_MAX_BYTES
    max_seconds: float = None
    seed: int = 0
    output_dir: str = DEFAULT_OUTPUT_DIR
    workers: int = 1
    px: int = DEFAULT_PX
    shadow: ShadowSettings = field(default_factory=ShadowSettings)
    weakmix: WeakMixSettings = field(default_factory=WeakMixSettings)
    frequencies: tuple = ()

    @property
    def map_doc(self):
        return map_document(self.map)


def _positive_integer(value, path):
    if integer_field(value, path) < 1:
        raise ConfigError(path, "expected a positive integer, got {}".format(value))
    return value


def _positive_number(value, path):
    number = number_field(value, path)
    if not number > 0:
        raise ConfigError(path, "expected a positive number, got {!r}".format(value))
    return number


def _increasing(ks, path):
    for n in range(1, len(ks)):
        if ks[n] <= ks[n - 1]:
            raise ConfigError(
                "{}[{}]".format(path, n), "resolutions must be strictly increasing"
            )
    return tuple(ks)


def _parse_schedule(doc, path):
    if not isinstance(doc, dict):
        raise ConfigError(path, "expected an object, got {!r}".format(doc))
    if "ks" in doc:
        expect_keys(doc, path, ("ks",))
        values, values_path = doc["ks"], path + ".ks"
        if not isinstance(values, list) or not values:
            raise ConfigError(values_path, "expected a nonempty list of grid orders")
        ks = [_positive_integer(v, "{}[{}]".format(values_path, n)) for n, v in enumerate(values)]
        return _increasing(ks, values_path)

    expect_keys(doc, path, ("base", "multipliers"))
    base = _positive_integer(doc["base"], path + ".base")
    multipliers, values_path = doc["multipliers"], path + ".multipliers"
    if not isinstance(multipliers, list) or not multipliers:
        raise ConfigError(values_path, "expected a nonempty list of multipliers")
    ks = [
        base * _positive_integer(v, "{}[{}]".format(values_path, n))
        for n, v in enumerate(multipliers)
    ]
    return _increasing(ks, values_path)


def _parse_analyses(doc, path):
    if not isinstance(doc, list):
        raise ConfigError(path, "expected a list of analysis names")
    for n, name in enumerate(doc):
        if name not in ANALYSES:
            raise ConfigError(
                "{}[{}]".format(path, n),
                "unknown analysis {!r}, valid names are: {}".format(name, ", ".join(ANALYSES)),
            )
    # Statistics are needed by every other analysis
    return frozenset(doc) | {"stats"}


def _parse_budgets(doc, path):
    expect_keys(doc, path, (), ("max_bytes", "max_seconds"))
    max_bytes = _positive_integer(doc.get("max_bytes", DEFAULT_MAX_BYTES), path + ".max_bytes")
    max_seconds = doc.get("max_seconds")
    if max_seconds is not None:
        max_seconds = _positive_number(max_seconds, path + ".max_seconds")
    return max_bytes, max_seconds


def _parse_point(doc, path):
    if not isinstance(doc, list) or len(doc) != 2:
        raise ConfigError(path, "expected a point [x, y], got {!r}".format(doc))
    return TorusPoint(number_field(doc[0], path + "[0]"), number_field(doc[1], path + "[1]"))


def _parse_weakmix(doc, path):
    expect_keys(doc, path, (), ("eps", "pairs", "max_m"))
    defaults = WeakMixSettings()
    pairs = defaults.pairs
    if "pairs" in doc:
        pairs_path = path + ".pairs"
        if not isinstance(doc["pairs"], list) or not doc["pairs"]:
            raise ConfigError(pairs_path, "expected a nonempty list of point pairs")
        parsed = []
        for n, pair in enumerate(doc["pairs"]):
            pair_path = "{}[{}]".format(pairs_path, n)
            if not isinstance(pair, list) or len(pair) != 2:
                raise ConfigError(pair_path, "expected a pair of points")
            parsed.append(
                (_parse_point(pair[0], pair_path + "[0]"), _parse_point(pair[1], pair_path + "[1]"))
            )
        pairs = tuple(parsed)
    return WeakMixSettings(
        eps=_positive_number(doc.get("eps", defaults.eps), path + ".eps"),
        pairs=pairs,
        max_m=_positive_integer(doc.get("max_m", defaults.max_m), path + ".max_m"),
    )


def _parse_shadow(doc, path):
    expect_keys(doc, path, (), ("delta", "horizon", "samples"))
    defaults = ShadowSettings()
    return ShadowSettings(
        delta=_positive_number(doc.get("delta", defaults.delta), path + ".delta"),
        horizon=_positive_integer(doc.get("horizon", defaults.horizon), path + ".horizon"),
        samples=_positive_integer(doc.get("samples", defaults.samples), path + ".samples"),
    )


def _parse_frequencies(doc, path):
    if not isinstance(doc, list):
        raise ConfigError(path, "expected a list of predicate names")
    for n, name in enumerate(doc):
        try:
            parse_predicate(name)
        except (LookupError, ValueError, TypeError) as e:
            raise ConfigError("{}[{}]".format(path, n), str(e)) from None
    return tuple(doc)


def parse_config(document):
    """
    Validates a configuration document.

    Args:
        document (dict): the decoded JSON document.
    Returns:
        SweepConfig: the configuration.
    Raises:
        ConfigError: when a field is missing, unknown or invalid; the error names its path.
        UnknownMapError: when the map names no built-in map.
    """
    expect_keys(document, "", ("map", "schedule"), TOP_LEVEL_KEYS)
    max_bytes, max_seconds = _parse_budgets(document.get("budgets", {}), "budgets")
    seed = integer_field(document.get("seed", 0), "seed")
    if not 0 <= seed <= MAX_SEED:
        raise ConfigError("seed", "expected an unsigned 64-bit integer, got {}".format(seed))
    output_dir = document.get("output_dir", DEFAULT_OUTPUT_DIR)
    if not isinstance(output_dir, str) or not output_dir:
        raise ConfigError("output_dir", "expected a nonempty path, got {!r}".format(output_dir))
    return SweepConfig(
        map=parse_map_document(document["map"], "map"),
        ks=_parse_schedule(document["schedule"], "schedule"),
        analyses=_parse_analyses(document.get("analyses", ["stats"]), "analyses"),
        max_bytes=max_bytes,
        max_seconds=max_seconds,
        seed=seed,
        output_dir=output_dir,
        workers=_positive_integer(document.get("workers", 1), "workers"),
        px=_positive_integer(document.get("px", DEFAULT_PX), "px"),
        shadow=_parse_shadow(document.get("shadow", {}), "shadow"),
        weakmix=_parse_weakmix(document.get("weakmix", {}), "weakmix"),
        frequencies=_parse_frequencies(document.get("frequencies", []), "frequencies"),
    )


def load_config(path):
    """
    Reads and validates a JSON configuration file.
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError("", "{} is not valid JSON: {}".format(path, e)) from None
    return parse_config(document)
