"""
Resolution sweeps: one row of functional-graph statistics per grid order, written to CSV in
schedule order, with density images and running property frequencies.

Rows are computed by worker threads; the calling thread is the only one that writes files or
touches the result cache.
"""

import csv
import dataclasses
import logging
import os
import queue
import re
import tempfile
import threading
from dataclasses import dataclass
from fractions import Fraction
from time import perf_counter

from torus_discretization.errors import BudgetTimeout, CapacityError, Deadline
from torus_discretization.ergo_measure import coarse_density, invariant_measure
from torus_discretization.graph_core import analyze, epsilon_weak_mixing, max_basin_atom
from torus_discretization.map_kit import discretize
from torus_discretization.render import render_density_pgm, render_density_ppm
from torus_discretization.result_cache import content_hash
from torus_discretization.shadow_probe import shadow_fraction
from torus_discretization.torus_grid import make_grid

STATUS_OK = "ok"
STATUS_SKIPPED_CAPACITY = "skipped-capacity"
STATUS_SKIPPED_TIMEOUT = "skipped-timeout"

# Significant digits of every decimal written to CSV
DECIMAL_FORMAT = ".12g"

# Characters of a content hash used in file names
NAME_HASH_LENGTH = 16


@dataclass(frozen=True)
class SweepRow:
    k: int
    q: int
    card_omega: int = None
    num_cycles: int = None
    max_cycle_len: int = None
    image_card: int = None
    stabilization_time: int = None
    recurrence_rate: float = None
    max_atom: Fraction = None
    runtime_ms: int = None
    status: str = STATUS_OK
    weak_mixing_m: int = None
    shadow_fraction: float = None

    @property
    def is_ok(self):
        return self.status == STATUS_OK

    def csv_record(self):
        return {name: _csv_value(getattr(self, name)) for name in ROW_FIELDS}

    def as_document(self):
        """
        Gets the row as JSON-compatible data, keeping max_atom exact as an "a/b" string.
        """
        doc = dataclasses.asdict(self)
        if self.max_atom is not None:
            doc["max_atom"] = str(self.max_atom)
        return doc

    @classmethod
    def from_document(cls, doc):
        doc = dict(doc)
        if doc.get("max_atom") is not None:
            doc["max_atom"] = Fraction(doc["max_atom"])
        return cls(**doc)

    @classmethod
    def from_csv_record(cls, record):
        """
        Reads a row back from a CSV record of strings; empty cells become None.
        """
        values = {}
        for name in ROW_FIELDS:
            text = record[name]
            if text == "":
                values[name] = None
            elif name in ("recurrence_rate", "shadow_fraction"):
                values[name] = float(text)
            elif name == "max_atom":
                values[name] = Fraction(text)
            elif name == "status":
                values[name] = text
            else:
                values[name] = int(text)
        return cls(**values)


ROW_FIELDS = tuple(f.name for f in dataclasses.fields(SweepRow))


def _csv_value(value):
    if value is None:
        return ""
    if isinstance(value, Fraction):
        value = float(value)
    if isinstance(value, float):
        return format(value, DECIMAL_FORMAT)
    return str(value)


def _is_permutation(row):
    return row.is_ok and row.image_card == row.q


def _is_cyclic_permutation(row):
    return row.is_ok and row.num_cycles == 1 and row.card_omega == row.q


def _omega_below(threshold):
    return lambda row: row.is_ok and row.card_omega < threshold


def _cycles_at_least(count):
    return lambda row: row.is_ok and row.num_cycles >= count


PLAIN_PREDICATES = {
    "is_permutation": _is_permutation,
    "is_cyclic_permutation": _is_cyclic_permutation,
}

PARAMETRIZED_PREDICATES = {
    "omega_below": _omega_below,
    "cycles_at_least": _cycles_at_least,
}

PREDICATE_PATTERN = re.compile(r"^\s*(\w+)\s*(?:\(\s*([^()]*?)\s*\))?\s*$")


def parse_predicate(name):
    """
    Gets the row predicate named by name.

    Args:
        name: is_permutation, is_cyclic_permutation, omega_below(t) or cycles_at_least(m).
    Returns:
        callable: a function of a SweepRow returning a bool. Rows in a skipped status
            never satisfy a predicate.
    Raises:
        LookupError: the name is not a known predicate.
        ValueError: an argument is missing, superfluous or not a number.
    """
    match = PREDICATE_PATTERN.match(name) if isinstance(name, str) else None
    if match is None:
        raise LookupError("Unknown predicate {!r}".format(name))
    base, argument = match.groups()
    if base in PLAIN_PREDICATES:
        if argument is not None:
            raise ValueError("Predicate {} takes no argument".format(base))
        return PLAIN_PREDICATES[base]
    if base in PARAMETRIZED_PREDICATES:
        if not argument:
            raise ValueError("Predicate {} needs an argument, as in {}(10)".format(base, base))
        return PARAMETRIZED_PREDICATES[base](float(argument))
    valid = list(PLAIN_PREDICATES) + ["{}(n)".format(p) for p in PARAMETRIZED_PREDICATES]
    raise LookupError("Unknown predicate {!r}, valid predicates are: {}".format(base, valid))


def property_frequency(rows, predicate):
    """
    Running proportion of the rows satisfying a predicate.

    Args:
        rows (list[SweepRow]): rows in schedule order.
        predicate: a predicate name accepted by parse_predicate.
    Returns:
        list: (M, proportion among rows 1..M) for every M, proportions as Fractions.
    """
    test = parse_predicate(predicate)
    frequencies = []
    hits = 0
    for m, row in enumerate(rows, start=1):
        hits += bool(test(row))
        frequencies.append((m, Fraction(hits, m)))
    return frequencies


def row_key_document(cfg, k):
    """
    Everything that determines the row for order k, and nothing else.
    """
    doc = {"map": cfg.map_doc, "k": k, "analyses": sorted(cfg.analyses), "seed": cfg.seed}
    if "measure" in cfg.analyses:
        doc["px"] = cfg.px
    if "shadow" in cfg.analyses:
        doc["shadow"] = dataclasses.asdict(cfg.shadow)
    if "weakmix" in cfg.analyses:
        doc["weakmix"] = dataclasses.asdict(cfg.weakmix)
    return doc


def sweep_key(cfg):
    doc = {"rows": [row_key_document(cfg, k) for k in cfg.ks], "frequencies": cfg.frequencies}
    return content_hash(doc)


def sweep_csv_path(cfg):
    return os.path.join(cfg.output_dir, "sweep-{}.csv".format(sweep_key(cfg)[:NAME_HASH_LENGTH]))


def frequency_csv_path(cfg):
    name = "frequency-{}.csv".format(sweep_key(cfg)[:NAME_HASH_LENGTH])
    return os.path.join(cfg.output_dir, name)


def density_paths(cfg, key):
    stem = os.path.join(cfg.output_dir, "density-{}".format(key[:NAME_HASH_LENGTH]))
    return stem + ".pgm", stem + ".ppm"


def _check_writable(directory):
    os.makedirs(directory, exist_ok=True)
    with tempfile.TemporaryFile(dir=directory):
        pass


def compute_row(cfg, k):
    """
    Runs the configured analyses at order k.

    Returns:
        tuple (SweepRow, DensityImage): the row, and its density image when the measure
            analysis is on and px divides k (None otherwise).
    """
    start = perf_counter()
    deadline = Deadline("Sweep row k={}".format(k), cfg.max_seconds)

    def elapsed_ms():
        return int(round(1000 * (perf_counter() - start)))

    try:
        g = make_grid(k)
        s = discretize(cfg.map, g, max_bytes=cfg.max_bytes, deadline=deadline)
        stats, labeling = analyze(s, max_bytes=cfg.max_bytes, deadline=deadline)
        image = None
        if "measure" in cfg.analyses:
            if k % cfg.px:
                logging.info("No density image at k={}: {} pixels do not tile it".format(k, cfg.px))
            else:
                image = coarse_density(invariant_measure(s, labeling), cfg.px)
            deadline.check()
        weak_mixing_m = None
        if "weakmix" in cfg.analyses:
            settings = cfg.weakmix
            weak_mixing_m = epsilon_weak_mixing(s, settings.eps, settings.pairs, settings.max_m)
            deadline.check()
        fraction = None
        if "shadow" in cfg.analyses:
            settings = cfg.shadow
            fraction = shadow_fraction(
                cfg.map, g, settings.delta, settings.horizon, settings.samples, cfg.seed
            )
            deadline.check()
    except (CapacityError, MemoryError) as e:
        logging.warning("Skipping k={}: {!r}".format(k, e))
        return SweepRow(k, k * k, runtime_ms=elapsed_ms(), status=STATUS_SKIPPED_CAPACITY), None
    except BudgetTimeout as e:
        logging.warning("Skipping k={}: {}".format(k, e))
        return SweepRow(k, k * k, runtime_ms=elapsed_ms(), status=STATUS_SKIPPED_TIMEOUT), None

    row = SweepRow(
        k=k,
        q=stats.q,
        card_omega=stats.card_omega,
        num_cycles=stats.num_cycles,
        max_cycle_len=stats.max_cycle_len,
        image_card=stats.image_card,
        stabilization_time=stats.stabilization_time,
        recurrence_rate=stats.recurrence_rate,
        max_atom=max_basin_atom(stats, labeling),
        runtime_ms=elapsed_ms(),
        weak_mixing_m=weak_mixing_m,
        shadow_fraction=fraction,
    )
    logging.info("Computed k={} in {} ms".format(k, row.runtime_ms))
    return row, image


class SweepWorker(threading.Thread):
    """
    Takes (index, k) tasks off a queue until it is empty and posts (index, outcome) results.

    The outcome is a (row, image) pair or the exception that stopped the row.
    """

    running = True

    def __init__(self, cfg, tasks, results):
        threading.Thread.__init__(self)
        self.daemon = True
        self.cfg = cfg
        self.tasks = tasks
        self.results = results
        logging.info("Starting sweep worker")

    def run(self):
        while self.running:
            try:
                index, k = self.tasks.get_nowait()
            except queue.Empty:
                return
            try:
                outcome = compute_row(self.cfg, k)
            except Exception as e:
                logging.exception("Unable to compute the row for k={}".format(k))
                outcome = e
            self.results.put((index, outcome))


def _images_present(cfg, k, key):
    if "measure" not in cfg.analyses or k % cfg.px:
        return True
    return all(os.path.exists(path) for path in density_paths(cfg, key))


def _stop(workers):
    # Faster if threads are stopped first, then joined after.
    for worker in workers:
        worker.running = False
    for worker in workers:
        worker.join()


def _cache_entry(cfg, key, map_key, row):
    return {
        "key": key,
        "map_key": map_key,
        "k": row.k,
        "seed": cfg.seed,
        "analyses": ",".join(sorted(cfg.analyses)),
        "row": row.as_document(),
    }


def _keep_finished(cfg, cache, outcomes, results, keys, map_key, fresh):
    """
    Caches the rows that finished out of schedule order before a sweep is aborted.

    Rows already written to the CSV are flushed and cached as they are written.
    """
    while True:
        try:
            done, outcome = results.get_nowait()
        except queue.Empty:
            break
        if not isinstance(outcome, Exception):
            outcomes[done] = outcome
    finished = [
        _cache_entry(cfg, keys[index], map_key, row)
        for index, (row, _) in sorted(outcomes.items())
        if index in fresh and row.is_ok
    ]
    if cache is not None and finished:
        cache.store(finished)
        logging.info("Kept {} finished rows of the aborted sweep".format(len(finished)))


def write_frequencies(cfg, rows, path):
    """
    Writes the running proportion of every configured predicate, one line per M.
    """
    columns = [property_frequency(rows, name) for name in cfg.frequencies]
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["M"] + list(cfg.frequencies))
        for m in range(len(rows)):
            writer.writerow([m + 1] + [_csv_value(column[m][1]) for column in columns])


def read_rows(path):
    with open(path, "r", newline="", encoding="utf-8") as handle:
        return [SweepRow.from_csv_record(record) for record in csv.DictReader(handle)]


def run_sweep(cfg, cache=None):
    """
    Runs a sweep over every order of the schedule.

    Args:
        cfg (SweepConfig): the sweep.
        cache (ResultCache): optional cache; rows found there are not recomputed and fresh
            rows with status ok are added to it.
    Returns:
        list[SweepRow]: one row per order, in schedule order. Orders beyond a budget get a
            skipped status.
    Raises:
        OSError: the output directory cannot be written; raised before any computation.
        Exception: whatever stopped a row other than a budget. The CSV keeps the rows before
            it and every finished ok row is cached first.
    """
    _check_writable(cfg.output_dir)
    keys = [content_hash(row_key_document(cfg, k)) for k in cfg.ks]
    map_key = content_hash(cfg.map_doc)

    outcomes = {}
    tasks = queue.Queue()
    for index, (k, key) in enumerate(zip(cfg.ks, keys)):
        cached = cache.lookup(key) if cache is not None else None
        if cached is not None and _images_present(cfg, k, key):
            outcomes[index] = (SweepRow.from_document(cached), None)
        else:
            tasks.put((index, k))
    fresh = {index for index in range(len(cfg.ks)) if index not in outcomes}

    results = queue.Queue()
    workers = [SweepWorker(cfg, tasks, results) for _ in range(min(cfg.workers, len(fresh)))]
    for worker in workers:
        worker.start()

    rows = []
    csv_path = sweep_csv_path(cfg)
    logging.info("Sweeping {} over {} orders into {}".format(cfg.map, len(cfg.ks), csv_path))
    with open(csv_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=ROW_FIELDS, lineterminator="\n")
        writer.writeheader()
        for index, (k, key) in enumerate(zip(cfg.ks, keys)):
            while index not in outcomes:
                done, outcome = results.get()
                if isinstance(outcome, Exception):
                    _stop(workers)
                    _keep_finished(cfg, cache, outcomes, results, keys, map_key, fresh)
                    logging.error("Sweep aborted at k={}: {}".format(cfg.ks[done], outcome))
                    raise outcome
                outcomes[done] = outcome
            row, image = outcomes.pop(index)

            if image is not None:
                pgm_path, ppm_path = density_paths(cfg, key)
                render_density_pgm(image, pgm_path)
                render_density_ppm(image, ppm_path)
            writer.writerow(row.csv_record())
            handle.flush()
            if cache is not None and index in fresh and row.is_ok:
                cache.store([_cache_entry(cfg, key, map_key, row)])
            rows.append(row)

    _stop(workers)
    if cfg.frequencies:
        write_frequencies(cfg, rows, frequency_csv_path(cfg))
    skipped = sum(not row.is_ok for row in rows)
    logging.info("Sweep finished: {} rows, {} skipped".format(len(rows), skipped))
    return rows
