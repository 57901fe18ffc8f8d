import logging
import os
from logging.handlers import TimedRotatingFileHandler

from torus_discretization.settings import log_dir

# Logging must be handled here as some imports might log errors
log_folder = log_dir()
if not os.path.exists(log_folder):
    os.makedirs(log_folder)
log_filepath = os.path.join(log_folder, "Torus_Disc.log")
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s [%(levelname)s] %(message)s",
    handlers=[
        TimedRotatingFileHandler(log_filepath, when="midnight", backupCount=30),
        logging.StreamHandler(),
    ],
)

import argparse
import json
import sys

from torus_discretization.ergo_measure import (
    coarse_density,
    invariant_measure,
    load_density,
    save_density,
)
from torus_discretization.errors import DiscretizationError
from torus_discretization.graph_core import analyze, max_basin_atom
from torus_discretization.lax_lab import lax_cyclic_approximation
from torus_discretization.map_kit import discretize, parse_map_document
from torus_discretization.render import render_density_pgm, render_density_ppm
from torus_discretization.result_cache import ResultCache
from torus_discretization.settings import DEFAULT_MAX_BYTES, DEFAULT_PX
from torus_discretization.shadow_probe import shadow_fraction
from torus_discretization.sweep import property_frequency, read_rows, run_sweep, sweep_csv_path
from torus_discretization.sweep_config import load_config
from torus_discretization.torus_grid import make_grid

RENDERERS = {".pgm": render_density_pgm, ".ppm": render_density_ppm}


def load_map(value):
    """
    Gets a map from a built-in name or from the path of a JSON map document.
    """
    if os.path.isfile(value):
        with open(value, "r", encoding="utf-8") as f:
            return parse_map_document(json.load(f))
    return parse_map_document(value)


def _emit(document):
    print(json.dumps(document, indent=2, sort_keys=True))


def analyze_command(args):
    g = make_grid(args.k)
    stats, labeling = analyze(discretize(load_map(args.map), g, max_bytes=args.max_bytes))
    _emit(
        {
            "k": g.k,
            "q": stats.q,
            "card_omega": stats.card_omega,
            "num_cycles": stats.num_cycles,
            "max_cycle_len": stats.max_cycle_len,
            "image_card": stats.image_card,
            "stabilization_time": stats.stabilization_time,
            "recurrence_rate": stats.recurrence_rate,
            "max_atom": str(max_basin_atom(stats, labeling)),
        }
    )


def sweep_command(args):
    cfg = load_config(args.config)
    cache = None if args.no_cache else ResultCache()
    rows = run_sweep(cfg, cache)
    logging.info("Wrote {} rows to {}".format(len(rows), sweep_csv_path(cfg)))


def measure_command(args):
    g = make_grid(args.k)
    s = discretize(load_map(args.map), g, max_bytes=args.max_bytes)
    _, labeling = analyze(s, max_bytes=args.max_bytes)
    save_density(coarse_density(invariant_measure(s, labeling), args.px), args.out)
    logging.info("Density image of {} on {} written to {}".format(args.map, g, args.out))


def lax_command(args):
    _, certificate = lax_cyclic_approximation(load_map(args.map), make_grid(args.k), args.eps)
    _emit(
        {
            "is_cyclic": certificate.is_cyclic,
            "displacement_max": certificate.displacement_max,
            "d_n": certificate.d_n,
            "matching_d_n": certificate.matching_d_n,
            "bound": certificate.bound,
            "below_threshold": certificate.below_threshold,
        }
    )


def shadow_command(args):
    fraction = shadow_fraction(
        load_map(args.map), make_grid(args.k), args.delta, args.horizon, args.samples, args.seed
    )
    _emit({"shadow_fraction": fraction})


def render_command(args):
    extension = os.path.splitext(args.out)[1].lower()
    if extension not in RENDERERS:
        raise ValueError("Output must end in .pgm or .ppm, got {}".format(args.out))
    written = RENDERERS[extension](load_density(args.input), args.out)
    logging.info("Wrote {} bytes to {}".format(written, args.out))


def frequency_command(args):
    for m, proportion in property_frequency(read_rows(args.csv), args.predicate):
        print("{},{}".format(m, format(float(proportion), ".12g")))


def _add_map_arguments(parser):
    parser.add_argument(
        "--map", type=str, required=True, help="A built-in map name or a JSON map document"
    )
    parser.add_argument("--k", type=int, required=True, help="The grid order")


def create_parser():
    parser = argparse.ArgumentParser(
        description="Discretizations of torus homeomorphisms and their dynamics"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    analyze_parser = subparsers.add_parser("analyze", help="Functional-graph statistics of f_N")
    _add_map_arguments(analyze_parser)
    analyze_parser.add_argument("--max_bytes", type=int, default=DEFAULT_MAX_BYTES)
    analyze_parser.set_defaults(func=analyze_command)

    sweep_parser = subparsers.add_parser("sweep", help="Runs a sweep over grid orders")
    sweep_parser.add_argument("--config", type=str, required=True, help="JSON sweep config")
    sweep_parser.add_argument(
        "--no_cache", action="store_true", help="Recomputes every row and caches nothing"
    )
    sweep_parser.set_defaults(func=sweep_command)

    measure_parser = subparsers.add_parser(
        "measure", help="Saves the log density of the invariant measure as .npy"
    )
    _add_map_arguments(measure_parser)
    measure_parser.add_argument("--px", type=int, default=DEFAULT_PX, help="Pixels per axis")
    measure_parser.add_argument("--out", type=str, required=True, help="The output .npy file")
    measure_parser.add_argument("--max_bytes", type=int, default=DEFAULT_MAX_BYTES)
    measure_parser.set_defaults(func=measure_command)

    lax_parser = subparsers.add_parser("lax", help="Builds a certified cyclic approximation")
    _add_map_arguments(lax_parser)
    lax_parser.add_argument("--eps", type=float, required=True, help="The target distance")
    lax_parser.set_defaults(func=lax_command)

    shadow_parser = subparsers.add_parser("shadow", help="Fraction of shadowing orbits")
    _add_map_arguments(shadow_parser)
    shadow_parser.add_argument("--delta", type=float, required=True)
    shadow_parser.add_argument("--horizon", type=int, required=True)
    shadow_parser.add_argument("--samples", type=int, required=True)
    shadow_parser.add_argument("--seed", type=int, default=0)
    shadow_parser.set_defaults(func=shadow_command)

    render_parser = subparsers.add_parser("render", help="Renders a saved density as PGM/PPM")
    render_parser.add_argument("--in", dest="input", type=str, required=True)
    render_parser.add_argument("--out", type=str, required=True, help="A .pgm or .ppm file")
    render_parser.set_defaults(func=render_command)

    frequency_parser = subparsers.add_parser(
        "frequency", help="Running proportion of sweep rows satisfying a predicate"
    )
    frequency_parser.add_argument("--csv", type=str, required=True, help="A sweep CSV")
    frequency_parser.add_argument(
        "--predicate",
        type=str,
        required=True,
        help="is_permutation, is_cyclic_permutation, omega_below(t) or cycles_at_least(m)",
    )
    frequency_parser.set_defaults(func=frequency_command)
    return parser


def main_cli(argv=None):
    args = create_parser().parse_args(argv)
    try:
        args.func(args)
    except (DiscretizationError, LookupError, ValueError, OSError) as e:
        logging.error("{} failed: {}".format(args.command, e))
        sys.exit(1)


if __name__ == "__main__":
    main_cli()
