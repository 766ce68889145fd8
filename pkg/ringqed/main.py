"""Command-line entry point.

Exit codes: 0 success, 1 invalid input, 2 simulation/fit/stage failure,
3 acceptance comparison failed.
"""

import argparse
import dataclasses
import logging
import os
import sys

import numpy as np

from ringqed import __version__
from ringqed.config import DEFAULT_CONFIG_PATH, load_config, validate
from ringqed.emitter import purcell_from_lifetime_ratio, purcell_from_reference_lifetime, purcell_vs_detuning
from ringqed.errors import FitError, SimulationError, StageError, ValidationError
from ringqed.fitting import extract_fsr, extract_q, fit, poisson_weights
from ringqed.io import (
    DECAY_COLUMNS,
    ODMR_COLUMNS,
    RABI_COLUMNS,
    SPECTRUM_COLUMNS,
    read_xy,
    to_json,
    write_dataset,
    write_json,
    write_matrix,
)
from ringqed.models import model_by_name
from ringqed.pipeline import (
    find_ring,
    generate_tuning_map,
    rabi_sequence,
    ring_label,
    run_scenario,
    simulate_decay,
    simulate_mode_window,
    simulate_odmr,
    simulate_rabi,
    simulate_ring_spectrum,
)
from ringqed.report import compare_reports, format_table, load_report
from ringqed.spinner import Spinner

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_FAILURE = 2
EXIT_ACCEPTANCE = 3

MODELS = ("lorentzian", "multi_lorentzian", "exp_decay", "damped_cosine")
COUNT_MODELS = ("exp_decay", "damped_cosine")


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with the invalid-input code instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _load(args):
    config = load_config(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
        validate(config)
    return config


def _output(args, name: str) -> str:
    out_dir = args.out_dir or "."
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, f"{name}.{args.format}")


def _write(args, name: str, columns, *arrays) -> None:
    path = _output(args, name)
    write_dataset(path, columns, *arrays, fmt=args.format)
    print(f"Wrote {path}")


# -- Generators --

def cmd_simulate_spectrum(args) -> int:
    config = _load(args)
    ring = find_ring(config, args.diameter if args.diameter is not None else config.cavity.tuned_diameter_um)
    label = ring_label(ring.diameter_um)
    if args.window:
        grid, y, mode = simulate_mode_window(config, ring)
        print(f"Mode m={mode.azimuthal_order} at {mode.center_wavelength_nm:.3f} nm, Q={mode.q_factor:g}")
        _write(args, f"mode_window_{label}", SPECTRUM_COLUMNS, grid, y)
    else:
        grid, y, modes = simulate_ring_spectrum(config, ring)
        print(f"{len(modes)} modes in band: " + ", ".join(f"{m.center_wavelength_nm:.2f}" for m in modes))
        _write(args, f"spectrum_{label}", SPECTRUM_COLUMNS, grid, y)
    return EXIT_OK


def cmd_tune_map(args) -> int:
    config = _load(args)
    tmap = generate_tuning_map(config, args.collection)
    steps = np.arange(len(tmap.modes))
    path = _output(args, f"tuning_map_{args.collection}")
    if args.format == "csv":
        write_matrix(path, "step", steps, tmap.wavelengths_nm, tmap.intensity)
    else:
        write_json(path, {
            "step": steps.tolist(),
            "wavelength_nm": tmap.wavelengths_nm.tolist(),
            "intensity": tmap.intensity.tolist(),
            "detuning_nm": tmap.detunings_nm.tolist(),
        })
    t = config.tuning
    print(f"Sensitivity {tmap.sensitivity_nm_per_pa_l:.4g} nm/(Pa L); "
          f"ZPL on/off ({t.crossing_point}/{t.off_point}) = {tmap.on_off_ratio(t.crossing_point, t.off_point):.2f}")
    print(f"Wrote {path}")
    return EXIT_OK


def cmd_decay(args) -> int:
    config = _load(args)
    if args.point is not None:
        tmap = generate_tuning_map(config)
        if args.point not in tmap.points:
            raise ValidationError(f"unknown tuning point '{args.point}'")
        step = tmap.points[args.point]
        f = purcell_vs_detuning(config.emitter.f_max, tmap.modes[step], tmap.detunings_nm[step])
        task = f"point_{args.point}"
    else:
        f = args.purcell
        task = "cli"
    trace = simulate_decay(config, f, task)
    for warning in trace.warnings:
        print(f"Warning: {warning}")
    print(f"Purcell factor {f:.3f}, {trace.total_counts} counts")
    _write(args, "decay", DECAY_COLUMNS, trace.bin_starts, trace.counts)
    return EXIT_OK


def cmd_odmr(args) -> int:
    config = _load(args)
    if args.path not in config.spin.path_fractions:
        raise ValidationError(f"path '{args.path}' has no photon fraction in the config")
    data = simulate_odmr(config, args.path)
    _write(args, f"odmr_{args.path}", ODMR_COLUMNS, data.freq_mhz, data.contrast)
    return EXIT_OK


def cmd_rabi(args) -> int:
    config = _load(args)
    if args.path not in config.spin.path_fractions:
        raise ValidationError(f"path '{args.path}' has no photon fraction in the config")
    sweep = simulate_rabi(config, args.path, config.workers)
    _write(args, f"rabi_{args.path}", RABI_COLUMNS, sweep.values, sweep.counts)
    path = os.path.join(args.out_dir or ".", "rabi_sequence.json")
    write_json(path, rabi_sequence(config).to_list())
    print(f"Wrote {path}")
    return EXIT_OK


# -- Analysis --

def cmd_fit(args) -> int:
    if args.peaks < 1:
        raise ValidationError(f"--peaks must be >= 1, got {args.peaks}")
    model = model_by_name(args.model, args.peaks)
    _, x, y = read_xy(args.csv)
    weighting = args.weights or ("poisson" if args.model in COUNT_MODELS else "unit")
    weights = poisson_weights(y) if weighting == "poisson" else None
    result = fit(model, x, y, weights=weights)

    out = result.to_dict()
    if args.model in ("lorentzian", "multi_lorentzian"):
        out["q"] = [list(extract_q(result, k)) for k in range((model.n_params - 1) // 3)]
    if args.model == "multi_lorentzian" and args.peaks >= 3:
        out["fsr"] = list(extract_fsr([result.value(f"center_{k + 1}") for k in range(args.peaks)]))
    if not result.converged:
        print("Warning: fit hit the iteration cap", file=sys.stderr)
    print(to_json(out), end="")
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        write_json(os.path.join(args.out_dir, f"fit_{args.model}.json"), out)
    return EXIT_OK


def cmd_analyze(args) -> int:
    if args.tau0 is not None or args.dwf is not None:
        missing = [flag for flag, v in (("--tau0", args.tau0), ("--dwf", args.dwf)) if v is None]
        if missing:
            raise ValidationError(f"reference-lifetime method needs {' and '.join(missing)}")
        result = purcell_from_reference_lifetime(args.tau0, args.dwf, args.tau_on, args.tau_off)
    else:
        if args.xi is None:
            raise ValidationError("give --xi, or --tau0 with --dwf")
        result = purcell_from_lifetime_ratio(args.tau_off, args.tau_on, args.xi)
    print(f"F = {result.f:.2f} ({result.method.value})")
    for warning in result.warnings:
        print(f"Warning: {warning}")
    return EXIT_OK


def cmd_run(args) -> int:
    config = _load(args)
    out_dir = args.out_dir or "ringqed_run"
    with Spinner(f"Running scenario (seed {config.seed})"):
        report = run_scenario(config, out_dir, workers=args.workers)
    print(format_table(report.to_dict()))
    print(f"Report written to {os.path.join(out_dir, 'report.json')}")
    return EXIT_OK if report.passed else EXIT_ACCEPTANCE


def cmd_report(args) -> int:
    data = load_report(args.compare)
    print(format_table(data))
    status = EXIT_OK if all(r["pass"] for r in data["records"]) else EXIT_ACCEPTANCE
    if args.against:
        diffs = compare_reports(data, load_report(args.against))
        if diffs:
            print(f"{len(diffs)} record(s) differ: {', '.join(diffs)}")
            status = EXIT_ACCEPTANCE
        else:
            print("Reports agree on every record")
    return status


def build_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--out-dir", default=None, help="directory for output files")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="dataset file format")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")

    with_config = _ArgumentParser(add_help=False)
    with_config.add_argument("--config", default=DEFAULT_CONFIG_PATH, help="scenario file (.json or .yaml)")

    parser = _ArgumentParser(prog="ringqed", description="Ring-cavity divacancy emission toolkit")
    parser.add_argument("--version", action="version", version=f"ringqed {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("simulate-spectrum", parents=[common, with_config], help="ring mode spectrum")
    p.add_argument("--diameter", type=float, default=None, help="ring diameter in um (default: tuned ring)")
    p.add_argument("--window", action="store_true", help="single-mode window for Q instead of the FSR band")
    p.set_defaults(handler=cmd_simulate_spectrum)

    p = sub.add_parser("tune-map", parents=[common, with_config], help="gas-tuning intensity map")
    p.add_argument("--collection", choices=("grating", "confocal"), default="grating")
    p.set_defaults(handler=cmd_tune_map)

    p = sub.add_parser("decay", parents=[common, with_config], help="time-resolved PL decay histogram")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--purcell", type=float, default=0.0, help="Purcell factor (default 0, uncoupled)")
    group.add_argument("--point", default=None, help="labelled tuning point, e.g. D")
    p.set_defaults(handler=cmd_decay)

    for name, helptext, handler in (("odmr", "zero-field ODMR spectrum", cmd_odmr),
                                    ("rabi", "Rabi oscillation sweep", cmd_rabi)):
        p = sub.add_parser(name, parents=[common, with_config], help=helptext)
        p.add_argument("--path", choices=("confocal_off", "grating_off", "grating_on"), default="grating_on")
        p.set_defaults(handler=handler)

    p = sub.add_parser("fit", parents=[common], help="fit a model to a two-column CSV")
    p.add_argument("model", choices=MODELS)
    p.add_argument("csv")
    p.add_argument("--peaks", type=int, default=1, help="number of peaks for multi_lorentzian")
    p.add_argument("--weights", choices=("unit", "poisson"), default=None)
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("analyze", parents=[common], help="closed-form analyses")
    analyses = p.add_subparsers(dest="analysis", metavar="analysis")
    a = analyses.add_parser("purcell", parents=[common], help="Purcell factor from lifetimes")
    a.add_argument("--tau-off", type=float, required=True, help="off-resonance lifetime (ns)")
    a.add_argument("--tau-on", type=float, required=True, help="on-resonance lifetime (ns)")
    a.add_argument("--xi", type=float, default=None, help="ZPL branching ratio")
    a.add_argument("--tau0", type=float, default=None, help="reference film lifetime (ns)")
    a.add_argument("--dwf", type=float, default=None, help="Debye-Waller factor")
    a.set_defaults(handler=cmd_analyze)

    p = sub.add_parser("run", parents=[common], help="full scenario with acceptance report")
    p.add_argument("config", nargs="?", default=DEFAULT_CONFIG_PATH)
    p.add_argument("--workers", type=int, default=None, help="thread count (default: from config)")
    p.set_defaults(handler=cmd_run)

    p = sub.add_parser("report", parents=[common], help="show or compare reports")
    p.add_argument("--compare", required=True, help="report.json to check")
    p.add_argument("--against", default=None, help="second report that must agree record by record")
    p.set_defaults(handler=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_INVALID
    if getattr(args, "handler", None) is None:
        parser.print_usage(sys.stderr)
        return EXIT_INVALID

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if getattr(args, "workers", None) is not None and args.workers < 1:
        print("Error: --workers must be >= 1", file=sys.stderr)
        return EXIT_INVALID

    try:
        return args.handler(args)
    except (SimulationError, FitError, StageError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_FAILURE
    except (ValueError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
