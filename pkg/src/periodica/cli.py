"""Command-line entry point: ``periodica <command> [options]``.

Every command writes its results plus a ``manifest.json`` into ``--out``.
``periodica rerun manifest.json`` repeats a run with the recorded options;
the result files are byte-identical for any ``--threads``.

Exit codes: 0 success, 2 invalid input, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
import warnings
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import design as dz
from . import simulation as sim
from .errors import InputError, PeriodicaError
from .inference import confidence_set
from .parallel import default_workers
from .periodogram import build_log_grid, compute_periodogram, peak_indices
from .permutation import DEFAULT_QUANTUM, np_test
from .rng import RngKey
from .timeseries import InferenceConfig, read_timeseries, serialize_timeseries

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 2, 3

# options that never change numeric output and are not echoed as config
_RUNTIME_ONLY = {"threads", "out", "func"}


def _input_args(p):
    p.add_argument("--input", required=True, help="CSV with header t,y,sigma")


def _grid_args(p):
    p.add_argument("--theta-min", type=float, default=0.1)
    p.add_argument("--theta-max", type=float, default=1000.0)
    p.add_argument("--grid", type=int, default=10_000, help="number of log-spaced periods")


def _inference_args(p, replicates=10_000, alpha=0.05):
    p.add_argument("--alpha", type=float, default=alpha)
    p.add_argument("--replicates", type=int, default=replicates)
    p.add_argument("--gamma", type=float, default=0.2, help="peak filter fraction of the top peak")
    p.add_argument("--estimator", choices=["add-one", "mean"], default="add-one")


def _common_args(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None,
                   help="worker processes (default: PERIODICA_THREADS or all cores)")
    p.add_argument("--out", default=".", help="output directory")


def _cfg(args) -> InferenceConfig:
    return InferenceConfig(alpha=args.alpha, replicates=args.replicates,
                           peak_filter_gamma=args.gamma, pvalue_estimator=args.estimator)


def _grid(args):
    return build_log_grid(args.theta_min, args.theta_max, args.grid)


def _write(out: Path, name: str, text: str):
    (out / name).write_text(text, encoding="utf-8")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _peaks_csv(pg, gamma) -> str:
    rows = ["theta,power"]
    rows += [f"{float(pg.periods[i])!r},{float(pg.power[i])!r}" for i in peak_indices(pg.power, gamma)]
    return "\n".join(rows) + "\n"


# -- commands ----------------------------------------------------------------

def cmd_periodogram(args, out: Path, workers: int):
    ts = read_timeseries(args.input)
    pg = compute_periodogram(ts, _grid(args), workers=workers)
    _write(out, "periodogram.csv", pg.to_csv())
    _write(out, "peaks.csv", _peaks_csv(pg, args.gamma))
    return ["periodogram.csv", "peaks.csv"]


def cmd_confset(args, out: Path, workers: int):
    ts = read_timeseries(args.input)
    grid = _grid(args)
    pg = compute_periodogram(ts, grid, workers=workers)
    cs = confidence_set(ts, grid, _cfg(args), RngKey(args.seed, "confset"),
                        candidates=args.candidates, workers=workers, periodogram=pg)
    _write(out, "pvalues.csv", cs.to_csv())
    _write(out, "confset.json", _dump(cs.to_dict()))
    _write(out, "periodogram.csv", pg.to_csv())
    return ["pvalues.csv", "confset.json", "periodogram.csv"]


def cmd_nptest(args, out: Path, workers: int):
    ts = read_timeseries(args.input)
    grid = _grid(args)
    thetas = args.theta0
    if not thetas:
        pg = compute_periodogram(ts, grid, workers=workers)
        thetas = [float(grid.periods[i]) for i in peak_indices(pg.power, args.gamma)]
    cfg = _cfg(args)
    outcomes = []
    for theta0 in thetas:
        key = RngKey(args.seed, "nptest", theta_index=len(outcomes))
        outcomes.append(np_test(ts, grid, theta0, args.quantum, cfg, key, workers=workers))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["theta0", "pvalue", "classes", "group_order"])
    for o in outcomes:
        part = o.details["partition"]
        w.writerow([repr(o.theta0), repr(o.p_value), part["classes"], part["group_order"]])
    _write(out, "nptest.csv", buf.getvalue())
    _write(out, "nptest.json", _dump({"mode": "nonparametric", "quantum": args.quantum,
                                      "quantum_note": "phase tolerance for t = t' (mod theta)",
                                      "outcomes": [o.to_dict() for o in outcomes]}))
    return ["nptest.csv", "nptest.json"]


def cmd_design(args, out: Path, workers: int):
    ts = read_timeseries(args.input)
    grid = _grid(args)
    theta_hat = args.theta_hat
    if theta_hat is None:
        pg = compute_periodogram(ts, grid, workers=workers)
        theta_hat = float(grid.periods[pg.argmax()])
    space = []
    if args.mode in ("jitter", "both"):
        space += [dz.ObservationDesign.jitter(d) for d in args.deltas]
    if args.mode in ("augment", "both"):
        space += [dz.ObservationDesign.augment(k, args.window_days, args.micro_jitter)
                  for k in args.extra_n]
    report = dz.optimal_design(ts, theta_hat, space, _cfg(args), args.r_design, args.eps,
                               RngKey(args.seed, "design"), grid, candidates=args.candidates,
                               workers=workers, theta_nuisance=args.theta_nuisance)
    _write(out, "design.json", _dump(report.to_dict()))
    _write(out, "design.csv", report.to_csv())
    return ["design.json", "design.csv"]


def _spec(args) -> sim.SimulationSpec:
    sigma = args.sigma if args.sigma is not None else (1.0 if args.design == "example1" else 1.5)
    return sim.SimulationSpec(args.design, args.n, args.theta_star, 1.0, sigma, args.span_days)


def cmd_simulate(args, out: Path, workers: int):
    ts = sim.simulate(_spec(args), RngKey(args.seed, "simulate"))
    _write(out, "simulated.csv", serialize_timeseries(ts))
    return ["simulated.csv"]


def cmd_coverage(args, out: Path, workers: int):
    spec = _spec(args)
    if spec.span_days is None and spec.design != "example1":
        spec = sim.SimulationSpec(spec.design, spec.n, spec.theta_star, 1.0, spec.sigma,
                                  sim.COVERAGE_SPAN)
    grid = sim.default_grid(spec, resolution=args.resolution)
    res = sim.coverage_experiment(spec, args.reps, _cfg(args), RngKey(args.seed, "coverage"),
                                  grid=grid, candidates=args.candidates, workers=workers)
    _write(out, "coverage.json", _dump({**res.to_dict(), "design": spec.design, "n": spec.n,
                                        "span_days": spec.span, "grid_size": len(grid)}))
    return ["coverage.json"]


def cmd_peakdist(args, out: Path, workers: int):
    spec = _spec(args)
    grid = sim.default_grid(spec, resolution=args.resolution)
    peaks = sim.peak_sampling_distribution(spec, args.reps, grid, RngKey(args.seed, "peakdist"),
                                           workers=workers)
    rows = ["theta_hat,frequency"]
    rows += [f"{k!r},{v!r}" for k, v in sim.histogram(peaks).items()]
    _write(out, "peak_distribution.csv", "\n".join(rows) + "\n")
    _write(out, "peak_distribution.json", _dump({
        "design": spec.design, "n": spec.n, "reps": args.reps, "grid_size": len(grid),
        "argmax": peaks.tolist(), "modes": [list(m) for m in sim.modes(peaks)]}))
    return ["peak_distribution.csv", "peak_distribution.json"]


def _float_list(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _int_list(text):
    return [int(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="periodica", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"periodica {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("periodogram", help="generalized periodogram and its peaks")
    _input_args(p), _grid_args(p), _common_args(p)
    p.add_argument("--gamma", type=float, default=0.2)
    p.set_defaults(func=cmd_periodogram)

    p = sub.add_parser("confset", help="randomization confidence set for the period")
    _input_args(p), _grid_args(p), _inference_args(p), _common_args(p)
    p.add_argument("--candidates", choices=["peaks", "all"], default="peaks")
    p.set_defaults(func=cmd_confset)

    p = sub.add_parser("nptest", help="nonparametric within-phase-class permutation test")
    _input_args(p), _grid_args(p), _inference_args(p), _common_args(p)
    p.add_argument("--theta0", type=float, action="append", default=[],
                   help="period to test (repeatable; default: qualifying peaks)")
    p.add_argument("--quantum", type=float, default=DEFAULT_QUANTUM,
                   help="phase tolerance in days for mod-theta equivalence")
    p.set_defaults(func=cmd_nptest)

    p = sub.add_parser("design", help="smallest observation design that identifies the period")
    _input_args(p), _grid_args(p), _inference_args(p, replicates=1000), _common_args(p)
    p.add_argument("--mode", choices=["jitter", "augment", "both"], default="both")
    p.add_argument("--theta-hat", type=float, default=None, help="default: periodogram argmax")
    p.add_argument("--theta-nuisance", type=float, default=None)
    p.add_argument("--eps", type=float, default=dz.DEFAULT_EPS)
    p.add_argument("--r-design", type=int, default=dz.DEFAULT_R_DESIGN)
    p.add_argument("--deltas", type=_float_list, default=list(dz.DEFAULT_DELTAS))
    p.add_argument("--extra-n", type=_int_list, default=list(dz.DEFAULT_EXTRA_N))
    p.add_argument("--window-days", type=int, default=90)
    p.add_argument("--micro-jitter", type=float, default=0.01)
    p.add_argument("--candidates", choices=["peaks", "all"], default="peaks")
    p.set_defaults(func=cmd_design)

    for name, func, help_ in (("simulate", cmd_simulate, "draw a synthetic dataset"),
                              ("coverage", cmd_coverage, "coverage of the confidence set"),
                              ("peakdist", cmd_peakdist, "sampling distribution of the peak")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--design", choices=list(sim.DESIGNS), default="i")
        p.add_argument("--n", type=int, default=100)
        p.add_argument("--theta-star", type=float, default=sim.SQRT2)
        p.add_argument("--sigma", type=float, default=None, help="default 1.5 (1 for example1)")
        p.add_argument("--span-days", type=int, default=None)
        _common_args(p)
        if name != "simulate":
            p.add_argument("--reps", type=int, default=500 if name == "coverage" else 1000)
            p.add_argument("--resolution", type=float, default=0.2,
                           help="grid log-spacing times the observing span")
        if name == "coverage":
            _inference_args(p, replicates=2000)
            p.add_argument("--candidates", choices=["peaks", "all"], default="all")
        p.set_defaults(func=func)

    p = sub.add_parser("rerun", help="repeat a run from its manifest.json")
    p.add_argument("manifest")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", default=None, help="default: the manifest's directory")
    p.set_defaults(func=None)
    return ap


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def _config(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in _RUNTIME_ONLY}


def _execute(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    workers = args.threads if args.threads is not None else default_workers()
    started = time.time()
    digest = _digest(args.input) if getattr(args, "input", None) else None
    files = args.func(args, out, workers)
    manifest = {
        "command": args.command,
        "config": _config(args),
        "master_seed": args.seed,
        "input": getattr(args, "input", None),
        "input_sha256": digest,
        "version": __version__,
        "numpy": np.__version__,
        "threads": workers,
        "outputs": files,
        "started_at": datetime.fromtimestamp(started, timezone.utc).isoformat(),
        "wall_clock_seconds": round(time.time() - started, 3),
    }
    _write(out, "manifest.json", _dump(manifest))
    return EXIT_OK


def _rerun(args, parser) -> int:
    path = Path(args.manifest)
    manifest = json.loads(path.read_text(encoding="utf-8"))
    config = manifest["config"]
    required = ["--input", config["input"]] if "input" in config else []
    ns = parser.parse_args([config["command"], *required])
    for k, v in config.items():
        setattr(ns, k, v)
    ns.threads = args.threads
    ns.out = args.out if args.out is not None else str(path.parent)
    if manifest.get("input_sha256") and _digest(ns.input) != manifest["input_sha256"]:
        raise InputError(f"input {ns.input} changed since the manifest was written")
    return _execute(ns)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    warnings.simplefilter("default")
    try:
        if args.command == "rerun":
            return _rerun(args, parser)
        return _execute(args)
    except (InputError, OSError) as err:
        print(f"periodica: error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except PeriodicaError as err:
        print(f"periodica: error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as err:  # noqa: BLE001
        print(f"periodica: internal error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
