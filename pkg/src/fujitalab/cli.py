"""Command-line interface: ``fujitalab <subcommand> [--config PATH] [--out DIR] [--workers N] [--slack REL]``.

Exit codes: 0 success, 1 validation error, 2 numerical failure, 3 acceptance failure.
"""
from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, config_hash, load_config
from .diagnostics import HypothesisViolation
from .experiment import (diagnose_run, format_float, load_record, load_trajectory, predict_for_config, run_experiment,
                         run_sweep, write_csv)
from .grid import ConfigurationError, RadialGrid
from .heat import kernel_decay_check
from .manifold import DomainError
from .solver import simulate
from .spectral import NumericalError, lambda1_manifold

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_ACCEPTANCE = 0, 1, 2, 3


def _emit(path: Path | None, header, rows):
    """CSV to ``path`` if given, else to stdout."""
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        write_csv(path, header, rows)
        print(f"wrote {path}")
        return
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([format_float(x) for x in r])


def _config(args) -> ExperimentConfig:
    if not args.config:
        raise ConfigurationError("--config PATH is required for this subcommand")
    return load_config(args.config)


def _target(args, cfg, name):
    return None if args.out is None else Path(args.out) / f"{cfg.name}-{config_hash(cfg)}" / name


def cmd_spectrum(args) -> int:
    cfg = _config(args)
    est = lambda1_manifold(cfg.manifold.build(), cfg.spectrum.schedule())
    rel = "" if est.rel_error is None else est.rel_error
    ana = "" if est.analytic is None else est.analytic
    rows = [(R, n, lam, est.extrapolated, ana, rel) for R, n, lam in zip(est.radii, est.nodes, est.values)]
    _emit(_target(args, cfg, "spectrum.csv"), ["R", "n", "lambda1_ball", "extrapolated", "analytic", "rel_error"], rows)
    return EXIT_OK


def cmd_kernel(args) -> int:
    cfg = _config(args)
    m = cfg.manifold.build()
    fit = kernel_decay_check(m, RadialGrid.with_spacing(cfg.grid.R, cfg.grid.h), (args.t_min, args.t_max),
                             args.samples)
    tr = fit.trace
    rows = [(t, c, ms, -fit.slope) for t, c, ms in tr.rows()]
    _emit(_target(args, cfg, "kernel.csv"), ["t", "center_value", "mass", "fitted_rate"], rows)
    return EXIT_OK


def cmd_classify(args) -> int:
    cfg = _config(args)
    pred = predict_for_config(cfg)
    for name, ev, ok in pred.checklist:
        print(f"[{'x' if ok else ' '}] {name} :: {ev}")
    print(f"verdict={pred.verdict}")
    for k, v in pred.record().items():
        print(f"prediction.{k}={format_float(v)}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _config(args)
    m, g = cfg.manifold.build(), cfg.grid.build()
    out, traj = simulate(m, g, cfg.nonlinearity.build(), cfg.initial_field(m, g), cfg.scheme, cfg.grid.bc)
    mass_at = traj.masses[np.clip(np.searchsorted(traj.times, traj.step_times, side="right") - 1, 0, None)]
    _emit(_target(args, cfg, "run.csv"), ["t", "sup", "mass", "dt"],
          zip(traj.step_times, traj.step_sups, mass_at, traj.step_dts))
    for k, v in out.summary.items():
        print(f"outcome.{k}={format_float(v)}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    run_dir = Path(args.run_dir)
    if not (run_dir / "config.txt").is_file():
        raise ConfigurationError(f"{run_dir} is not a run directory (config.txt missing)")
    cfg = load_config(run_dir / "config.txt")
    rec = load_record(run_dir) if (run_dir / "record.txt").is_file() else None
    traj = load_trajectory(run_dir, cfg)
    outcome = rec.outcome if rec else {}
    prediction = rec.prediction if rec else {}
    rows = diagnose_run(cfg, traj, outcome, prediction, args.slack)
    target = Path(args.out) / "monitors.csv" if args.out else run_dir / "monitors.csv"
    _emit(target, ["check_name", "pass", "worst_margin", "location", "context"], rows)
    return EXIT_OK if all(r[1] != "fail" for r in rows) else EXIT_NUMERICAL


def _print_record(rec):
    print(f"run={rec.directory} cached={rec.cached}")
    print(f"prediction.verdict={rec.prediction.get('verdict', 'n/a')} outcome={rec.outcome.get('outcome', 'n/a')}")
    for stage, msg in rec.errors.items():
        print(f"error.{stage}={msg}")


def cmd_run(args) -> int:
    cfg = _config(args)
    rec = run_experiment(cfg, args.out, force=args.force, slack=args.slack)
    _print_record(rec)
    if rec.errors:
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    values = [float(v) for v in args.values.split(",") if v.strip()] if args.values else []
    if args.relative_to_lambda1 and values:
        est = lambda1_manifold(cfg.manifold.build(), cfg.spectrum.schedule())
        values = [v * est.extrapolated for v in values]
    out = Path(args.out or cfg.output_dir)
    summary = out / f"sweep-{cfg.name}-{args.axis.replace('.', '_')}.csv"
    recs = run_sweep(cfg, args.axis, values, out, workers=args.workers, slack=args.slack, summary_path=summary)
    print(f"wrote {summary}")
    for v, r in zip(values, recs):
        print(f"{args.axis}={format_float(v)} predicted={r.prediction.get('verdict', 'Error')} "
              f"observed={r.outcome.get('outcome', 'Error')}")
    return EXIT_NUMERICAL if any(r.errors for r in recs) else EXIT_OK


def cmd_accept(args) -> int:
    from .acceptance import run_acceptance

    results = run_acceptance(out_root=args.out, workers=args.workers, slack=args.slack,
                             only=[int(x) for x in args.only.split(",")] if args.only else None)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_ACCEPTANCE


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="experiment config (key = value text)")
    common.add_argument("--out", metavar="DIR", help="output root (CSV to stdout when omitted, where applicable)")
    common.add_argument("--workers", type=int, default=1, metavar="N", help="process pool size for sweeps")
    common.add_argument("--slack", type=float, default=None, metavar="REL",
                        help="relative slack of the proof-inequality monitors (default: config, 0.1)")

    p = argparse.ArgumentParser(prog="fujitalab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", parents=[common], help="lambda1 exhaustion table").set_defaults(func=cmd_spectrum)
    k = sub.add_parser("kernel", parents=[common], help="on-diagonal heat kernel trace")
    k.add_argument("--t-min", type=float, default=1.0)
    k.add_argument("--t-max", type=float, default=20.0)
    k.add_argument("--samples", type=int, default=40)
    k.set_defaults(func=cmd_kernel)
    sub.add_parser("classify", parents=[common], help="theorem checklist and verdict").set_defaults(func=cmd_classify)
    sub.add_parser("simulate", parents=[common], help="run the solver, emit run CSV").set_defaults(func=cmd_simulate)
    d = sub.add_parser("diagnose", parents=[common], help="proof monitors on a run directory")
    d.add_argument("run_dir")
    d.set_defaults(func=cmd_diagnose)
    r = sub.add_parser("run", parents=[common], help="full pipeline into a hash-keyed directory")
    r.add_argument("--force", action="store_true", help="recompute even if a completed record exists")
    r.set_defaults(func=cmd_run)
    s = sub.add_parser("sweep", parents=[common], help="sweep a numeric config field")
    s.add_argument("--axis", required=True, help="dotted config path, e.g. nonlinearity.alpha")
    s.add_argument("--values", default="", help="comma-separated values")
    s.add_argument("--relative-to-lambda1", action="store_true", help="multiply values by the estimated lambda1")
    s.set_defaults(func=cmd_sweep)
    a = sub.add_parser("accept", parents=[common], help="run the acceptance matrix")
    a.add_argument("--only", default="", help="comma-separated criterion numbers")
    a.set_defaults(func=cmd_accept)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, HypothesisViolation, DomainError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
