"""Experiment pipeline: spectrum -> classify -> simulate -> diagnose, persisted as flat files."""
from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classifier import GLOBAL_FOR_SMALL_DATA, initial_data_props, manifold_checks, predict_regime
from .config import ExperimentConfig, config_hash, get_path, load_config, parse_config, serialize_config, set_path
from .diagnostics import (MonitorReport, bounded_domain_kaplan, check_phi_ode, g_functional_check, kaplan_phi,
                          supersolution_check)
from .grid import ConfigurationError
from .solver import Trajectory, simulate
from .spectral import DIRICHLET, assemble_radial_laplacian, lambda1_ball, lambda1_manifold

__all__ = ["RunRecord", "run_experiment", "run_sweep", "load_record", "load_trajectory", "diagnose_run",
           "write_csv", "format_float", "parse_record", "predict_for_config"]

RECORD = "record.txt"


def format_float(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _value(s: str):
    try:
        return float(s)
    except ValueError:
        return s


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([format_float(x) for x in r])


def parse_record(text: str) -> dict:
    """key=value lines into a dict (values kept as strings)."""
    out = {}
    for line in text.splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


@dataclass
class RunRecord:
    name: str
    config_hash: str
    directory: str
    prediction: dict = field(default_factory=dict)
    outcome: dict = field(default_factory=dict)
    monitors: list = field(default_factory=list)  # (check, status, margin, location, context)
    files: list = field(default_factory=list)
    errors: dict = field(default_factory=dict)  # stage -> message
    wall_clock: float = 0.0
    cached: bool = False

    @property
    def ok(self) -> bool:
        return not self.errors

    @property
    def monitors_passed(self) -> bool:
        return all(m[1] != "fail" for m in self.monitors)

    def record_lines(self):
        lines = [f"name={self.name}", f"config_hash={self.config_hash}"]
        lines += [f"prediction.{k}={format_float(v)}" for k, v in self.prediction.items()]
        lines += [f"outcome.{k}={format_float(v)}" for k, v in self.outcome.items()]
        lines += [f"monitor.{m[4]}.{m[0]}={m[1]}" for m in self.monitors]
        lines += [f"error.{k}={v}" for k, v in self.errors.items()]
        lines.append("files=" + ",".join(self.files))
        lines.append("complete=true")
        return lines


def _read_monitors(path: Path):
    rows = []
    if path.is_file():
        with open(path) as fh:
            for r in csv.DictReader(fh):
                rows.append((r["check_name"], r["pass"], float(r["worst_margin"]), float(r["location"]),
                             r.get("context", "")))
    return rows


def load_record(directory) -> RunRecord:
    d = Path(directory)
    kv = parse_record((d / RECORD).read_text())
    pred = {k[len("prediction."):]: _value(v) for k, v in kv.items() if k.startswith("prediction.")}
    outc = {k[len("outcome."):]: _value(v) for k, v in kv.items() if k.startswith("outcome.")}
    errs = {k[len("error."):]: v for k, v in kv.items() if k.startswith("error.")}
    files = [f for f in kv.get("files", "").split(",") if f]
    wall = 0.0
    if (d / "timing.txt").is_file():
        wall = float(parse_record((d / "timing.txt").read_text()).get("wall_clock", 0.0))
    return RunRecord(kv["name"], kv["config_hash"], str(d), pred, outc, _read_monitors(d / "monitors.csv"),
                     files, errs, wall, True)


def _spectrum_stage(cfg, m, d: Path, files):
    spec = lambda1_manifold(m, cfg.spectrum.schedule())
    rows = []
    for R, n, lam in zip(spec.radii, spec.nodes, spec.values):
        rel = spec.rel_error if spec.rel_error is not None else ""
        rows.append((R, n, lam, spec.extrapolated, "" if spec.analytic is None else spec.analytic, rel))
    write_csv(d / "spectrum.csv", ["R", "n", "lambda1_ball", "extrapolated", "analytic", "rel_error"], rows)
    files.append("spectrum.csv")
    return spec


def predict_for_config(cfg: ExperimentConfig, m=None, spec=None, u0=None):
    """Classifier verdict for a config; the manifold checks use the largest spectrum radius."""
    m = cfg.manifold.build() if m is None else m
    spec = lambda1_manifold(m, cfg.spectrum.schedule()) if spec is None else spec
    u0 = cfg.initial_field(m) if u0 is None else u0
    checks = manifold_checks(m, max(spec.radii), lambda1=spec.extrapolated - spec.errbar,
                             ball_radius=cfg.monitors.ball_radius)
    props = initial_data_props(u0, m, cfg.monitors.ball_radius)
    return predict_regime(spec, cfg.nonlinearity.build(), checks, props)


def _classify_stage(cfg, m, spec, u0, d: Path, files):
    pred = predict_for_config(cfg, m, spec, u0)
    with open(d / "classify.txt", "w") as fh:
        fh.write(f"verdict={pred.verdict}\n")
        for name, ev, ok in pred.checklist:
            fh.write(f"[{'x' if ok else ' '}] {name} :: {ev}\n")
    files.append("classify.txt")
    return pred


def _write_trajectory(traj: Trajectory, d: Path, files):
    write_csv(d / "run.csv", ["t", "sup", "mass", "dt"],
              zip(traj.step_times, traj.step_sups, _step_masses(traj), traj.step_dts))
    header = ["t"] + [f"u{i}" for i in range(traj.grid.n + 1)]
    write_csv(d / "fields.csv", header, (np.concatenate([[t], f]) for t, f in zip(traj.times, traj.fields)))
    files.extend(["run.csv", "fields.csv"])


def _step_masses(traj: Trajectory):
    # masses are recorded at samples; step rows repeat the latest sample mass
    idx = np.searchsorted(traj.times, traj.step_times, side="right") - 1
    return traj.masses[np.clip(idx, 0, traj.masses.size - 1)]


def load_trajectory(directory, cfg: ExperimentConfig | None = None) -> Trajectory:
    """Rebuild a Trajectory from run.csv / fields.csv (fields at samples, steps from run.csv)."""
    d = Path(directory)
    cfg = load_config(d / "config.txt") if cfg is None else cfg
    m, g = cfg.manifold.build(), cfg.grid.build()
    op = assemble_radial_laplacian(m, g, cfg.grid.bc)
    F = np.loadtxt(d / "fields.csv", delimiter=",", skiprows=1, ndmin=2)
    S = np.loadtxt(d / "run.csv", delimiter=",", skiprows=1, ndmin=2)
    fields = F[:, 1:]
    return Trajectory(g, op.weights, F[:, 0], fields, np.max(np.abs(fields), axis=1), fields @ op.weights,
                      S[:, 0], S[:, 1], S[:, 3], op.bc)


def diagnose_run(cfg: ExperimentConfig, traj: Trajectory, outcome: dict, prediction: dict,
                 slack: float | None = None) -> list:
    """Monitor rows (check, status, margin, location, context) for the configured monitors."""
    m = cfg.manifold.build()
    f = cfg.nonlinearity.build()
    mon = cfg.monitors
    slack = mon.slack if slack is None else slack
    rows = []

    def put(rep: MonitorReport, ctx: str):
        rows.extend((c.name, c.status, c.worst_margin, c.location, ctx) for c in rep.checks)

    tag = outcome.get("outcome")
    if tag == "BlowUp" and ("phi_ode" in mon.names or "g_functional" in mon.names):
        t_star = float(outcome["t_star"])
        for frac in mon.fractions:
            T = math.floor(frac * t_star / cfg.scheme.sample_every) * cfg.scheme.sample_every
            k = int(np.argmin(np.abs(traj.times - T)))
            T = float(traj.times[k])
            ctx = f"T={frac:g}t_star"
            phi = kaplan_phi(traj, m, traj.grid, T) if T > 0 else None
            if phi is None or phi.times.size < 3:
                rows.append(("phi_ode", "not-applicable", 0.0, T, ctx))  # too few samples before T
                continue
            if "phi_ode" in mon.names:
                put(check_phi_ode(phi, f.h, tol_rel=slack), ctx)
            if "g_functional" in mon.names:
                delta = mon.delta if mon.delta > 0 else 2.0 * float(phi.values[0])
                put(g_functional_check(phi, f.h, delta=delta, slack=slack), ctx)
    if tag == "Global" and "supersolution" in mon.names:
        if prediction.get("verdict") == GLOBAL_FOR_SMALL_DATA:
            alpha, delta = float(prediction["alpha"]), float(prediction["delta"])
            put(supersolution_check(traj, m, traj.grid, alpha, tol_abs=mon.tol_abs, delta=delta), "supersolution")
            top = float(np.max(traj.sups))
            rows.append(("global_sup_below_delta", "pass" if top < delta else "fail", delta - top,
                         float(traj.times[int(np.argmax(traj.sups))]), "supersolution"))
        else:
            rows.append(("supersolution_dominance", "not-applicable", 0.0, 0.0, "supersolution"))
    if "kaplan_ball" in mon.names and traj.bc == DIRICHLET:
        lam, phi = lambda1_ball(m, traj.grid.R, traj.grid.n)
        put(bounded_domain_kaplan(traj, (lam, phi), f, slack=slack), "kaplan_ball")
    return rows


def run_experiment(cfg: ExperimentConfig, out_root=None, force: bool = False, slack: float | None = None) -> RunRecord:
    """Run the full pipeline into <out_root>/<name>-<hash>; a completed directory is returned as cached."""
    t_start = time.perf_counter()
    cfg.validate()
    h = config_hash(cfg)
    root = Path(out_root if out_root is not None else cfg.output_dir)
    d = root / f"{cfg.name}-{h}"
    if not force and (d / RECORD).is_file() and "complete=true" in (d / RECORD).read_text():
        return load_record(d)
    d.mkdir(parents=True, exist_ok=True)
    (d / "config.txt").write_text(serialize_config(cfg))
    files = ["config.txt"]
    rec = RunRecord(cfg.name, h, str(d), files=files)
    stage = "setup"
    try:
        m = cfg.manifold.build()
        g = cfg.grid.build()
        u0 = cfg.initial_field(m, g)
        stage = "spectrum"
        spec = _spectrum_stage(cfg, m, d, files)
        stage = "classify"
        pred = _classify_stage(cfg, m, spec, u0, d, files)
        rec.prediction = pred.record()
        stage = "simulate"
        out, traj = simulate(m, g, cfg.nonlinearity.build(), u0, cfg.scheme, cfg.grid.bc)
        rec.outcome = {k: v for k, v in out.summary.items()}
        _write_trajectory(traj, d, files)
        stage = "diagnose"
        rec.monitors = diagnose_run(cfg, traj, rec.outcome, rec.prediction, slack)
        write_csv(d / "monitors.csv", ["check_name", "pass", "worst_margin", "location", "context"], rec.monitors)
        files.append("monitors.csv")
    except Exception as exc:  # recorded with the stage name; partial outputs are kept
        rec.errors[stage] = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    rec.wall_clock = time.perf_counter() - t_start
    (d / RECORD).write_text("\n".join(rec.record_lines()) + "\n")
    (d / "timing.txt").write_text(f"wall_clock={rec.wall_clock:.3f}\n")
    return rec


def _sweep_point(args):
    text, out_root, slack, force = args
    return run_experiment(parse_config(text), out_root, force=force, slack=slack)


def run_sweep(base: ExperimentConfig, axis: str, values, out_root=None, workers: int = 1,
              slack: float | None = None, summary_path=None, force: bool = False) -> list:
    """One run per value of the numeric config ``axis``; returns records in input order.

    Points run in a process pool of ``workers`` (sequentially in-process for
    workers=1) and failures stay confined to their own record. The summary
    CSV has columns value, predicted, observed, t_star_or_horizon.
    """
    values = list(values)
    root = Path(out_root if out_root is not None else base.output_dir)
    set_path(base, axis, get_path(base, axis))  # validates the axis before any run
    cfgs = [set_path(base, axis, v) for v in values]
    jobs = [(serialize_config(c), str(root), slack, force) for c in cfgs]
    if workers <= 1 or len(jobs) <= 1:
        records = [_sweep_point(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, os.cpu_count() or 1, len(jobs))) as ex:
            records = list(ex.map(_sweep_point, jobs))
    rows = []
    for v, r in zip(values, records):
        obs = r.outcome.get("outcome", "Error")
        tval = r.outcome.get("t_star", r.outcome.get("horizon", ""))
        rows.append((float(v), r.prediction.get("verdict", "Error"), obs, tval))
    if summary_path is None:
        summary_path = root / f"sweep-{base.name}-{axis.replace('.', '_')}.csv"
    Path(summary_path).parent.mkdir(parents=True, exist_ok=True)
    write_csv(Path(summary_path), ["value", "predicted", "observed", "t_star_or_horizon"], rows)
    return records
