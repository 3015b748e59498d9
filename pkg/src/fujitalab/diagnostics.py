"""Runtime monitors for the proof machinery: Kaplan functional, G-decay, supersolution, ball Kaplan."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .heat import delta_bump, heat_sequence
from .manifold import ModelManifold
from .reaction import Nonlinearity, tail_reciprocal_integral
from .grid import RadialField, RadialGrid
from .solver import Trajectory
from .spectral import assemble_radial_laplacian

__all__ = [
    "HypothesisViolation",
    "CheckResult",
    "MonitorReport",
    "PhiSeries",
    "kaplan_phi",
    "check_phi_ode",
    "g_functional_check",
    "supersolution_check",
    "smallness_bounds",
    "bounded_domain_kaplan",
    "ode_threshold",
]

PASS, FAIL, NA = "pass", "fail", "not-applicable"
DEFAULT_SLACK = 0.1


class HypothesisViolation(ValueError):
    """Inputs violate a theorem hypothesis required by the requested quantity."""


@dataclass
class CheckResult:
    name: str
    status: str
    worst_margin: float
    location: float
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.status == PASS


@dataclass
class MonitorReport:
    checks: list = field(default_factory=list)
    data: dict = field(default_factory=dict)

    def add(self, name, ok, margin, location, note="", applicable=True):
        status = NA if not applicable else (PASS if ok else FAIL)
        self.checks.append(CheckResult(name, status, float(margin), float(location), note))
        return self

    @property
    def passed(self) -> bool:
        return all(c.status != FAIL for c in self.checks)

    @property
    def applicable(self) -> bool:
        return any(c.status != NA for c in self.checks)

    def __getitem__(self, name) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def rows(self):
        return [(c.name, c.status, c.worst_margin, c.location) for c in self.checks]


@dataclass
class PhiSeries:
    """Phi(t_k) = sum_i w_i p(o, r_i, T - t_k) u(r_i, t_k)."""

    T: float
    times: np.ndarray
    values: np.ndarray
    weight_mass: np.ndarray | None = None
    dropped: tuple = ()
    phi0_reference: float | None = None  # (e^{T Delta} u0)(o), the continuum right side of (eq33)
    kernels: list | None = None
    phi0_discrete_reference: float | None = None  # <bump, e^{T Delta} u0>, the exact discrete (eq33)

    def _rel(self, ref):
        if ref is None or self.times.size == 0 or self.times[0] != 0.0:
            return None
        return abs(self.values[0] - ref) / abs(ref) if ref != 0 else abs(self.values[0])

    @property
    def phi0_rel_error(self) -> float | None:
        """Phi(0) against the point value at the pole (bump-width smoothing, the 2% property)."""
        return self._rel(self.phi0_reference)

    @property
    def phi0_discrete_rel_error(self) -> float | None:
        """Phi(0) against the bump pairing of e^{T Delta} u0 (self-adjointness, the 1e-6 invariant)."""
        return self._rel(self.phi0_discrete_reference)


def kaplan_phi(traj: Trajectory, m: ModelManifold, g: RadialGrid | None = None, T: float | None = None,
               width_factor: float = 4.0, dt_max: float | None = None, keep_kernels: bool = False) -> PhiSeries:
    """Kaplan functional (eq32) at the pole, kernel weights from the numerical heat flow.

    The weight p(o, ., T - t_k) is an L^1-normalized bump of width
    width_factor*h evolved for T - t_k (one pass through the sorted
    durations). Samples with T - t_k below the resolution floor
    (width)^2 are dropped and listed in ``dropped``. The reference
    (e^{T Delta} u0)(o) for (eq33) is computed on the same operator.
    """
    g = traj.grid if g is None else g
    if T is None or not 0 < T <= traj.times[-1] * (1 + 1e-12):
        raise ValueError("T must lie inside the trajectory horizon")
    op = assemble_radial_laplacian(m, g, traj.bc)
    sel = np.nonzero(traj.times <= T * (1 + 1e-12))[0]
    floor = (width_factor * g.h) ** 2
    keep = [k for k in sel if T - traj.times[k] >= floor]
    dropped = tuple(float(traj.times[k]) for k in sel if T - traj.times[k] < floor)
    durations = sorted(T - traj.times[k] for k in keep)
    bump = delta_bump(op, width_factor)
    kern = heat_sequence(op, bump, durations, dt_max=dt_max)
    by_dur = dict(zip(durations, kern))
    w = op.active_weights
    vals, mass, kernels = [], [], []
    for k in keep:
        p = by_dur[T - traj.times[k]]
        vals.append(float(np.dot(w, p * traj.fields[k][: op.size])))
        mass.append(float(np.dot(w, p)))
        if keep_kernels:
            kernels.append(op.full(p))
    (ref,) = heat_sequence(op, traj.fields[0], [T], dt_max=dt_max)
    return PhiSeries(T, traj.times[keep].copy(), np.array(vals), np.array(mass), dropped, float(ref[0]),
                     kernels if keep_kernels else None, float(np.dot(w, bump[: op.size] * ref)))


def check_phi_ode(phi: PhiSeries, h: Nonlinearity, tol_rel: float = DEFAULT_SLACK, tol_abs: float = 1e-12) -> MonitorReport:
    """(eq311): Phi' >= h(Phi) (1 - tol_rel) - tol_abs at every interior sample (central differences)."""
    t, v = np.asarray(phi.times, float), np.asarray(phi.values, float)
    rep = MonitorReport()
    if t.size < 3:
        raise ValueError("check_phi_ode needs at least 3 samples")
    d = np.gradient(v, t)[1:-1]
    rhs = np.asarray(h(np.maximum(v[1:-1], 0.0)), float)
    margin = d - (rhs * (1.0 - tol_rel) - tol_abs)
    j = int(np.argmin(margin))
    rep.add("phi_ode", margin[j] >= 0, margin[j], t[1:-1][j], f"tol_rel={tol_rel:g}")
    inc = np.diff(v)
    rep.add("phi_increasing", bool(np.all(inc > 0)) or not np.any(v > 0), float(np.min(inc)) if inc.size else 0.0,
            float(t[1 + int(np.argmin(inc))]) if inc.size else 0.0, "eq311c", applicable=bool(np.any(rhs > 0)))
    rel = phi.phi0_rel_error
    if rel is not None:
        rep.add("phi0_identity", rel <= 0.02, 0.02 - rel, 0.0, f"rel_error={rel:.3g} (eq33)")
    rel_d = phi.phi0_discrete_rel_error
    if rel_d is not None:
        rep.add("phi0_discrete_identity", rel_d <= 1e-6, 1e-6 - rel_d, 0.0, f"rel_error={rel_d:.3g}")
    rep.data.update(times=t, phi=v, derivative=d)
    return rep


def _G(h: Nonlinearity, s: float) -> float:
    res = tail_reciprocal_integral(h, s)
    return res.value if res.finite else math.inf


def g_functional_check(phi: PhiSeries, h: Nonlinearity, t_bar: float | None = None, delta: float | None = None,
                       slack: float = DEFAULT_SLACK, tol_abs: float = 1e-10) -> MonitorReport:
    """(eq319): G(t) <= G(t_bar) - (1 - slack)(t - t_bar), G(t) = int_{Phi(t)}^inf ds / h(s).

    t_bar is the first sample with Phi >= delta (eq312a) unless given.
    """
    rep = MonitorReport()
    t, v = np.asarray(phi.times, float), np.asarray(phi.values, float)
    if t_bar is None:
        if delta is None:
            raise ValueError("g_functional_check needs t_bar or delta")
        hit = np.nonzero(v >= delta)[0]
        if hit.size == 0:
            rep.add("g_decay", True, 0.0, math.nan, "Phi never crosses delta", applicable=False)
            return rep
        kb = int(hit[0])
    else:
        kb = int(np.argmin(np.abs(t - t_bar)))
        if delta is not None and np.any(v[kb:] < delta):
            rep.add("g_decay", True, 0.0, t[kb], "Phi drops below delta after t_bar", applicable=False)
            return rep
    if not v[kb] > 0:
        rep.add("g_decay", True, 0.0, t[kb], "Phi vanishes at t_bar", applicable=False)
        return rep
    Gb = _G(h, v[kb])
    if not math.isfinite(Gb):
        rep.add("g_decay", False, -math.inf, t[kb], "(N5) fails: G infinite")
        return rep
    G = np.array([_G(h, x) for x in v[kb:]])
    margin = Gb - (1.0 - slack) * (t[kb:] - t[kb]) - G + tol_abs
    j = int(np.argmin(margin))
    rep.add("g_decay", margin[j] >= 0, margin[j], t[kb + j], f"t_bar={t[kb]:.6g}")
    rep.data.update(t_bar=float(t[kb]), G=G, G_bar=Gb, times=t[kb:])
    return rep


def supersolution_check(traj: Trajectory, m: ModelManifold, g: RadialGrid | None = None, alpha: float = 0.0,
                        tol_abs: float = 1e-6, delta: float | None = None, dt_max: float | None = None) -> MonitorReport:
    """Dominance u <= e^{alpha t} e^{t Delta} u0 + tol_abs (eq512) and e^{alpha t} v <= delta (eq58).

    v is stepped by the same heat scheme as the trajectory with the largest
    step the run used.
    """
    g = traj.grid if g is None else g
    op = assemble_radial_laplacian(m, g, traj.bc)
    if dt_max is None:
        pos = traj.step_dts[traj.step_dts > 0]
        dt_max = float(np.max(pos)) if pos.size else None
    v = heat_sequence(op, traj.fields[0], traj.times.tolist(), dt_max=dt_max)
    rep = MonitorReport()
    worst, where, ubar_max, ub_where = math.inf, 0.0, 0.0, 0.0
    for k, tk in enumerate(traj.times):
        ubar = math.exp(alpha * tk) * v[k]
        marg = float(np.min(ubar + tol_abs - traj.fields[k][: op.size]))
        if marg < worst:
            worst, where = marg, float(tk)
        if float(np.max(ubar)) > ubar_max:
            ubar_max, ub_where = float(np.max(ubar)), float(tk)
    rep.add("supersolution_dominance", worst >= 0, worst, where, f"alpha={alpha:g}, tol_abs={tol_abs:g}")
    if delta is not None:
        rep.add("supersolution_below_delta", ubar_max <= delta, delta - ubar_max, ub_where, f"delta={delta:g}")
    rep.data.update(ubar_max=ubar_max)
    return rep


def smallness_bounds(lambda1: float, alpha: float, delta: float, C_bar: float):
    """(eq12a, eq13a): (delta e^{-alpha}, delta / (C_bar e^{-(lambda1 - alpha)}))."""
    if not alpha > 0:
        raise HypothesisViolation("smallness bounds need alpha > 0")
    if alpha > lambda1:
        raise HypothesisViolation(f"alpha={alpha} exceeds lambda1={lambda1}")
    if not delta > 0 or not C_bar > 0:
        raise HypothesisViolation("delta and C_bar must be positive")
    return delta * math.exp(-alpha), delta / (C_bar * math.exp(-(lambda1 - alpha)))


def ode_threshold(f: Nonlinearity, lam: float, s_max: float = 1e8) -> float:
    """Largest root s > 0 of f(s) = lam s; above it w' >= -lam w + f(w) forces blow-up (inf if none)."""
    s = np.geomspace(1e-8, s_max, 2000)
    g = np.asarray(f(s), float) - lam * s
    pos = g > 0
    if not pos[-1]:
        return math.inf
    neg = np.nonzero(~pos)[0]
    if neg.size == 0:
        return 0.0
    i = int(neg[-1])
    return brentq(lambda x: float(f(x)) - lam * x, s[i], s[i + 1], xtol=1e-14, rtol=1e-12)


def bounded_domain_kaplan(traj: Trajectory, eigenpair, f: Nonlinearity, slack: float = DEFAULT_SLACK,
                          t_fraction: float = 0.9) -> MonitorReport:
    """Kaplan's method on a ball D: w(t) = int u phi dmu with int phi dmu = 1.

    Checks w' >= -lambda (1 + slack) w + (1 - slack) f(w) at interior
    samples with t <= t_fraction * (last sample time): the terminal stretch
    of a blow-up run is excluded because finite differences cannot resolve
    it. Reports whether w exceeds the ODE threshold (largest root of
    f(s) = lambda s).
    """
    lam, phi = eigenpair
    rep = MonitorReport()
    wts = traj.weights
    pv = phi.values if isinstance(phi, RadialField) else np.asarray(phi, float)
    norm = float(np.dot(wts, pv))
    note = ""
    if abs(norm - 1.0) > 1e-12:
        pv = pv / norm
        note = f"phi renormalized (mass was {norm:.6g})"
    wt = traj.fields @ (wts * pv)
    t = traj.times
    sel = np.nonzero(t <= t_fraction * t[-1])[0]
    thr = ode_threshold(f, lam)
    if sel.size >= 3:
        d = np.gradient(wt[sel], t[sel])[1:-1]
        ws = wt[sel][1:-1]
        fw = np.asarray(f(np.maximum(ws, 0.0)), float)
        margin = d - (-(1.0 + slack) * lam * ws + (1.0 - slack) * fw)
        j = int(np.argmin(margin))
        rep.add("kaplan_inequality", margin[j] >= -1e-12, margin[j], t[sel][1:-1][j], note or f"slack={slack:g}")
    else:
        rep.add("kaplan_inequality", True, 0.0, 0.0, "fewer than 3 samples", applicable=False)
    crossed = bool(np.any(wt > thr)) if math.isfinite(thr) else False
    k = int(np.argmax(wt))
    rep.add("kaplan_threshold", crossed, float(wt[k] - thr) if math.isfinite(thr) else -math.inf, t[k],
            f"threshold={thr:.6g}, w0={wt[0]:.6g}")
    rep.data.update(w=wt, times=t, threshold=thr, w0=float(wt[0]))
    return rep
