"""Time integration of u_t = Delta u + f(u), blow-up detection, Duhamel cross-check, exhaustion."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import ConfigurationError, RadialField, RadialGrid, smoothstep_cutoff
from .heat import Stepper, heat_sequence, positivity_dt
from .manifold import ModelManifold
from .reaction import Nonlinearity
from .spectral import DIRICHLET, NumericalError, assemble_radial_laplacian

__all__ = [
    "SchemeConfig",
    "SimulationOutcome",
    "Global",
    "BlowUp",
    "Inconclusive",
    "Trajectory",
    "BlowupEstimate",
    "simulate",
    "detect_blowup",
    "duhamel_picard",
    "ExhaustionResult",
    "exhaustion_run",
]

SCHEMES = ("IMEX-CN", "IMEX-BE")
POLICIES = ("lipschitz", "lipschitz+positivity")


@dataclass(frozen=True)
class SchemeConfig:
    """Time-stepping parameters.

    dt = min(dt0, safety / Lip(f, sup u)) and, under the default
    ``lipschitz+positivity`` policy, also at most the positivity step of the
    operator (which makes the scheme monotone). BlowUp requires sup > U_max
    with the step already at or below dt_min.
    """

    dt0: float = 0.01
    T_end: float = 1.0
    U_max: float = 1e8
    dt_min: float = 1e-6
    safety: float = 0.1
    scheme: str = "IMEX-CN"
    dt_policy: str = "lipschitz+positivity"
    sample_every: float = 0.1
    dt_floor: float = 1e-14
    max_steps: int = 5_000_000
    nonneg_tol: float = 1e-10
    record_every_step: bool = True

    def __post_init__(self):
        if not self.dt0 > 0:
            raise ConfigurationError("dt0 must be positive")
        if not self.T_end > 0:
            raise ConfigurationError("T_end must be positive")
        if not self.U_max > 0 or not self.dt_min > 0 or not self.safety > 0:
            raise ConfigurationError("U_max, dt_min and safety must be positive")
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"scheme must be one of {SCHEMES}")
        if self.dt_policy not in POLICIES:
            raise ConfigurationError(f"dt_policy must be one of {POLICIES}")
        if not self.sample_every > 0:
            raise ConfigurationError("sample_every must be positive")


@dataclass
class SimulationOutcome:
    tag: str
    sup_history: np.ndarray
    times: np.ndarray

    @property
    def summary(self) -> dict:
        return {"outcome": self.tag}


@dataclass
class Global(SimulationOutcome):
    horizon: float = 0.0

    @property
    def summary(self):
        return {"outcome": "Global", "horizon": self.horizon, "final_sup": float(self.sup_history[-1]),
                "max_sup": float(np.max(self.sup_history))}


@dataclass
class BlowUp(SimulationOutcome):
    t_star: float = math.nan
    method: str = ""
    estimate: "BlowupEstimate | None" = None

    @property
    def summary(self):
        d = {"outcome": "BlowUp", "t_star": self.t_star, "method": self.method}
        if self.estimate is not None and self.estimate.t_star_power is not None:
            d["t_star_power"] = self.estimate.t_star_power
        return d


@dataclass
class Inconclusive(SimulationOutcome):
    reason: str = ""

    @property
    def summary(self):
        return {"outcome": "Inconclusive", "reason": self.reason}


@dataclass
class Trajectory:
    """Sampled fields plus the per-step (t, sup, dt) history."""

    grid: RadialGrid
    weights: np.ndarray
    times: np.ndarray
    fields: np.ndarray  # (K, n+1)
    sups: np.ndarray
    masses: np.ndarray
    step_times: np.ndarray
    step_sups: np.ndarray
    step_dts: np.ndarray
    bc: str = DIRICHLET

    def field(self, k: int) -> RadialField:
        return RadialField(self.grid, self.fields[k], self.weights)

    def index_at(self, t: float) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"no sample at t={t}")
        return k


def _lip(f: Nonlinearity, s: float) -> float:
    L = float(f.lipschitz(max(s, 0.0)))
    return L if math.isfinite(L) else math.inf


def simulate(m: ModelManifold, g: RadialGrid, f: Nonlinearity, u0: RadialField, cfg: SchemeConfig,
             bc: str = DIRICHLET):
    """IMEX evolution: diffusion by CN (or BE), reaction explicit with a Heun corrector.

    IMEX-CN step, P = I + (dt/2) L:
        u* = P^{-1} [(I - dt/2 L) u + dt f(u)]
        u' = P^{-1} [(I - dt/2 L) u + dt/2 (f(u) + f(u*))]
    IMEX-BE step: (I + dt L) u' = u + dt f(u).
    Returns (SimulationOutcome, Trajectory).
    """
    op = assemble_radial_laplacian(m, g, bc)
    st = Stepper(op)
    vals = u0.values if isinstance(u0, RadialField) else np.asarray(u0, dtype=float)
    if vals.shape != (g.n + 1,):
        raise ConfigurationError("u0 does not match the grid")
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise ConfigurationError("u0 must be finite and nonnegative")
    if not cfg.U_max > float(np.max(vals)):
        raise ConfigurationError("U_max must exceed sup u0")
    u = vals[: op.size].copy()
    dpos = positivity_dt(op)
    cap = min(cfg.dt0, dpos) if cfg.dt_policy == "lipschitz+positivity" else cfg.dt0
    rannacher = 2 if (cfg.scheme == "IMEX-CN" and cap > dpos * (1 + 1e-12)) else 0

    samples = [0.0]
    fields = [op.full(u)]
    t_hist, s_hist, d_hist = [0.0], [float(np.max(u))], [0.0]
    next_sample = cfg.sample_every
    t, k = 0.0, 0
    outcome = None

    def _record_sample(tt, uu):
        samples.append(tt)
        fields.append(op.full(uu))

    while True:
        sup = float(np.max(u))
        L = _lip(f, sup)
        dt_req = cap if L == 0 else min(cap, cfg.safety / L)
        if dt_req < cfg.dt_floor:
            outcome = ("Inconclusive", f"step floor {cfg.dt_floor:g} reached at t={t:.6g} with sup={sup:.6g} < U_max")
            break
        if k >= cfg.max_steps:
            outcome = ("Inconclusive", f"step cap {cfg.max_steps} reached at t={t:.6g}")
            break
        dt = dt_req
        target = min(next_sample, cfg.T_end)
        hit = False
        if t + dt >= target - 1e-9 * dt:
            dt = target - t
            hit = True
        if cfg.scheme == "IMEX-BE":
            un = st.be(u, dt, source=f(np.maximum(u, 0.0)))
        elif k < rannacher:
            half = st.be(u, 0.5 * dt, source=f(np.maximum(u, 0.0)))
            un = st.be(half, 0.5 * dt, source=f(np.maximum(half, 0.0)))
        else:
            fu = f(np.maximum(u, 0.0))
            base = st.explicit_half(u, dt)
            ustar = op.solve_shifted(1.0, 0.5 * dt, base + dt * fu)
            un = op.solve_shifted(1.0, 0.5 * dt, base + 0.5 * dt * (fu + f(np.maximum(ustar, 0.0))))
        k += 1
        t = target if hit else t + dt
        if not np.all(np.isfinite(un)):
            raise NumericalError("non-finite values in simulation", t=t, step=k, dt=dt, last_sup=sup)
        lo = float(np.min(un))
        sup_new = float(np.max(un))
        if lo < -cfg.nonneg_tol * max(1.0, sup_new):
            raise NumericalError("negative overshoot beyond tolerance", t=t, step=k, dt=dt, min=lo,
                                 sup=sup_new, argmin=int(np.argmin(un)))
        u = un
        if cfg.record_every_step:
            t_hist.append(t)
            s_hist.append(sup_new)
            d_hist.append(dt)
        if sup_new > cfg.U_max:
            if dt_req <= cfg.dt_min:
                outcome = ("BlowUp", None)
            else:
                outcome = ("Inconclusive", f"ceiling U_max crossed at t={t:.6g} with dt={dt_req:.3g} above dt_min "
                                           f"(unbounded growth, not resolved as finite-time blow-up)")
            break
        if hit:
            if not cfg.record_every_step:
                t_hist.append(t)
                s_hist.append(sup_new)
                d_hist.append(dt)
            _record_sample(t, u)
            if t >= cfg.T_end * (1 - 1e-12):
                outcome = ("Global", None)
                break
            next_sample = samples[-1] + cfg.sample_every
            n_s = round(next_sample / cfg.sample_every)
            next_sample = n_s * cfg.sample_every

    if samples[-1] != t:
        _record_sample(t, u)
    F = np.array(fields)
    traj = Trajectory(g, op.weights, np.array(samples), F, np.max(np.abs(F), axis=1),
                      F @ op.weights, np.array(t_hist), np.array(s_hist), np.array(d_hist), op.bc)
    sh, th = traj.step_sups, traj.step_times
    tag, info = outcome
    if tag == "Global":
        return Global("Global", sh, th, horizon=t), traj
    if tag == "BlowUp":
        p = f.p if f.name == "power" else None
        est = detect_blowup(sh[1:], times=th[1:], p=p, U_max=cfg.U_max)
        return BlowUp("BlowUp", sh, th, t_star=est.t_star, method=est.method, estimate=est), traj
    return Inconclusive("Inconclusive", sh, th, reason=info), traj


@dataclass
class BlowupEstimate:
    t_star: float
    method: str
    t_star_power: float | None
    n_points: int
    wide_uncertainty: bool
    window: tuple


def _lin_root(t, y):
    A = np.column_stack([np.ones_like(t), t])
    (b, a), *_ = np.linalg.lstsq(A, y, rcond=None)
    if a >= 0:
        return math.nan
    return float(-b / a)


def detect_blowup(sup_history, dt_history=None, *, times=None, p: float | None = None,
                  U_max: float | None = None, t0: float = 0.0) -> BlowupEstimate:
    """Extrapolate the blow-up time from the last decade of sup-norm growth.

    History samples are located by ``times`` or, when only step sizes are
    given, by t0 + cumulative sum of ``dt_history``. The primary estimate is
    the root of a least-squares line through (t, 1/sup); for a power
    nonlinearity u^p, the root of the line through (t, sup^{1-p}) is
    reported too (t_star_power) and used as primary.
    """
    s = np.asarray(sup_history, dtype=float)
    if times is None:
        if dt_history is None:
            raise ConfigurationError("detect_blowup needs times or step sizes")
        tt = t0 + np.cumsum(np.asarray(dt_history, dtype=float))
    else:
        tt = np.asarray(times, dtype=float)
    if s.shape != tt.shape or s.size < 3:
        raise ConfigurationError("sup and time histories must match and have >= 3 entries")
    if np.any(s <= 0):
        raise ConfigurationError("sup history must be positive")
    if U_max is not None and not s.max() > U_max:
        raise ValueError("precondition violated: sup history never crossed U_max")
    top = s[-1]
    if not (top >= 10.0 * s.min() and top >= s.max() * (1 - 1e-12)):
        raise ValueError("precondition violated: history does not show a decade of terminal growth")
    sel = np.nonzero(s >= top / 10.0)[0]
    sel = np.arange(sel[0], s.size)
    # the window must be the terminal run of growth
    n = sel.size
    t_w = tt[sel]
    t_rec = _lin_root(t_w, 1.0 / s[sel])
    t_pow = None
    method = "reciprocal-linear"
    primary = t_rec
    if p is not None and p > 1 and p != 2:
        t_pow = _lin_root(t_w, s[sel] ** (1.0 - p))
        primary, method = t_pow, f"power-profile(p={p:g})"
    elif p == 2:
        t_pow = t_rec
    if not math.isfinite(primary):
        raise ValueError("extrapolation failed: sup history not growing in the fit window")
    return BlowupEstimate(primary, method, t_pow, int(n), n < 8, (float(t_w[0]), float(t_w[-1])))


def duhamel_picard(m: ModelManifold, g: RadialGrid, f: Nonlinearity, u0: RadialField, window: float,
                   iter_cap: int = 50, n_slices: int = 50, substeps: int | None = None,
                   tol: float = 1e-8, bc: str = DIRICHLET) -> RadialField:
    """Mild solution at t = window by Picard iteration on the Duhamel formula (eq27).

    The time integral uses the trapezoid rule on n_slices slices of length
    ds. With E the discrete heat propagator over one slice and F_j the
    reaction at s_j, the convolution sum obeys B_0 = 0,
    B_j = E (B_{j-1} + a_{j-1} F_{j-1}) with a_0 = 1/2 and a_i = 1 otherwise,
    so u(s_j) = E^j u0 + ds (B_j + F_j / 2). Iterates until the sup change
    falls below ``tol``; growing residuals raise a window-too-large error.
    """
    if not window > 0:
        raise ConfigurationError("window must be positive")
    op = assemble_radial_laplacian(m, g, bc)
    ds = window / n_slices
    if substeps is None:
        substeps = max(1, math.ceil(ds / positivity_dt(op)))
    dt = ds / substeps
    st = Stepper(op)

    def E(v):
        for _ in range(substeps):
            v = st.cn(v, dt)
        return v

    lin = heat_sequence(op, u0, [j * ds for j in range(n_slices + 1)], dt_max=dt, rannacher_steps=0)
    lin = np.array(lin)
    u = lin.copy()
    res_prev = math.inf
    for it in range(iter_cap):
        F = np.array([f(np.maximum(v, 0.0)) for v in u])
        new = np.empty_like(u)
        B = np.zeros(op.size)
        new[0] = lin[0]
        for j in range(1, n_slices + 1):
            B = E(B + (0.5 if j == 1 else 1.0) * F[j - 1])
            new[j] = lin[j] + ds * (B + 0.5 * F[j])
        res = float(np.max(np.abs(new - u)))
        u = new
        if res <= tol * max(1.0, float(np.max(np.abs(u)))):
            return op.field(u[-1])
        if it >= 2 and res > res_prev:
            raise NumericalError("Picard map not contractive: window too large", residual=res, iteration=it)
        res_prev = res
    raise NumericalError("Picard iteration cap reached: window too large", residual=res_prev)


@dataclass
class ExhaustionResult:
    trajectories: list
    outcomes: list
    radii: list
    monotone: bool
    worst_violation: float
    compact_differences: list = field(default_factory=list)  # (R_j, R_{j+1}, sup diff on r <= r_c)


def exhaustion_run(m: ModelManifold, f: Nonlinearity, u0: RadialField, radii, cfg: SchemeConfig,
                   compact_radius: float | None = None, tol: float = 1e-8) -> ExhaustionResult:
    """Dirichlet problems (eq56) on B_{R_j} with data zeta_j u0, same spacing as u0's grid.

    zeta_j is the quintic smoothstep cutoff: 1 on [0, R_j/2], 0 at R_j.
    Checks u_j <= u_{j+1} on the common nodes at shared sample times, and
    reports sup |u_{j+1} - u_j| on r <= compact_radius.
    """
    radii = [float(R) for R in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])) or not radii:
        raise ConfigurationError("radii must be nonempty and increasing")
    h = u0.grid.h
    if radii[-1] > u0.grid.R * (1 + 1e-12):
        raise ConfigurationError("u0 must be defined on the largest ball")
    rc = compact_radius if compact_radius is not None else 0.5 * radii[0]
    trajs, outs = [], []
    for R in radii:
        g = RadialGrid.with_spacing(R, h)
        if abs(g.h - h) > 1e-12 * h:
            raise ConfigurationError(f"radius {R} is not a multiple of the spacing {h}")
        r = g.nodes
        vals = u0.values[: g.n + 1] * smoothstep_cutoff(r, R)
        out, tr = simulate(m, g, f, RadialField(g, vals, np.ones(g.n + 1)), cfg, DIRICHLET)
        trajs.append(tr)
        outs.append(out)
    worst = 0.0
    diffs = []
    for a, b in zip(trajs, trajs[1:]):
        K = min(a.times.size, b.times.size)
        na = a.grid.n + 1
        ncomp = int(np.searchsorted(a.grid.nodes, rc, side="right"))
        d_c = 0.0
        for k in range(K):
            if abs(a.times[k] - b.times[k]) > 1e-9:
                break
            gap = a.fields[k] - b.fields[k][:na]
            worst = max(worst, float(np.max(gap)))
            d_c = max(d_c, float(np.max(np.abs(gap[:ncomp]))))
        diffs.append((a.grid.R, b.grid.R, d_c))
    return ExhaustionResult(trajs, outs, radii, worst <= tol, worst, diffs)
