"""Heat semigroup e^{t Delta}: Crank-Nicolson stepping, the H^3 kernel oracle, kernel checks."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .grid import ConfigurationError, RadialField, RadialGrid, bump_profile
from .manifold import DomainError, ModelManifold
from .spectral import DIRICHLET, RadialOperator, assemble_radial_laplacian

__all__ = [
    "Stepper",
    "positivity_dt",
    "heat_apply",
    "heat_sequence",
    "delta_bump",
    "hyperbolic3_kernel",
    "hyperbolic3_kernel_mass",
    "KernelTrace",
    "kernel_trace",
    "DecayFit",
    "kernel_decay_check",
    "LowerBoundVerdict",
    "semigroup_lower_bound_check",
    "truncation_radius",
]


def positivity_dt(op: RadialOperator) -> float:
    """Largest dt with I - (dt/2) L entrywise nonnegative.

    Below this step the Crank-Nicolson map is a product of two nonnegative
    matrices, so it obeys the discrete maximum and comparison principles.
    """
    return 2.0 / float(np.max(op.diag))


class Stepper:
    """One-step maps on the active nodes of ``op``; factorizations are cached by step size."""

    def __init__(self, op: RadialOperator):
        self.op = op

    def explicit_half(self, u: np.ndarray, dt: float) -> np.ndarray:
        return u - 0.5 * dt * self.op.apply(u)

    def cn(self, u: np.ndarray, dt: float, source: np.ndarray | None = None) -> np.ndarray:
        rhs = self.explicit_half(u, dt)
        if source is not None:
            rhs = rhs + dt * source
        return self.op.solve_shifted(1.0, 0.5 * dt, rhs)

    def be(self, u: np.ndarray, dt: float, source: np.ndarray | None = None) -> np.ndarray:
        rhs = u if source is None else u + dt * source
        return self.op.solve_shifted(1.0, dt, rhs)

    def heat(self, u: np.ndarray, dt: float, startup: bool = False) -> np.ndarray:
        """One CN step; with ``startup`` it is replaced by two BE half steps (Rannacher)."""
        if startup:
            return self.be(self.be(u, 0.5 * dt), 0.5 * dt)
        return self.cn(u, dt)


def _active(op: RadialOperator, u0) -> np.ndarray:
    vals = u0.values if isinstance(u0, RadialField) else np.asarray(u0, dtype=float)
    if vals.shape != (op.grid.n + 1,):
        raise ConfigurationError(f"field length {vals.shape} does not match grid n={op.grid.n}")
    return vals[: op.size].astype(float, copy=True)


def heat_sequence(op: RadialOperator, u0, times, dt_max: float | None = None,
                  rannacher_steps: int | None = None) -> list:
    """e^{t Delta} u0 at each of the increasing ``times`` (active arrays).

    Steps are at most ``dt_max`` (default: the positivity step) and are
    clipped to land on every requested time. When the step exceeds the
    positivity step, the first two steps use the Rannacher BE startup unless
    ``rannacher_steps`` overrides it.
    """
    times = [float(t) for t in times]
    if any(t < 0 for t in times) or any(b < a for a, b in zip(times, times[1:])):
        raise ConfigurationError("times must be nonnegative and increasing")
    dpos = positivity_dt(op)
    dt_max = dpos if dt_max is None else float(dt_max)
    if not dt_max > 0:
        raise ConfigurationError("dt_max must be positive")
    if rannacher_steps is None:
        rannacher_steps = 2 if dt_max > dpos * (1 + 1e-12) else 0
    st = Stepper(op)
    u = _active(op, u0)
    t, k = 0.0, 0
    out = []
    for target in times:
        while target - t > 1e-12 * max(1.0, target):
            dt = dt_max
            if t + dt >= target - 1e-9 * dt:
                dt = target - t
            u = st.heat(u, dt, startup=k < rannacher_steps)
            k += 1
            t = target if dt == target - t else t + dt
        out.append(u.copy())
    return out


def heat_apply(m: ModelManifold, g: RadialGrid, u0: RadialField, t: float, steps: int | None = None,
               bc: str = DIRICHLET, rannacher: bool | None = None) -> RadialField:
    """Crank-Nicolson evolution of the heat equation over [0, t] in ``steps`` equal steps.

    ``steps=None`` picks the smallest count whose step is below the
    positivity limit, which guarantees the discrete maximum principle.
    """
    if not t > 0:
        raise ConfigurationError("heat_apply needs t > 0")
    op = assemble_radial_laplacian(m, g, bc)
    if steps is None:
        steps = max(1, math.ceil(t / positivity_dt(op) * (1 + 1e-12)))
    if int(steps) != steps or steps < 1:
        raise ConfigurationError(f"heat_apply needs a positive step count, got {steps}")
    dt = t / steps
    if rannacher is None:
        rannacher = dt > positivity_dt(op)
    (u,) = heat_sequence(op, u0, [t], dt_max=dt, rannacher_steps=2 if rannacher else 0)
    return op.field(u)


def delta_bump(op: RadialOperator, width_factor: float = 4.0) -> np.ndarray:
    """L^1-normalized bump of width ``width_factor * h`` at the pole (full-length values)."""
    vals = bump_profile(op.grid.nodes, 0.0, width_factor * op.grid.h)
    return vals / float(np.dot(op.weights, vals))


def hyperbolic3_kernel(rho, t: float):
    """Heat kernel of H^3: (4 pi t)^{-3/2} (rho / sinh rho) exp(-t - rho^2 / 4t)."""
    if not t > 0:
        raise DomainError("heat kernel needs t > 0")
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise DomainError("geodesic distance must be nonnegative")
    a = np.abs(rho)
    # log(rho / sinh rho), with the series near 0 and the log-space form at large rho
    small = a < 1e-4
    safe = np.where(small, 1.0, a)
    log_ratio = np.where(
        small,
        -a * a / 6.0,
        np.log(safe) - safe - np.log(-np.expm1(-2.0 * safe)) + math.log(2.0),
    )
    val = np.exp(-1.5 * math.log(4.0 * math.pi * t) + log_ratio - t - rho * rho / (4.0 * t))
    return float(val) if val.ndim == 0 else val


def hyperbolic3_kernel_mass(t: float) -> float:
    """int_0^inf p(rho, t) 4 pi sinh^2 rho d rho by adaptive quadrature."""
    def integrand(r):
        if r == 0.0:
            return 0.0
        # p * 4 pi sinh^2 = (4 pi t)^{-3/2} 4 pi r sinh r exp(-t - r^2/4t)
        log_sinh = r + math.log(-math.expm1(-2.0 * r)) - math.log(2.0)
        return 4.0 * math.pi * r * math.exp(-1.5 * math.log(4 * math.pi * t) + log_sinh - t - r * r / (4 * t))

    peak = 2.0 * t
    hi = peak + 40.0 * math.sqrt(t) + 10.0
    pts = [p for p in (peak,) if 0 < p < hi]
    val, _ = integrate.quad(integrand, 0.0, hi, points=pts, epsabs=0.0, epsrel=1e-12, limit=400)
    return val


@dataclass
class KernelTrace:
    """Numerical p(o, o, t_k) and kernel mass from an evolved delta-like bump."""

    times: np.ndarray
    center: np.ndarray
    mass: np.ndarray
    width: float

    def rows(self):
        return list(zip(self.times.tolist(), self.center.tolist(), self.mass.tolist()))


def kernel_trace(m: ModelManifold, g: RadialGrid, times, width_factor: float = 4.0,
                 dt_max: float | None = None, bc: str = DIRICHLET, return_fields: bool = False):
    op = assemble_radial_laplacian(m, g, bc)
    b = delta_bump(op, width_factor)
    fields = heat_sequence(op, b, times, dt_max=dt_max)
    w = op.active_weights
    tr = KernelTrace(np.asarray(times, dtype=float), np.array([u[0] for u in fields]),
                     np.array([float(np.dot(w, u)) for u in fields]), width_factor * g.h)
    if return_fields:
        return tr, [op.full(u) for u in fields]
    return tr


@dataclass
class DecayFit:
    slope: float
    log_prefactor: float
    power: float
    c_bar: float
    passed: bool
    inconclusive: bool
    target: float | None
    trace: KernelTrace


def kernel_decay_check(m: ModelManifold, g: RadialGrid, t_range=(1.0, 20.0), samples: int = 40,
                       lambda1: float | None = None, tol: float = 0.1, dt_max: float | None = None) -> DecayFit:
    """Fit log p(o,o,t) = c + s t + q ln t on [t_min, t_max]; the rate is s.

    The ln t column absorbs the polynomial prefactor of the kernel, so s is
    the exponential rate of (eq26a). The pass test is s <= -lambda1 * (1 - tol)
    with lambda1 defaulting to the analytic value. C_bar is the empirical
    prefactor sup_{t >= 1} p(o, o, t) e^{lambda t} over the samples, with the
    fitted rate -s as lambda when no lambda1 is known.
    """
    t0, t1 = float(t_range[0]), float(t_range[1])
    if not (t0 > 0 and t1 > t0):
        raise ConfigurationError("t_range must satisfy 0 < t_min < t_max")
    times = np.linspace(t0, t1, samples)
    tr = kernel_trace(m, g, times, dt_max=dt_max)
    ok = tr.center > 1e-280
    inconclusive = (t1 / t0 < 4.0) or ok.sum() < 8
    A = np.column_stack([np.ones(ok.sum()), times[ok], np.log(times[ok])])
    coef, *_ = np.linalg.lstsq(A, np.log(tr.center[ok]), rcond=None)
    c, s, q = (float(x) for x in coef)
    target = m.analytic_lambda1 if lambda1 is None else lambda1
    lam = target if target is not None else -s
    sel = times >= 1.0
    c_bar = float(np.max(tr.center[sel] * np.exp(lam * times[sel]))) if sel.any() else math.nan
    passed = (not inconclusive) and target is not None and s <= -target + tol * max(target, 1.0)
    return DecayFit(s, c, q, c_bar, bool(passed), bool(inconclusive), target, tr)


@dataclass
class LowerBoundVerdict:
    holds: bool
    C1: float
    t0: float | None
    fitted_rate: float
    bound_rate: float
    reason: str = ""


def semigroup_lower_bound_check(m: ModelManifold, g: RadialGrid, u0: RadialField, eps: float,
                                t_range=(1.0, 80.0), samples: int = 80, lambda1: float | None = None,
                                dt_max: float | None = None) -> LowerBoundVerdict:
    """Lemma 1: (e^{t Delta} u0)(o) >= C1 exp(-(lambda1 + eps) t) for t > t0, with C1 = int u0.

    t0 is the first sample after which the bound holds at every later
    sample; it must leave at least the last quarter of the range. The
    fitted decay rate (log-slope of the center value with a ln t column)
    is reported alongside.
    """
    lam = m.analytic_lambda1 if lambda1 is None else lambda1
    if lam is None:
        raise ConfigurationError("semigroup_lower_bound_check needs lambda1")
    vals = u0.values
    if np.any(vals < 0) or not np.any(vals > 0):
        return LowerBoundVerdict(False, 0.0, None, math.nan, -(lam + eps),
                                 "precondition violated: u0 must be nonnegative and nontrivial")
    if not eps > 0:
        raise ConfigurationError("eps must be positive")
    op = assemble_radial_laplacian(m, g, DIRICHLET)
    C1 = u0.mass()
    times = np.linspace(t_range[0], t_range[1], samples)
    center = np.array([u[0] for u in heat_sequence(op, vals, times, dt_max=dt_max)])
    bound = C1 * np.exp(-(lam + eps) * times)
    ok = center >= bound
    t0 = None
    bad = np.nonzero(~ok)[0]
    start = 0 if bad.size == 0 else bad[-1] + 1
    if start < samples:
        t0 = float(times[start - 1]) if start > 0 else 0.0
    A = np.column_stack([np.ones(samples), times, np.log(times)])
    coef, *_ = np.linalg.lstsq(A, np.log(np.maximum(center, 1e-300)), rcond=None)
    rate = float(coef[1])
    holds = t0 is not None and start <= 0.75 * samples
    reason = "" if holds else "bound not established over the last quarter of the range"
    return LowerBoundVerdict(bool(holds), C1, t0, rate, -(lam + eps), reason)


def truncation_radius(t_max: float, rel_tol: float = 1e-12, lambda1: float = 0.0) -> float:
    """R with the Gaussian envelope exp(-(R/2)^2 / 4t) below rel_tol at t_max (times 2 for safety on drift).

    On negatively curved models the kernel front moves with speed
    2 sqrt(lambda1), which is added to the diffusive width.
    """
    if not t_max > 0 or not 0 < rel_tol < 1:
        raise ConfigurationError("truncation_radius needs t_max > 0 and rel_tol in (0, 1)")
    half = math.sqrt(4.0 * t_max * math.log(1.0 / rel_tol)) + 2.0 * math.sqrt(max(lambda1, 0.0)) * t_max
    return 2.0 * half
