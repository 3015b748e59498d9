"""Rotationally symmetric model manifolds.

A model manifold of dimension N carries the metric dr^2 + psi(r)^2 dtheta^2,
where dtheta^2 is the round metric on the unit (N-1)-sphere. Every warping
kind works internally with ``log psi`` so that volume growth of order
exp(r^3) stays representable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.special import gammaln

__all__ = [
    "DomainError",
    "Warping",
    "Euclidean",
    "Hyperbolic",
    "PinchedNegative",
    "Tabulated",
    "ModelManifold",
    "sphere_area",
    "volume_density",
    "radial_ricci_lower",
    "ball_volume",
    "log_ball_volume",
    "check_stochastic_completeness",
    "check_bound_condition",
    "GrowthVerdict",
]


class DomainError(ValueError):
    """Argument outside the domain of a geometric quantity."""


def sphere_area(N: int) -> float:
    """Area of the unit (N-1)-sphere, 2 pi^(N/2) / Gamma(N/2)."""
    return math.exp(math.log(2.0) + 0.5 * N * math.log(math.pi) - gammaln(0.5 * N))


def _as_array(r):
    return np.asarray(r, dtype=float)


class Warping:
    """Base class. Subclasses provide ``log_psi``, ``dlog_psi`` and ``curv``.

    ``dlog_psi`` is psi'/psi and ``curv`` is psi''/psi; both are only
    required for r > 0.
    """

    r_max: float = math.inf

    def log_psi(self, r):
        raise NotImplementedError

    def dlog_psi(self, r):
        raise NotImplementedError

    def curv(self, r):
        raise NotImplementedError

    def _check_range(self, r):
        r = _as_array(r)
        if np.any(r < 0):
            raise DomainError("warping evaluated at negative radius")
        if np.any(r > self.r_max * (1 + 1e-12)):
            raise DomainError(f"radius beyond warping support r_max={self.r_max}")
        return r

    def psi(self, r):
        r = self._check_range(r)
        with np.errstate(divide="ignore"):
            return np.where(r > 0, np.exp(self.log_psi(np.where(r > 0, r, 1.0))), 0.0)

    def dpsi(self, r):
        r = self._check_range(r)
        rr = np.where(r > 0, r, 1.0)
        return np.where(r > 0, self.psi(rr) * self.dlog_psi(rr), 1.0)

    def ddpsi(self, r):
        r = self._check_range(r)
        rr = np.where(r > 0, r, 1.0)
        return np.where(r > 0, self.psi(rr) * self.curv(rr), 0.0)


@dataclass(frozen=True)
class Euclidean(Warping):
    """psi(r) = r."""

    def log_psi(self, r):
        return np.log(_as_array(r))

    def dlog_psi(self, r):
        return 1.0 / _as_array(r)

    def curv(self, r):
        return np.zeros_like(_as_array(r))


@dataclass(frozen=True)
class Hyperbolic(Warping):
    """psi(r) = sinh(sqrt(k) r) / sqrt(k), constant sectional curvature -k."""

    curvature: float = 1.0

    def __post_init__(self):
        if not self.curvature > 0:
            raise ValueError("hyperbolic curvature must be positive")

    def log_psi(self, r):
        s = math.sqrt(self.curvature)
        x = s * _as_array(r)
        # log sinh x without overflow
        return x + np.log(-np.expm1(-2.0 * x)) - math.log(2.0) - math.log(s)

    def dlog_psi(self, r):
        s = math.sqrt(self.curvature)
        return s / np.tanh(s * _as_array(r))

    def curv(self, r):
        return np.full_like(_as_array(r), self.curvature)


@dataclass(frozen=True, eq=False)
class PinchedNegative(Warping):
    """Warping with sectional curvature -psi''/psi pinched in [lower, upper] < 0.

    One representative of the class: the radial curvature moves smoothly
    from ``upper`` at the pole to ``lower`` at infinity,
    K(r) = lower + (upper - lower) exp(-r^2 / scale^2), and psi solves
    psi'' = -K psi, psi(0) = 0, psi'(0) = 1.
    """

    lower: float = -4.0
    upper: float = -1.0
    scale: float = 2.0
    r_max: float = 80.0
    _sol: object = field(init=False, repr=False, default=None)

    def __post_init__(self):
        if not (self.lower <= self.upper < 0):
            raise ValueError("need lower <= upper < 0")
        # q = log(psi / r) satisfies q'' = -K - q'^2 - 2 q'/r, q(0) = q'(0) = 0
        r0 = 1e-3
        k0 = self.curvature_at(0.0)
        y0 = [-k0 * r0**2 / 6.0, -k0 * r0 / 3.0]

        def rhs(r, y):
            return [y[1], -self.curvature_at(r) - y[1] ** 2 - 2.0 * y[1] / r]

        sol = integrate.solve_ivp(rhs, (r0, self.r_max), y0, method="DOP853",
                                  rtol=1e-12, atol=1e-14, dense_output=True)
        if not sol.success:
            raise RuntimeError(f"warping ODE failed: {sol.message}")
        object.__setattr__(self, "_sol", sol)
        object.__setattr__(self, "_r0", r0)

    def curvature_at(self, r):
        r = _as_array(r)
        return self.lower + (self.upper - self.lower) * np.exp(-(r / self.scale) ** 2)

    def _q(self, r):
        r = _as_array(r)
        k0 = self.curvature_at(0.0)
        small = r < self._r0
        rr = np.clip(r, self._r0, self.r_max)
        q, dq = self._sol.sol(rr.ravel())
        q = np.where(small, -k0 * r**2 / 6.0, q.reshape(r.shape))
        dq = np.where(small, -k0 * r / 3.0, dq.reshape(r.shape))
        return q, dq

    def log_psi(self, r):
        q, _ = self._q(r)
        return np.log(_as_array(r)) + q

    def dlog_psi(self, r):
        _, dq = self._q(r)
        return 1.0 / _as_array(r) + dq

    def curv(self, r):
        return -self.curvature_at(r)


@dataclass(frozen=True, eq=False)
class Tabulated(Warping):
    """Sampled warping. Interpolates q = log(psi/r) with a cubic spline.

    Samples are given either as psi values or, for fast-growing warpings,
    as log psi values (``log_values=True``). The sample at r = 0, if present,
    is ignored: q(0) = 0 is imposed by psi'(0) = 1.
    """

    r: np.ndarray = None
    values: np.ndarray = None
    log_values: bool = False

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if r.ndim != 1 or r.shape != v.shape or r.size < 4:
            raise ValueError("tabulated warping needs matching 1-D arrays of >= 4 samples")
        if np.any(np.diff(r) <= 0) or r[0] < 0:
            raise ValueError("tabulated radii must be nonnegative and strictly increasing")
        pos = r > 0
        if self.log_values:
            logpsi = v[pos]
        else:
            if np.any(v[pos] <= 0):
                raise ValueError("psi must be positive for r > 0")
            if r[0] == 0 and abs(v[0]) > 1e-12:
                raise ValueError("psi(0) must vanish")
            logpsi = np.log(v[pos])
        rp = r[pos]
        q = logpsi - np.log(rp)
        if abs(q[0]) > 1e-2 * max(1.0, rp[0]):
            raise ValueError("psi'(0) = 1 violated: psi(r)/r does not tend to 1")
        spline = CubicSpline(np.concatenate([[0.0], rp]), np.concatenate([[0.0], q]))
        object.__setattr__(self, "_q", spline)
        object.__setattr__(self, "_dq", spline.derivative(1))
        object.__setattr__(self, "_ddq", spline.derivative(2))
        object.__setattr__(self, "r_max", float(r[-1]))

    @classmethod
    def from_function(cls, log_psi: Callable, r_max: float, n: int = 4000) -> "Tabulated":
        r = np.linspace(0.0, r_max, n + 1)[1:]
        return cls(r=r, values=log_psi(r), log_values=True)

    @classmethod
    def from_file(cls, path) -> "Tabulated":
        """Two-column text file with a header line ``r psi`` or ``r log_psi``."""
        lines = Path(path).read_text().splitlines()
        header = lines[0].replace(",", " ").split()
        data = np.array([[float(x) for x in ln.replace(",", " ").split()]
                         for ln in lines[1:] if ln.strip() and not ln.lstrip().startswith("#")])
        log_values = len(header) > 1 and header[1].lower() == "log_psi"
        return cls(r=data[:, 0], values=data[:, 1], log_values=log_values)

    def log_psi(self, r):
        r = _as_array(r)
        return np.log(r) + self._q(r)

    def dlog_psi(self, r):
        r = _as_array(r)
        return 1.0 / r + self._dq(r)

    def curv(self, r):
        r = _as_array(r)
        dq = self._dq(r)
        return self._ddq(r) + dq**2 + 2.0 * dq / r


@dataclass(frozen=True, eq=False)
class ModelManifold:
    dimension: int
    warping: Warping
    analytic_lambda1: float | None = None

    def __post_init__(self):
        if not isinstance(self.dimension, (int, np.integer)) or self.dimension < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {self.dimension!r}")
        if self.analytic_lambda1 is not None and self.analytic_lambda1 < 0:
            raise ValueError("analytic_lambda1 must be nonnegative")

    @classmethod
    def euclidean(cls, N: int) -> "ModelManifold":
        return cls(N, Euclidean(), 0.0)

    @classmethod
    def hyperbolic(cls, N: int, curvature: float = 1.0) -> "ModelManifold":
        return cls(N, Hyperbolic(curvature), curvature * (N - 1) ** 2 / 4.0)

    @property
    def omega(self) -> float:
        return sphere_area(self.dimension)

    @property
    def r_max(self) -> float:
        return self.warping.r_max

    def log_density(self, r):
        """log of psi(r)^(N-1), without the sphere-area factor."""
        return (self.dimension - 1) * self.warping.log_psi(r)


def volume_density(m: ModelManifold, r):
    """omega_{N-1} psi(r)^{N-1}."""
    r = _as_array(r)
    if np.any(r < 0):
        raise DomainError("volume density needs r >= 0")
    out = m.omega * m.warping.psi(r) ** (m.dimension - 1)
    return float(out) if out.ndim == 0 else out


def radial_ricci_lower(m: ModelManifold, r):
    """-(N-1) psi''(r)/psi(r), the radial Ricci bound carried by the warping."""
    r = _as_array(r)
    if np.any(r <= 0):
        raise DomainError("radial Ricci bound is singular at the pole; need r > 0")
    out = -(m.dimension - 1) * m.warping.curv(r)
    return float(out) if out.ndim == 0 else out


def ball_volume(m: ModelManifold, R: float) -> float:
    """Volume of the geodesic ball of radius R about the pole."""
    if not R > 0:
        raise DomainError("ball radius must be positive")
    # split at unit steps so quad sees the exponential growth piecewise
    edges = np.unique(np.concatenate([np.arange(0.0, R, 1.0), [R]]))
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(lambda s: volume_density(m, s), a, b, epsabs=0.0, epsrel=1e-13, limit=200)
        total += val
    return total


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def _log_panel_integrals(m: ModelManifold, edges: np.ndarray) -> np.ndarray:
    """log of int psi^{N-1} over each panel [edges[k], edges[k+1]] (no omega)."""
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = mid[:, None] + half[:, None] * _GL_X[None, :]
    logf = m.log_density(x) + np.log(_GL_W)[None, :] + np.log(half)[:, None]
    top = logf.max(axis=1)
    return top + np.log(np.exp(logf - top[:, None]).sum(axis=1))


def log_ball_volume(m: ModelManifold, r, panel: float = 0.02):
    """log V(o, r) for an increasing array of radii, computed in log space."""
    r = np.atleast_1d(_as_array(r))
    if np.any(r <= 0):
        raise DomainError("need r > 0")
    r_top = float(r.max())
    n = max(int(math.ceil(r_top / panel)), 1)
    edges = np.unique(np.concatenate([np.linspace(0.0, r_top, n + 1), r]))
    logp = _log_panel_integrals(m, edges)
    cum = np.logaddexp.accumulate(logp)
    idx = np.searchsorted(edges, r) - 1
    return math.log(m.omega) + cum[idx]


@dataclass(frozen=True)
class GrowthVerdict:
    verdict: str
    decay_exponent: float
    doubling_ratio: float
    evidence: dict

    def __bool__(self):
        return self.verdict in ("Sufficient", "Diverges")


def _decay_exponent(g_half: float, g_full: float) -> float:
    # g ~ r^{-gamma}: gamma from the values at r/2 and r
    return -math.log(g_full / g_half) / math.log(2.0)


def check_stochastic_completeness(m: ModelManifold, r_max: float, tol: float = 0.05) -> GrowthVerdict:
    """Sufficient test: r / log V(o, r) not integrable at infinity.

    The integrand is treated as a power r^{-gamma} between r_max/2 and
    r_max; gamma <= 1 + tol means non-integrable. The test can only ever be
    sufficient, so the negative answer is "Unknown".
    """
    rs = np.linspace(r_max / 2, r_max, 2)
    logV = log_ball_volume(m, rs)
    if logV[-1] <= 1.0:
        raise DomainError("need V(o, r_max) > e")
    g = rs / logV
    gamma = _decay_exponent(g[0], g[1])
    grid = np.linspace(r_max / 8, r_max, 400)
    lv = log_ball_volume(m, grid)
    ok = lv > 1.0
    integ = integrate.cumulative_trapezoid(grid[ok] / lv[ok], grid[ok], initial=0.0)
    half = np.interp(r_max / 2, grid[ok], integ)
    ratio = integ[-1] / half if half > 0 else math.inf
    verdict = "Sufficient" if gamma <= 1.0 + tol else "Unknown"
    return GrowthVerdict(verdict, gamma, ratio, {"r": (r_max / 2, r_max), "integrand": tuple(g)})


def check_bound_condition(m: ModelManifold, r_max: float, tol: float = 0.05,
                          ratio_floor: float = 1.5) -> GrowthVerdict:
    """Divergence test for int^inf (int_0^r psi^{N-1}) / psi^{N-1}(r) dr.

    Diverges if the partial integral over [1, r] grows by ``ratio_floor``
    from r_max to 2 r_max, or if the integrand decays no faster than 1/r.
    The second branch is needed for the borderline warping exp(k r^2).
    """
    if not r_max > 1:
        raise DomainError("need r_max > 1")
    r_top = 2.0 * r_max
    grid = np.linspace(1.0, r_top, 4000)
    logI = log_ball_volume(m, grid) - math.log(m.omega)
    B = np.exp(logI - m.log_density(grid))
    J = integrate.cumulative_trapezoid(B, grid, initial=0.0)
    J_r = np.interp(r_max, grid, J)
    ratio = J[-1] / J_r if J_r > 0 else math.inf
    B_half = np.interp(r_max, grid, B)
    gamma = _decay_exponent(B_half, B[-1])
    diverges = ratio >= ratio_floor or gamma <= 1.0 + tol
    return GrowthVerdict("Diverges" if diverges else "Saturates", gamma, ratio,
                         {"J(r_max)": J_r, "J(2 r_max)": J[-1]})
