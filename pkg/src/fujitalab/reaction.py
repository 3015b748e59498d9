"""Reaction terms f and the hypothesis analyzers used by the regime theorems."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate

from .manifold import DomainError

__all__ = [
    "Nonlinearity",
    "Power",
    "PiecewiseLinearPower",
    "ExponentialMinusOne",
    "Linear",
    "TabulatedReaction",
    "evaluate",
    "slope_at_zero",
    "is_convex_on",
    "tail_reciprocal_integral",
    "linear_bound_near_zero",
    "ConvexityVerdict",
    "TailIntegral",
    "LinearBound",
    "HypothesisReport",
    "analyze",
]


def _check_nonneg(s):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise DomainError("reaction evaluated at negative argument")
    return s


@dataclass(frozen=True, kw_only=True)
class Nonlinearity:
    """Base reaction term. ``minorant`` is the convex h with f >= h, when f itself is not used."""

    minorant: "Nonlinearity | None" = None

    name = "abstract"

    def __call__(self, s):
        return self._eval(_check_nonneg(s))

    def _eval(self, s):
        raise NotImplementedError

    def lipschitz(self, s: float) -> float:
        """A bound for |f'| on [0, s]."""
        raise NotImplementedError

    def slope0(self) -> float | None:
        """Closed-form f'(0) if available."""
        return None

    @property
    def h(self) -> "Nonlinearity":
        return self.minorant if self.minorant is not None else self

    def params(self) -> dict:
        return {}


@dataclass(frozen=True, kw_only=True)
class Power(Nonlinearity):
    """f(s) = s^p."""

    p: float
    name = "power"

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("power nonlinearity needs p > 1")

    def _eval(self, s):
        return s**self.p

    def lipschitz(self, s):
        return self.p * max(s, 0.0) ** (self.p - 1)

    def slope0(self):
        return 0.0

    def params(self):
        return {"p": self.p}


@dataclass(frozen=True, kw_only=True)
class PiecewiseLinearPower(Nonlinearity):
    """f(s) = alpha s on [0, 1], alpha s^p on (1, inf). p = 1 is pure linear growth."""

    alpha: float
    p: float
    name = "piecewise"

    def __post_init__(self):
        if not self.alpha > 0 or not self.p >= 1:
            raise ValueError("piecewise nonlinearity needs alpha > 0 and p >= 1")

    def _eval(self, s):
        return np.where(s <= 1.0, self.alpha * s, self.alpha * s**self.p)

    def lipschitz(self, s):
        return self.alpha * max(1.0, self.p * max(s, 1.0) ** (self.p - 1))

    def slope0(self):
        return self.alpha

    def params(self):
        return {"alpha": self.alpha, "p": self.p}


@dataclass(frozen=True, kw_only=True)
class ExponentialMinusOne(Nonlinearity):
    """f(s) = exp(beta s) - 1."""

    beta: float
    name = "exponential"

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("exponential nonlinearity needs beta > 0")

    def _eval(self, s):
        with np.errstate(over="ignore"):
            return np.expm1(self.beta * s)

    def lipschitz(self, s):
        return self.beta * math.exp(min(self.beta * max(s, 0.0), 700.0))

    def slope0(self):
        return self.beta

    def params(self):
        return {"beta": self.beta}


@dataclass(frozen=True, kw_only=True)
class Linear(Nonlinearity):
    """f(s) = a s; a = 0 gives the pure heat equation."""

    a: float = 0.0
    name = "linear"

    def __post_init__(self):
        if self.a < 0:
            raise ValueError("linear reaction needs a >= 0")

    def _eval(self, s):
        return self.a * s

    def lipschitz(self, s):
        return self.a

    def slope0(self):
        return self.a

    def params(self):
        return {"a": self.a}


@dataclass(frozen=True, kw_only=True, eq=False)
class TabulatedReaction(Nonlinearity):
    """Piecewise-linear interpolation of samples; linear extrapolation past the last one."""

    s: np.ndarray
    values: np.ndarray
    source: str = field(default="", compare=False)
    name = "tabulated"

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if s.ndim != 1 or s.shape != v.shape or s.size < 2:
            raise ValueError("tabulated reaction needs matching 1-D samples")
        if s[0] != 0 or np.any(np.diff(s) <= 0):
            raise ValueError("tabulated reaction samples must start at 0 and increase")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_file(cls, path) -> "TabulatedReaction":
        lines = Path(path).read_text().splitlines()
        data = np.array([[float(x) for x in ln.replace(",", " ").split()]
                         for ln in lines[1:] if ln.strip() and not ln.lstrip().startswith("#")])
        return cls(s=data[:, 0], values=data[:, 1], source=str(path))

    def _eval(self, x):
        s, v = self.s, self.values
        out = np.interp(x, s, v)
        slope = (v[-1] - v[-2]) / (s[-1] - s[-2])
        return np.where(x > s[-1], v[-1] + slope * (x - s[-1]), out)

    def lipschitz(self, x):
        q = np.abs(np.diff(self.values) / np.diff(self.s))
        k = np.searchsorted(self.s, x, side="right")
        return float(np.max(q[: max(1, min(k, q.size))])) if x <= self.s[-1] else float(q.max())

    def params(self):
        return {"file": self.source}


def evaluate(f: Nonlinearity, s):
    """f(s) for s >= 0."""
    out = f(s)
    return float(out) if np.ndim(out) == 0 else out


def slope_at_zero(f: Nonlinearity) -> float:
    """f'(0^+); closed form when available, else a Richardson difference quotient."""
    closed = f.slope0()
    if closed is not None:
        return float(closed)
    f0 = float(f(0.0))
    if abs(f0) > 1e-12:
        raise DomainError("slope_at_zero needs f(0) = 0")
    d = 1e-4
    q1 = float(f(d)) / d
    q2 = float(f(d / 2)) / (d / 2)
    val = 2.0 * q2 - q1
    return val if math.isfinite(val) else math.inf


@dataclass(frozen=True)
class ConvexityVerdict:
    convex: bool
    worst: float
    location: float

    def __bool__(self):
        return self.convex


def is_convex_on(f: Nonlinearity, S: float, k: int = 200, tol: float = 1e-10) -> ConvexityVerdict:
    """Sampled second differences f(x-d) - 2 f(x) + f(x+d) >= -tol on k points of [0, S]."""
    if not S > 0 or k < 8:
        raise ValueError("is_convex_on needs S > 0 and k >= 8")
    x = np.linspace(0.0, S, k)
    fx = np.asarray(f(x), dtype=float)
    second = fx[:-2] - 2.0 * fx[1:-1] + fx[2:]
    j = int(np.argmin(second))
    return ConvexityVerdict(bool(second[j] >= -tol), float(second[j]), float(x[j + 1]))


@dataclass(frozen=True)
class TailIntegral:
    finite: bool
    value: float
    partial_sums: tuple

    def __bool__(self):
        return self.finite


def tail_reciprocal_integral(f: Nonlinearity, s0: float, max_doublings: int = 80,
                             decay: float = 0.8) -> TailIntegral:
    """int_{s0}^inf ds / f(s) by dyadic panels [s0 2^k, s0 2^{k+1}].

    Finite when the last panel increments shrink geometrically (ratio below
    ``decay``); the geometric remainder is added to the value. Otherwise
    Infinite, with the partial sums kept as evidence.
    """
    if not s0 > 0:
        raise ValueError("s0 must be positive")

    def recip(s):
        fs = float(f(s))
        if not fs > 0:
            raise DomainError(f"reaction vanishes on the tail at s={s}")
        return 1.0 / fs

    recip(s0)
    incs, sums = [], []
    total = 0.0
    a = s0
    for _ in range(max_doublings):
        b = 2.0 * a
        with np.errstate(over="ignore"):
            inc, _ = integrate.quad(recip, a, b, epsabs=0.0, epsrel=1e-12, limit=200)
        incs.append(inc)
        total += inc
        sums.append(total)
        a = b
        if len(incs) >= 4:
            r = [incs[-i] / incs[-i - 1] if incs[-i - 1] > 0 else 0.0 for i in (1, 2, 3)]
            if max(r) < decay:
                q = r[0]
                rem = incs[-1] * q / (1.0 - q)
                # accept the geometric remainder when it is exact (constant ratio) or negligible;
                # faster-than-geometric decay (e.g. exponential f) just needs more panels
                if abs(r[0] - r[1]) <= 1e-6 * r[0] or rem <= 1e-12 * total:
                    return TailIntegral(True, total + rem, tuple(sums))
            if min(r) >= 0.9 and len(incs) >= 12:
                return TailIntegral(False, math.inf, tuple(sums))
        if inc == 0.0 or not math.isfinite(total):
            break
    if incs[-1] == 0.0:
        return TailIntegral(True, total, tuple(sums))
    return TailIntegral(False, math.inf, tuple(sums))


@dataclass(frozen=True)
class LinearBound:
    alpha: float
    delta: float
    table: tuple  # (delta, alpha(delta)) pairs


def _ratio_sup(f: Nonlinearity, delta: float, samples: int = 4000) -> float:
    x = np.unique(np.concatenate([np.geomspace(delta * 1e-9, delta, samples // 2),
                                  np.linspace(delta / samples, delta, samples // 2)]))
    return float(np.max(np.asarray(f(x)) / x))


def linear_bound_near_zero(f: Nonlinearity, delta_grid, alpha_max: float | None = None) -> LinearBound | None:
    """Certificate f(x) <= alpha x on [0, delta].

    For each delta, alpha(delta) = sup f(x)/x over (0, delta] by dense
    sampling. Returns the pair with the smallest alpha (the largest delta on
    ties). With ``alpha_max``, returns instead the largest delta whose
    alpha(delta) does not exceed alpha_max, or None.
    """
    deltas = sorted(float(d) for d in delta_grid)
    if not deltas or deltas[0] <= 0:
        raise ValueError("delta grid must be positive and nonempty")
    if abs(float(f(0.0))) > 1e-12:
        raise DomainError("linear bound needs f(0) = 0")
    # unbounded ratio near 0: the quotient keeps growing under refinement
    tiny = deltas[0] * 1e-9
    q_a, q_b = float(f(tiny)) / tiny, float(f(tiny * 1e-3)) / (tiny * 1e-3)
    if not math.isfinite(q_b) or q_b > q_a * 1.01 + 1e-300 and q_b > 1e6:
        return None
    table = [(d, _ratio_sup(f, d)) for d in deltas]
    if any(not math.isfinite(a) for _, a in table):
        return None
    if alpha_max is not None:
        ok = [(d, a) for d, a in table if a <= alpha_max]
        if not ok:
            return None
        d, a = ok[-1]
        return LinearBound(a, d, tuple(table))
    best = min(a for _, a in table)
    d = max(d for d, a in table if a <= best * (1 + 1e-12))
    return LinearBound(best, d, tuple(table))


@dataclass
class HypothesisReport:
    slope_at_zero: float
    convexity: ConvexityVerdict
    increasing: bool
    tail: TailIntegral
    linear_bound: LinearBound | None
    f_dominates_h: bool
    lipschitz_samples: tuple = ()

    def rows(self):
        lb = self.linear_bound
        return [
            ("slope_at_zero", self.slope_at_zero),
            ("convex", self.convexity.convex, self.convexity.worst, self.convexity.location),
            ("increasing", self.increasing),
            ("tail_integral_finite", self.tail.finite, self.tail.value),
            ("linear_bound", None if lb is None else (lb.alpha, lb.delta)),
            ("f_ge_h", self.f_dominates_h),
        ]


def analyze(f: Nonlinearity, S: float = 20.0, s0: float = 1.0, delta_grid=None) -> HypothesisReport:
    """Evaluate the theorem hypotheses on the minorant h (= f by default)."""
    h = f.h
    x = np.linspace(0.0, S, 400)
    hx = np.asarray(h(x), dtype=float)
    fx = np.asarray(f(x), dtype=float)
    increasing = bool(np.all(np.diff(hx) >= -1e-12))
    if delta_grid is None:
        delta_grid = np.geomspace(1e-3, 1.0, 31)
    try:
        tail = tail_reciprocal_integral(h, s0)
    except DomainError:
        tail = TailIntegral(False, math.inf, ())
    lips = tuple((s, f.lipschitz(s)) for s in (1.0, S))
    return HypothesisReport(
        slope_at_zero=slope_at_zero(h),
        convexity=is_convex_on(h, S),
        increasing=increasing,
        tail=tail,
        linear_bound=linear_bound_near_zero(f, delta_grid),
        f_dominates_h=bool(np.all(fx >= hx - 1e-12)),
        lipschitz_samples=lips,
    )
