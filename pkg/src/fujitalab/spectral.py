"""Weighted radial Laplacian, Dirichlet ball eigenvalues and lambda_1(M)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg.lapack import dgttrf, dgttrs
from scipy.optimize import brentq

from .grid import ConfigurationError, RadialField, RadialGrid
from .manifold import ModelManifold, _log_panel_integrals, ball_volume

__all__ = [
    "NumericalError",
    "DIRICHLET",
    "NEUMANN",
    "RadialOperator",
    "SpectralEstimate",
    "assemble_radial_laplacian",
    "lambda1_ball",
    "lambda1_manifold",
    "faber_krahn_probe",
    "dense_eigenvalues",
    "cell_weights",
]

DIRICHLET = "dirichlet"
NEUMANN = "neumann"


class NumericalError(RuntimeError):
    """A numerical procedure failed to converge or produced garbage."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


def _normalize_bc(bc: str) -> str:
    b = str(bc).lower().replace("_at_r", "").replace("atr", "")
    if b not in (DIRICHLET, NEUMANN):
        raise ConfigurationError(f"unknown boundary condition {bc!r}")
    return b


def _log_cells(m: ModelManifold, g: RadialGrid):
    h, n = g.h, g.n
    edges = np.concatenate([[0.0], (np.arange(n) + 0.5) * h, [g.R]])
    log_vol = _log_panel_integrals(m, edges)  # cells 0..n
    log_face = m.log_density(edges[1:-1])  # faces i+1/2, i = 0..n-1
    return log_vol, log_face


def cell_weights(m: ModelManifold, g: RadialGrid) -> np.ndarray:
    """Riemannian volume of each control cell (omega included)."""
    log_vol, _ = _log_cells(m, g)
    return m.omega * np.exp(log_vol)


@dataclass(frozen=True, eq=False)
class RadialOperator:
    """Tridiagonal discrete -Delta on the active nodes.

    Active nodes are 0..n-1 for a Dirichlet condition at R (u_n = 0) and
    0..n for a Neumann condition. ``sub[0]`` and ``sup[-1]`` are unused.
    """

    manifold: ModelManifold
    grid: RadialGrid
    bc: str
    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    weights: np.ndarray  # full length n+1
    _lu_cache: dict = field(default_factory=dict, repr=False)

    @property
    def size(self) -> int:
        return self.diag.size

    @property
    def active_weights(self) -> np.ndarray:
        return self.weights[: self.size]

    def apply(self, u: np.ndarray) -> np.ndarray:
        """-Delta u on the active nodes (input may be full length)."""
        u = np.asarray(u, dtype=float)[: self.size]
        out = self.diag * u
        out[1:] += self.sub[1:] * u[:-1]
        out[:-1] += self.sup[:-1] * u[1:]
        return out

    def full(self, active: np.ndarray) -> np.ndarray:
        v = np.zeros(self.grid.n + 1)
        v[: self.size] = active
        return v

    def field(self, values) -> RadialField:
        values = np.asarray(values, dtype=float)
        if values.size == self.size and self.size != self.grid.n + 1:
            values = self.full(values)
        return RadialField(self.grid, values, self.weights)

    def factor_shifted(self, a: float, b: float):
        """LU factors of a I + b L, cached by (a, b)."""
        key = (a, b)
        lu = self._lu_cache.get(key)
        if lu is None:
            dl = b * self.sub[1:]
            d = a + b * self.diag
            du = b * self.sup[:-1]
            dl, d, du, du2, ipiv, info = dgttrf(dl, d, du)
            if info != 0:
                raise NumericalError("singular tridiagonal system", shift=key)
            lu = (dl, d, du, du2, ipiv)
            if len(self._lu_cache) > 64:
                self._lu_cache.clear()
            self._lu_cache[key] = lu
        return lu

    def solve_shifted(self, a: float, b: float, rhs: np.ndarray) -> np.ndarray:
        dl, d, du, du2, ipiv = self.factor_shifted(a, b)
        x, info = dgttrs(dl, d, du, du2, ipiv, rhs)
        if info != 0:
            raise NumericalError("tridiagonal solve failed", info=info)
        return x

    def symmetric_form(self):
        """(diag, offdiag) of W^{1/2} L W^{-1/2}."""
        off = np.sqrt(self.sup[:-1] * self.sub[1:])
        return self.diag.copy(), off

    def symmetry_defect(self) -> float:
        w = self.active_weights
        lhs = w[:-1] * self.sup[:-1]
        rhs = w[1:] * self.sub[1:]
        return float(np.max(np.abs(lhs - rhs) / np.abs(lhs)))


@lru_cache(maxsize=64)
def _assemble(m: ModelManifold, g: RadialGrid, bc: str) -> RadialOperator:
    h, n = g.h, g.n
    log_vol, log_face = _log_cells(m, g)
    size = n if bc == DIRICHLET else n + 1
    # coefficient of the face i+1/2 seen from cells i and i+1
    right = np.exp(log_face - log_vol[:-1]) / h  # cell i, face i+1/2
    left = np.exp(log_face - log_vol[1:]) / h  # cell i+1, face i+1/2
    diag = np.zeros(n + 1)
    diag[:-1] += right
    diag[1:] += left
    sub = np.zeros(n + 1)
    sub[1:] = -left
    sup = np.zeros(n + 1)
    sup[:-1] = -right
    weights = m.omega * np.exp(log_vol)
    return RadialOperator(m, g, bc, sub[:size].copy(), diag[:size].copy(), sup[:size].copy(), weights)


def assemble_radial_laplacian(m: ModelManifold, g: RadialGrid, bc: str = DIRICHLET) -> RadialOperator:
    """Finite-volume discretization of -Delta for radial functions.

    Faces sit at r_{i+1/2}; the control volume of node i is the exact shell
    volume. At the pole the zero-flux face reproduces the even extension
    u'(0) = 0, so the origin row reads 2N (u_0 - u_1) / h^2 in flat space.
    """
    if not isinstance(g, RadialGrid):
        raise ConfigurationError("expected a RadialGrid")
    if g.R > m.r_max:
        raise ConfigurationError(f"grid radius {g.R} exceeds warping support {m.r_max}")
    return _assemble(m, g, _normalize_bc(bc))


def _sturm_count(d: list, e2: list, sigma: float) -> int:
    """Number of eigenvalues of the symmetric tridiagonal (d, e) below sigma."""
    count = 0
    q = d[0] - sigma
    if q < 0:
        count += 1
    tiny = 1e-300
    for i in range(1, len(d)):
        if q == 0.0:
            q = tiny
        q = d[i] - sigma - e2[i - 1] / q
        if q < 0:
            count += 1
    return count


def dense_eigenvalues(op: RadialOperator) -> np.ndarray:
    """All eigenvalues by a dense symmetric eigensolve (test oracle)."""
    d, off = op.symmetric_form()
    A = np.diag(d) + np.diag(off, 1) + np.diag(off, -1)
    return np.linalg.eigvalsh(A)


def lambda1_ball(m: ModelManifold, R: float, n: int, upper: float | None = None,
                 tol: float = 1e-9, max_iter: int = 60):
    """First Dirichlet eigenpair of the geodesic ball B_R.

    The eigenvalue is bracketed by Sturm bisection (``upper`` may pass a
    known upper bound, e.g. the eigenvalue of a smaller ball), then polished
    by shifted inverse iteration. Returns (lambda, eigenfunction) with the
    eigenfunction positive and max-normalized.
    """
    g = RadialGrid(R, n)
    op = assemble_radial_laplacian(m, g, DIRICHLET)
    d, off = op.symmetric_form()
    dl, e2 = d.tolist(), (off**2).tolist()
    gersh = float(np.max(d + np.concatenate([[0.0], off]) + np.concatenate([off, [0.0]])))
    lo, hi = 0.0, gersh
    if upper is not None and 0 < upper < gersh and _sturm_count(dl, e2, upper * (1 + 1e-9)) >= 1:
        hi = upper * (1 + 1e-9)
    while hi - lo > 1e-7 * hi:
        mid = 0.5 * (lo + hi)
        if _sturm_count(dl, e2, mid) >= 1:
            hi = mid
        else:
            lo = mid
    w = op.active_weights
    x = np.ones(op.size)
    lam = lo
    res = math.inf
    scale = math.sqrt(np.dot(w, x * x))
    for _ in range(max_iter):
        x = op.solve_shifted(-lo, 1.0, x / scale)
        scale = math.sqrt(np.dot(w, x * x))
        Lx = op.apply(x)
        lam = float(np.dot(w, x * Lx)) / scale**2
        res = math.sqrt(np.dot(w, (Lx - lam * x) ** 2)) / scale
        if res <= tol * max(1.0, lam):
            break
    else:
        raise NumericalError("inverse iteration did not converge", residual=res, eigenvalue=lam)
    x = x / x[np.argmax(np.abs(x))]
    return lam, op.field(x)


@dataclass
class SpectralEstimate:
    radii: list
    nodes: list
    values: list
    extrapolated: float
    lower: float
    upper: float
    analytic: float | None = None
    monotone: bool = True
    method: str = "exp-fit"
    power_fit: float = float("nan")

    @property
    def errbar(self) -> float:
        return max(self.extrapolated - self.lower, self.upper - self.extrapolated)

    @property
    def rel_error(self) -> float | None:
        if self.analytic is None:
            return None
        if self.analytic == 0:
            return abs(self.extrapolated)
        return abs(self.extrapolated - self.analytic) / self.analytic


def _exp_extrapolate(R, lam):
    (R1, R2, R3), (l1, l2, l3) = R, lam
    d1, d2 = R2 - R1, R3 - R2
    a, b = l1 - l2, l2 - l3
    if b <= 0 or a <= 0:
        return l3, "flat"
    rho = a / b
    if rho <= d1 / d2 * (1 + 1e-12):
        return l3, "no-exp-closure"

    def gap(beta):
        return math.expm1(beta * d1) / -math.expm1(-beta * d2) - rho

    hi = 1.0 / d2
    while gap(hi) < 0:
        hi *= 2.0
        if hi > 1e4:
            return l3, "no-exp-closure"
    beta = brentq(gap, 1e-12, hi, xtol=1e-14)
    return l3 - b / math.expm1(beta * d2), "exp-fit"


def _power_extrapolate(R, lam):
    A = np.column_stack([np.ones(len(R)), 1.0 / np.asarray(R) ** 2])
    coef, *_ = np.linalg.lstsq(A, np.asarray(lam), rcond=None)
    return float(coef[0])


def lambda1_manifold(m: ModelManifold, schedule) -> SpectralEstimate:
    """Exhaustion estimate of lambda_1(M) from balls B_R of increasing radius.

    ``schedule`` is a list of (R, n) pairs, at least three, with increasing R.
    The extrapolated value fits lambda_inf + a exp(-b R) on the last three
    radii; the raw sequence is always reported. ``lower``/``upper`` bracket
    the estimate by the R^-2 fit and the last ball eigenvalue.
    """
    schedule = sorted((float(R), int(n)) for R, n in schedule)
    if len(schedule) < 3:
        raise ConfigurationError("lambda1_manifold needs at least three radii")
    values = []
    prev = None
    for R, n in schedule:
        lam, _ = lambda1_ball(m, R, n, upper=prev)
        values.append(lam)
        prev = lam
    radii = [R for R, _ in schedule]
    monotone = all(b <= a + 1e-9 * max(1.0, a) for a, b in zip(values, values[1:]))
    ext, method = _exp_extrapolate(radii[-3:], values[-3:])
    pw = _power_extrapolate(radii[-3:], values[-3:])
    if not monotone:
        method = "non-monotone"
    lower = max(0.0, min(ext, pw))
    upper = values[-1]
    return SpectralEstimate(radii, [n for _, n in schedule], values, ext, lower, upper,
                            m.analytic_lambda1, monotone, method, pw)


def faber_krahn_probe(m: ModelManifold, radii, h: float = 0.01, min_nodes: int = 200):
    """min over balls of lambda_1(B_R) V(B_R)^{2/N}; returns (c, per-radius list)."""
    radii = list(radii)
    if not radii:
        raise ConfigurationError("faber_krahn_probe needs at least one radius")
    rows = []
    for R in radii:
        n = max(min_nodes, int(round(R / h)))
        lam, _ = lambda1_ball(m, R, n)
        rows.append((R, lam * ball_volume(m, R) ** (2.0 / m.dimension)))
    return min(v for _, v in rows), rows
