"""Regime prediction from the theorems' hypotheses, and the (eq326) contradiction witness."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import ode_threshold, smallness_bounds
from .manifold import ModelManifold, check_bound_condition, check_stochastic_completeness
from .reaction import LinearBound, Nonlinearity, is_convex_on, linear_bound_near_zero, slope_at_zero, tail_reciprocal_integral
from .grid import RadialField, RadialGrid
from .heat import kernel_decay_check
from .spectral import SpectralEstimate, faber_krahn_probe, lambda1_ball

__all__ = [
    "BLOWS_UP_ALL_DATA",
    "GLOBAL_FOR_SMALL_DATA",
    "LARGE_DATA_BLOW_UP",
    "UNDETERMINED",
    "ManifoldChecks",
    "InitialDataProps",
    "RegimePrediction",
    "manifold_checks",
    "initial_data_props",
    "predict_regime",
    "ContradictionReport",
    "contradiction_witness",
]

BLOWS_UP_ALL_DATA = "BlowsUpAllData"
GLOBAL_FOR_SMALL_DATA = "GlobalForSmallData"
LARGE_DATA_BLOW_UP = "LargeDataBlowUp"
UNDETERMINED = "Undetermined"

POSITIVITY_FLOOR = 1e-3  # lambda1 - errbar must exceed this to count as lambda1(M) > 0
DEFAULT_DELTA_GRID = tuple(np.geomspace(1e-3, 10.0, 41))


@dataclass
class ManifoldChecks:
    stochastic_completeness: str  # Sufficient | Unknown
    bound_condition: str  # Diverges | Saturates
    faber_krahn: float
    c_bar: float
    ball_radius: float | None = None
    ball_lambda1: float | None = None
    evidence: dict = field(default_factory=dict)


@dataclass
class InitialDataProps:
    sup: float
    l1: float
    nontrivial: bool
    nonnegative: bool
    kaplan_w0: float | None = None  # int_D u0 phi_D with int_D phi_D = 1
    support_radius: float | None = None


@dataclass
class RegimePrediction:
    verdict: str
    checklist: list  # (hypothesis, evidence, passed)
    witnesses: dict = field(default_factory=dict)

    def failed(self, prefix: str = "") -> list:
        return [name for name, _, ok in self.checklist if not ok and name.startswith(prefix)]

    def record(self) -> dict:
        d = {"verdict": self.verdict}
        d.update({k: v for k, v in self.witnesses.items() if isinstance(v, (int, float, str))})
        return d


def manifold_checks(m: ModelManifold, r_max: float = 40.0, c_bar: float | None = None,
                    fk_radii=(1.0, 2.0, 4.0, 8.0), ball_radius: float | None = None,
                    ball_h: float = 0.02, lambda1: float | None = None) -> ManifoldChecks:
    """Evaluate the manifold hypotheses once.

    c_bar defaults to the empirical kernel prefactor of kernel_decay_check
    on B_{r_max} (h = 0.1, t in [1, 20]) with lambda1 as decay rate.
    """
    sc = check_stochastic_completeness(m, min(r_max, m.r_max))
    rb = min(r_max, m.r_max / 2.0)
    bc = check_bound_condition(m, rb)
    fk, rows = faber_krahn_probe(m, fk_radii, h=0.02)
    lamD = None
    if ball_radius is not None:
        lamD, _ = lambda1_ball(m, ball_radius, max(200, int(round(ball_radius / ball_h))))
    if c_bar is None:
        R = min(r_max, m.r_max)
        fit = kernel_decay_check(m, RadialGrid.with_spacing(R, 0.1), (1.0, 20.0), lambda1=lambda1)
        c_bar = fit.c_bar
    return ManifoldChecks(sc.verdict, bc.verdict, fk, c_bar, ball_radius, lamD,
                          {"stochastic_completeness": sc, "bound_condition": bc, "faber_krahn_rows": rows})


def initial_data_props(u0: RadialField, m: ModelManifold | None = None, ball_radius: float | None = None,
                       ball_h: float | None = None) -> InitialDataProps:
    """sup, L^1 and (with a ball) the Kaplan pairing w0 = int_D u0 phi_D, phi_D a probability density."""
    vals = u0.values
    nz = np.nonzero(vals > 0)[0]
    support = float(u0.grid.nodes[nz[-1]]) if nz.size else 0.0
    w0 = None
    if m is not None and ball_radius is not None:
        h = u0.grid.h if ball_h is None else ball_h
        n = max(16, int(round(ball_radius / h)))
        lam, phi = lambda1_ball(m, ball_radius, n)
        r = phi.grid.nodes
        p = phi.values / float(np.dot(phi.weights, phi.values))
        uD = np.interp(r, u0.grid.nodes, vals, right=0.0)
        w0 = float(np.dot(phi.weights, uD * p))
    return InitialDataProps(u0.sup(), u0.l1(), bool(np.any(vals > 0)), bool(np.all(vals >= 0)), w0, support)


def _select_certificate(f: Nonlinearity, delta_grid, lam_lo: float, c_bar: float,
                        u0: InitialDataProps) -> LinearBound | None:
    """Among (alpha(delta), delta) with 0 < alpha <= lam_lo, the pair giving u0 the most room.

    Room is min(sup_bound / sup u0, l1_bound / |u0|_1); ties go to the
    larger delta. Theorem 2 holds for every admissible pair, so the choice
    only decides which smallness bounds are reported.
    """
    base = linear_bound_near_zero(f, delta_grid)
    if base is None:
        return None
    best, best_room = None, -math.inf
    for d, a in base.table:
        if not 0 < a <= lam_lo:
            continue
        sb, lb = smallness_bounds(lam_lo, a, d, c_bar)
        room = min(sb / u0.sup if u0.sup > 0 else math.inf, lb / u0.l1 if u0.l1 > 0 else math.inf)
        if room >= best_room:
            best, best_room = LinearBound(a, d, base.table), room
    return best


def predict_regime(spec: SpectralEstimate, f: Nonlinearity, checks: ManifoldChecks, u0: InitialDataProps,
                   convexity_range: float = 50.0, delta_grid=DEFAULT_DELTA_GRID) -> RegimePrediction:
    """Mechanical evaluation of Theorem 1, Theorem 2 and the Section 6 large-data result.

    The spectral error bar widens the undetermined band: blow-up for all data
    needs h'(0) > lambda + errbar, global existence needs a certificate
    alpha <= lambda - errbar. lambda1(M) > 0 is accepted when
    lambda - errbar > POSITIVITY_FLOOR.
    """
    lam, err = float(spec.extrapolated), float(spec.errbar)
    lam_lo, lam_hi = lam - err, lam + err
    h = f.h
    ck = []

    def add(name, evidence, ok):
        ck.append((name, evidence, bool(ok)))
        return bool(ok)

    # shared manifold hypotheses
    pos = add("M: lambda1(M) > 0", f"lambda={lam:.6g} errbar={err:.3g} lower={lam_lo:.6g} floor={POSITIVITY_FLOOR:g}",
              lam_lo > POSITIVITY_FLOOR)
    stoch = add("M: stochastically complete", checks.stochastic_completeness,
                checks.stochastic_completeness == "Sufficient")
    data_ok = add("u0: nonnegative and nontrivial", f"sup={u0.sup:.6g}", u0.nonnegative and u0.nontrivial)

    # Theorem 1
    alpha_h = slope_at_zero(h)
    conv = is_convex_on(h, convexity_range)
    xs = np.linspace(0.0, convexity_range, 400)
    hx = np.asarray(h(xs), float)
    incr = bool(np.all(np.diff(hx) > 0))
    h0 = abs(float(h(0.0))) <= 1e-12
    try:
        tail = tail_reciprocal_integral(h, 1.0)
        tail_ok, tail_ev = tail.finite, f"value={tail.value:.6g}"
    except ValueError as exc:
        tail_ok, tail_ev = False, str(exc)
    dom = bool(np.all(np.asarray(f(xs), float) >= hx - 1e-12))
    t1 = [
        add("T1: f >= h", "sampled on [0, S]", dom),
        add("T1: h increasing", f"S={convexity_range:g}", incr),
        add("T1: h convex", f"worst second difference {conv.worst:.3g} at {conv.location:.4g}", conv.convex),
        add("T1: h(0) = 0", f"h(0)={float(h(0.0)):.3g}", h0),
        add("T1: (N5) int^inf 1/h < inf", tail_ev, tail_ok),
        add("T1: h'(0) > lambda1 + errbar", f"h'(0)={alpha_h:.6g} vs {lam_hi:.6g}", alpha_h > lam_hi),
    ]
    witnesses = {"lambda1": lam, "errbar": err, "h_slope": alpha_h, "c_bar": checks.c_bar}
    if pos and stoch and data_ok and all(t1):
        return RegimePrediction(BLOWS_UP_ALL_DATA, ck, witnesses)

    # Theorem 2
    xs2 = np.linspace(0.0, convexity_range, 400)
    f_incr = bool(np.all(np.diff(np.asarray(f(xs2), float)) >= -1e-12))
    f0 = abs(float(f(0.0))) <= 1e-12
    cert = None
    if lam_lo > 0 and f0:
        cert = _select_certificate(f, delta_grid, lam_lo, checks.c_bar, u0)
    t2 = [
        add("T2: f increasing, f(0) = 0", f"f(0)={float(f(0.0)):.3g}", f_incr and f0),
        add("T2: Faber-Krahn probe > 0", f"c={checks.faber_krahn:.6g}", checks.faber_krahn > 0),
        add("T2: (N1) certificate alpha <= lambda1 - errbar",
            "none" if cert is None else f"alpha={cert.alpha:.6g} delta={cert.delta:.6g} vs {lam_lo:.6g}",
            cert is not None and cert.alpha > 0),
    ]
    if cert is not None and cert.alpha > 0 and lam_lo > 0:
        sup_b, l1_b = smallness_bounds(lam_lo, cert.alpha, cert.delta, checks.c_bar)
        witnesses.update(alpha=cert.alpha, delta=cert.delta, sup_bound=sup_b, l1_bound=l1_b)
        t2.append(add("T2: (eq12a) sup u0 <= delta e^-alpha", f"{u0.sup:.6g} <= {sup_b:.6g}", u0.sup <= sup_b))
        t2.append(add("T2: (eq13a) |u0|_1 <= delta / C2", f"{u0.l1:.6g} <= {l1_b:.6g}", u0.l1 <= l1_b))
    if pos and stoch and all(t2):
        return RegimePrediction(GLOBAL_FOR_SMALL_DATA, ck, witnesses)

    # Section 6: large data
    conv_f = is_convex_on(f, convexity_range)
    try:
        tail_f = tail_reciprocal_integral(f, 1.0).finite
    except ValueError:
        tail_f = False
    lamD = checks.ball_lambda1
    thr = ode_threshold(f, lamD) if lamD is not None else math.inf
    w0 = u0.kaplan_w0
    inside = (u0.support_radius is not None and checks.ball_radius is not None
              and u0.support_radius <= checks.ball_radius)
    t6 = [
        add("S6: f increasing and convex", f"worst {conv_f.worst:.3g}", conv_f.convex and f_incr),
        add("S6: int^inf 1/f < inf", "", tail_f),
        add("S6: (bound) integral diverges", checks.bound_condition, checks.bound_condition == "Diverges"),
        add("S6: supp u0 inside D", f"support={u0.support_radius} D={checks.ball_radius}", inside),
        add("S6: Kaplan w0 above threshold", f"w0={w0} threshold={thr:.6g} lambda(D)={lamD}",
            w0 is not None and w0 > thr),
    ]
    witnesses.update(ball_lambda1=lamD, kaplan_threshold=thr, kaplan_w0=w0)
    if data_ok and all(t6):
        return RegimePrediction(LARGE_DATA_BLOW_UP, ck, witnesses)
    if lam_lo < alpha_h <= lam_hi:
        witnesses["note"] = "slope inside the spectral error band"
    return RegimePrediction(UNDETERMINED, ck, witnesses)


@dataclass
class ContradictionReport:
    status: str  # violated | never | not-applicable
    gap: float
    T_violation: float | None
    log_ratio: float


def contradiction_witness(spec, alpha: float, eps: float, C1: float, C: float,
                          t0: float = 0.0, t_bar: float = 0.0) -> ContradictionReport:
    """(eq326): e^{[alpha - (lambda1 + eps)] T} <= C / C1 for all T > max(t0, t_bar).

    With a positive gap the inequality fails for T > ln(C / C1) / gap; the
    reported T is the first violation time beyond max(t0, t_bar).
    """
    lam = float(spec.extrapolated) if isinstance(spec, SpectralEstimate) else float(spec)
    gap = alpha - (lam + eps)
    if not (C1 > 0 and C > 0):
        raise ValueError("C and C1 must be positive")
    lr = math.log(C / C1)
    if alpha < lam:
        return ContradictionReport("not-applicable", gap, None, lr)
    if abs(gap) <= 1e-12 * max(1.0, abs(alpha)):
        return ContradictionReport("never", 0.0, None, lr)
    if gap < 0:
        return ContradictionReport("not-applicable", gap, None, lr)
    return ContradictionReport("violated", gap, max(lr / gap, t0, t_bar), lr)
