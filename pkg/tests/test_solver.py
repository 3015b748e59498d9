"""solver: IMEX stepping, blow-up extrapolation, Duhamel cross-check, exhaustion."""
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fujitalab.grid import ConfigurationError, RadialField, RadialGrid, bump_profile
from fujitalab.heat import heat_apply, positivity_dt
from fujitalab.manifold import ModelManifold
from fujitalab.reaction import ExponentialMinusOne, Linear, PiecewiseLinearPower, Power
from fujitalab.solver import (BlowUp, Global, Inconclusive, SchemeConfig, detect_blowup, duhamel_picard,
                              exhaustion_run, simulate)
from fujitalab.spectral import DIRICHLET, NEUMANN, NumericalError, assemble_radial_laplacian, cell_weights

H3 = ModelManifold.hyperbolic(3)
E3 = ModelManifold.euclidean(3)


def field(m, g, vals):
    return RadialField(g, np.asarray(vals, float), cell_weights(m, g))


def bump(m, g, height, width, center=0.0):
    return field(m, g, height * bump_profile(g.nodes, center, width))


# ---------------------------------------------------------------- config
@pytest.mark.parametrize("kw", [dict(dt0=0.0), dict(T_end=-1.0), dict(U_max=0.0), dict(scheme="RK4"),
                                dict(dt_policy="none"), dict(sample_every=0.0), dict(dt_min=0.0)])
def test_scheme_config_validation(kw):
    with pytest.raises(ConfigurationError):
        SchemeConfig(**kw)


def test_u_max_must_exceed_sup_u0():
    g = RadialGrid.with_spacing(5.0, 0.1)
    with pytest.raises(ConfigurationError):
        simulate(H3, g, Power(p=2.0), field(H3, g, np.full(g.n + 1, 2.0)), SchemeConfig(U_max=1.0))


def test_negative_u0_rejected():
    g = RadialGrid.with_spacing(5.0, 0.1)
    v = np.zeros(g.n + 1)
    v[3] = -1.0
    with pytest.raises(ConfigurationError):
        simulate(H3, g, Power(p=2.0), field(H3, g, v), SchemeConfig())


# ---------------------------------------------------------------- simulate oracles
def test_zero_reaction_matches_heat_apply():
    g = RadialGrid.with_spacing(10.0, 0.05)
    u0 = bump(H3, g, 1.0, 2.0)
    cfg = SchemeConfig(dt0=0.01, T_end=1.0, sample_every=0.5)
    out, tr = simulate(H3, g, Linear(a=0.0), u0, cfg)
    assert isinstance(out, Global)
    ref = heat_apply(H3, g, u0, 1.0, bc=DIRICHLET)
    assert np.max(np.abs(tr.fields[-1] - ref.values)) <= 1e-8


def test_homogeneous_neumann_oracle_t_star():
    # u' = u^2, u(0) = 1 blows up at t = 1; constants are preserved under Neumann truncation
    g = RadialGrid.with_spacing(5.0, 0.1)
    cfg = SchemeConfig(dt0=0.01, T_end=2.0, sample_every=0.1, U_max=1e6, dt_min=1e-5)
    out, tr = simulate(H3, g, Power(p=2.0), field(H3, g, np.ones(g.n + 1)), cfg, NEUMANN)
    assert isinstance(out, BlowUp)
    assert abs(out.t_star - 1.0) <= 0.05
    assert np.max(tr.fields[-1]) - np.min(tr.fields[-1]) <= 1e-6 * np.max(tr.fields[-1])


def test_homogeneous_refinement_stability():
    ts = []
    for h, dt in ((0.1, 0.01), (0.05, 0.005)):
        g = RadialGrid.with_spacing(5.0, h)
        cfg = SchemeConfig(dt0=dt, T_end=2.0, sample_every=0.1, U_max=1e6, dt_min=1e-5)
        out, _ = simulate(H3, g, Power(p=2.0), field(H3, g, np.ones(g.n + 1)), cfg, NEUMANN)
        ts.append(out.t_star)
    assert abs(ts[0] - ts[1]) / ts[1] < 0.05


def test_imex_be_scheme_also_detects_homogeneous_blowup():
    g = RadialGrid.with_spacing(5.0, 0.1)
    cfg = SchemeConfig(dt0=0.005, T_end=2.0, sample_every=0.1, U_max=1e6, dt_min=1e-5, scheme="IMEX-BE")
    out, _ = simulate(H3, g, Power(p=2.0), field(H3, g, np.ones(g.n + 1)), cfg, NEUMANN)
    assert isinstance(out, BlowUp)
    assert abs(out.t_star - 1.0) <= 0.05


def test_global_small_data_piecewise_below_lambda1():
    g = RadialGrid.with_spacing(30.0, 0.1)
    f = PiecewiseLinearPower(alpha=0.5, p=2.0)
    u0 = bump(H3, g, 0.2, 2.0)
    out, tr = simulate(H3, g, f, u0, SchemeConfig(dt0=0.05, T_end=20.0, sample_every=1.0))
    assert isinstance(out, Global)
    assert out.horizon == pytest.approx(20.0)
    assert tr.sups[-1] < tr.sups[0]  # decays at rate ~ lambda1 - alpha
    assert np.all(np.diff(tr.times) > 0)


def test_inconclusive_when_step_floor_not_reached():
    # dt_min below every step the run takes: crossing U_max is reported as Inconclusive
    g = RadialGrid.with_spacing(5.0, 0.1)
    cfg = SchemeConfig(dt0=0.01, T_end=2.0, sample_every=0.1, U_max=10.0, dt_min=1e-12)
    out, _ = simulate(H3, g, Power(p=2.0), field(H3, g, np.ones(g.n + 1)), cfg, NEUMANN)
    assert isinstance(out, Inconclusive)
    assert out.reason


def test_sample_grid_and_history_invariants():
    g = RadialGrid.with_spacing(10.0, 0.1)
    cfg = SchemeConfig(dt0=0.01, T_end=1.0, sample_every=0.25)
    out, tr = simulate(H3, g, Power(p=2.0), bump(H3, g, 0.5, 2.0), cfg)
    np.testing.assert_allclose(tr.times, [0.0, 0.25, 0.5, 0.75, 1.0], atol=1e-12)
    assert np.all(out.sup_history > 0)
    assert np.all(np.diff(tr.step_times) > 0)
    assert tr.index_at(0.5) == 2
    with pytest.raises(KeyError):
        tr.index_at(0.3)


@given(st.floats(0.05, 1.0), st.floats(0.5, 3.0), st.floats(0.0, 3.0))
def test_nonnegativity_preserved(height, width, center):
    g = RadialGrid.with_spacing(8.0, 0.2)
    u0 = bump(H3, g, height, width, center)
    _, tr = simulate(H3, g, Power(p=2.0), u0, SchemeConfig(dt0=0.05, T_end=0.5, sample_every=0.1))
    assert np.min(tr.fields) >= -1e-10


@given(st.floats(0.05, 0.8), st.floats(1.0, 2.0), st.floats(0.5, 3.0))
def test_comparison_principle(height, factor, width):
    g = RadialGrid.with_spacing(8.0, 0.2)
    u0 = bump(H3, g, height, width)
    v0 = bump(H3, g, height * factor, width)
    cfg = SchemeConfig(dt0=0.05, T_end=0.5, sample_every=0.1)
    _, tu = simulate(H3, g, Power(p=2.0), u0, cfg)
    _, tv = simulate(H3, g, Power(p=2.0), v0, cfg)
    K = min(tu.times.size, tv.times.size)
    assert np.all(tu.fields[:K] <= tv.fields[:K] + 1e-8)


# ---------------------------------------------------------------- detect_blowup
def test_detect_blowup_reciprocal_exact():
    t = 1.0 - np.geomspace(1.0, 1e-3, 400)
    est = detect_blowup(1.0 / (1.0 - t), times=t)
    assert abs(est.t_star - 1.0) <= 0.01
    assert est.method == "reciprocal-linear"
    assert not est.wide_uncertainty


def test_detect_blowup_power_profile_p3():
    t = np.linspace(0.0, 0.9999, 600)
    est = detect_blowup((1.0 - t) ** -0.5, times=t, p=3.0)
    assert abs(est.t_star - 1.0) <= 0.02
    assert est.t_star_power is not None


def test_detect_blowup_from_step_sizes():
    dts = np.full(999, 1e-3)
    t = np.cumsum(dts)
    est = detect_blowup(1.0 / (1.0 - t + 1e-3), dts)
    assert abs(est.t_star - 1.001) <= 0.01


def test_detect_blowup_few_points_flags_uncertainty():
    t = np.array([0.0, 0.5, 0.9, 0.95, 0.99])
    est = detect_blowup(1.0 / (1.0 - t), times=t)
    assert est.wide_uncertainty
    assert est.n_points < 8


def test_detect_blowup_bounded_history_is_precondition_violation():
    t = np.linspace(0.0, 10.0, 100)
    with pytest.raises(ValueError):
        detect_blowup(2.0 - np.exp(-t), times=t)
    with pytest.raises(ValueError):
        detect_blowup(1.0 / (1.0 - t / 11), times=t, U_max=1e6)


# ---------------------------------------------------------------- duhamel
def test_duhamel_zero_reaction_is_heat_apply_and_zero_data_is_zero():
    g = RadialGrid.with_spacing(10.0, 0.1)
    u0 = bump(H3, g, 1.0, 2.0)
    out = duhamel_picard(H3, g, Linear(a=0.0), u0, 0.05, n_slices=50)
    # same propagator: 50 slices, each split into substeps below the positivity step
    sub = math.ceil(0.001 / positivity_dt(assemble_radial_laplacian(H3, g)))
    ref = heat_apply(H3, g, u0, 0.05, steps=50 * sub)
    assert np.max(np.abs(out.values - ref.values)) <= 1e-12
    z = duhamel_picard(H3, g, Power(p=2.0), field(H3, g, np.zeros(g.n + 1)), 0.05)
    assert np.max(np.abs(z.values)) == 0.0


@pytest.mark.parametrize("f", [Power(p=2.0), PiecewiseLinearPower(alpha=1.5, p=2.0), ExponentialMinusOne(beta=0.5)],
                         ids=["power", "piecewise", "exponential"])
def test_duhamel_agrees_with_simulate(f):
    g = RadialGrid.with_spacing(15.0, 0.1)
    u0 = bump(H3, g, 0.5, 2.0)
    dp = duhamel_picard(H3, g, f, u0, 0.05)
    _, tr = simulate(H3, g, f, u0, SchemeConfig(dt0=0.001, T_end=0.05, sample_every=0.05))
    assert np.max(np.abs(dp.values - tr.fields[-1])) / tr.sups[-1] <= 1e-3


def test_duhamel_window_too_large():
    g = RadialGrid.with_spacing(5.0, 0.1)
    u0 = field(H3, g, np.full(g.n + 1, 5.0))
    with pytest.raises(NumericalError):
        duhamel_picard(H3, g, Power(p=2.0), u0, 1.0, n_slices=20, bc=NEUMANN)


# ---------------------------------------------------------------- exhaustion
def test_exhaustion_heat_is_domain_monotone():
    g = RadialGrid.with_spacing(20.0, 0.1)
    u0 = bump(H3, g, 1.0, 3.0)
    res = exhaustion_run(H3, Linear(a=0.0), u0, [5.0, 10.0, 20.0], SchemeConfig(dt0=0.02, T_end=1.0, sample_every=0.25))
    assert res.monotone
    assert all(isinstance(o, Global) for o in res.outcomes)


def test_exhaustion_influence_decays_for_compact_data():
    g = RadialGrid.with_spacing(20.0, 0.05)
    u0 = bump(H3, g, 0.5, 2.0)
    res = exhaustion_run(H3, PiecewiseLinearPower(alpha=0.5, p=2.0), u0, [10.0, 20.0],
                         SchemeConfig(dt0=0.01, T_end=0.5, sample_every=0.1), compact_radius=5.0)
    assert res.monotone
    assert res.compact_differences[0][2] <= 1e-8


def test_exhaustion_rejects_bad_radii():
    g = RadialGrid.with_spacing(10.0, 0.1)
    u0 = bump(H3, g, 0.5, 2.0)
    with pytest.raises(ConfigurationError):
        exhaustion_run(H3, Linear(a=0.0), u0, [10.0, 5.0], SchemeConfig())
    with pytest.raises(ConfigurationError):
        exhaustion_run(H3, Linear(a=0.0), u0, [5.0, 20.0], SchemeConfig())
