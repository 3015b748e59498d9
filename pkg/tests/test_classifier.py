"""classifier: mechanical theorem evaluation and the contradiction witness."""
import math

import numpy as np
import pytest

from fujitalab.acceptance import dichotomy_config
from fujitalab.classifier import (BLOWS_UP_ALL_DATA, GLOBAL_FOR_SMALL_DATA, LARGE_DATA_BLOW_UP, UNDETERMINED,
                                  contradiction_witness, initial_data_props, manifold_checks, predict_regime)
from fujitalab.experiment import predict_for_config
from fujitalab.grid import RadialField, RadialGrid, bump_profile
from fujitalab.manifold import ModelManifold
from fujitalab.reaction import ExponentialMinusOne, PiecewiseLinearPower, Power
from fujitalab.spectral import SpectralEstimate, cell_weights

H3 = ModelManifold.hyperbolic(3)
E3 = ModelManifold.euclidean(3)


def spec_at(lam, err=0.0):
    return SpectralEstimate([10.0, 20.0], [200, 400], [lam + 0.1, lam + 0.02], lam, lam - err, lam + err)


@pytest.fixture(scope="module")
def h3_checks():
    return manifold_checks(H3, 40.0, lambda1=1.0)


def small_bump(m, height=0.05, width=3.0, R=40.0, h=0.1):
    g = RadialGrid.with_spacing(R, h)
    return initial_data_props(RadialField(g, height * bump_profile(g.nodes, 0.0, width), cell_weights(m, g)))


def test_h3_piecewise_above_lambda1_blows_up_for_all_data(h3_checks):
    pred = predict_regime(spec_at(1.0, 0.01), PiecewiseLinearPower(alpha=1.5, p=2.0), h3_checks, small_bump(H3))
    assert pred.verdict == BLOWS_UP_ALL_DATA
    assert all(ok for name, _, ok in pred.checklist if name.startswith("T1"))


def test_h3_piecewise_below_lambda1_global_for_small_data(h3_checks):
    pred = predict_regime(spec_at(1.0, 0.01), PiecewiseLinearPower(alpha=0.75, p=2.0), h3_checks, small_bump(H3))
    assert pred.verdict == GLOBAL_FOR_SMALL_DATA
    w = pred.witnesses
    assert 0 < w["alpha"] <= 0.99
    assert w["sup_bound"] > 0.05 and w["l1_bound"] > 0


def test_h3_exponential_small_data_global(h3_checks):
    pred = predict_regime(spec_at(1.0, 0.01), ExponentialMinusOne(beta=0.5), h3_checks, small_bump(H3, 0.01))
    assert pred.verdict == GLOBAL_FOR_SMALL_DATA


def test_large_data_fails_smallness(h3_checks):
    pred = predict_regime(spec_at(1.0, 0.01), PiecewiseLinearPower(alpha=0.75, p=2.0), h3_checks,
                          small_bump(H3, height=50.0))
    assert pred.verdict != GLOBAL_FOR_SMALL_DATA
    assert any("eq12a" in n or "eq13a" in n for n in pred.failed("T2"))


@pytest.mark.parametrize("alpha", [0.995, 1.0, 1.005])
def test_error_band_is_undetermined(h3_checks, alpha):
    pred = predict_regime(spec_at(1.0, 0.01), PiecewiseLinearPower(alpha=alpha, p=2.0), h3_checks, small_bump(H3))
    assert pred.verdict == UNDETERMINED


def test_euclidean_power_small_undetermined_tall_large_data():
    checks = manifold_checks(E3, 40.0, c_bar=1.0, ball_radius=2.0)
    spec = spec_at(0.0, 1e-3)
    small = small_bump(E3, height=0.05, width=1.5, R=10.0, h=0.05)
    assert predict_regime(spec, Power(p=2.0), checks, small).verdict == UNDETERMINED
    g = RadialGrid.with_spacing(10.0, 0.05)
    u0 = RadialField(g, 50.0 * bump_profile(g.nodes, 0.0, 1.9), cell_weights(E3, g))
    tall = initial_data_props(u0, E3, ball_radius=2.0)
    pred = predict_regime(spec, Power(p=2.0), checks, tall)
    assert pred.verdict == LARGE_DATA_BLOW_UP
    assert pred.witnesses["kaplan_w0"] > pred.witnesses["kaplan_threshold"]


def test_verdict_consistent_with_checklist_and_deterministic(h3_checks):
    args = (spec_at(1.0, 0.01), PiecewiseLinearPower(alpha=1.5, p=2.0), h3_checks, small_bump(H3))
    a, b = predict_regime(*args), predict_regime(*args)
    assert a.checklist == b.checklist and a.verdict == b.verdict
    if a.verdict == BLOWS_UP_ALL_DATA:
        assert not a.failed("T1") and not a.failed("M")


@pytest.mark.parametrize("alpha,p", [(1.5, 2.0), (1.5, 3.0), (2.0, 2.0), (3.0, 2.5)])
def test_monotonicity_larger_f_never_flips_to_global(h3_checks, alpha, p):
    base = predict_regime(spec_at(1.0, 0.01), PiecewiseLinearPower(alpha=1.5, p=2.0), h3_checks, small_bump(H3))
    big = predict_regime(spec_at(1.0, 0.01), PiecewiseLinearPower(alpha=alpha, p=p), h3_checks, small_bump(H3))
    assert base.verdict == BLOWS_UP_ALL_DATA
    assert big.verdict == BLOWS_UP_ALL_DATA


def test_pipeline_verdicts_on_dichotomy_config():
    assert predict_for_config(dichotomy_config(1.5)).verdict == BLOWS_UP_ALL_DATA
    assert predict_for_config(dichotomy_config(0.75)).verdict == GLOBAL_FOR_SMALL_DATA


def test_record_keeps_scalar_witnesses(h3_checks):
    rec = predict_regime(spec_at(1.0, 0.01), PiecewiseLinearPower(alpha=0.75, p=2.0), h3_checks,
                         small_bump(H3)).record()
    assert rec["verdict"] == GLOBAL_FOR_SMALL_DATA
    assert all(isinstance(v, (int, float, str)) for v in rec.values())


# ---------------------------------------------------------------- contradiction witness
def test_contradiction_witness_positive_gap():
    r = contradiction_witness(1.0, 1.5, 0.2, C1=1.0, C=math.e ** 3)
    assert r.status == "violated"
    assert r.gap == pytest.approx(0.3)
    assert r.T_violation == pytest.approx(3.0 / 0.3)


def test_contradiction_witness_zero_gap_and_below_lambda():
    assert contradiction_witness(1.0, 1.2, 0.2, 1.0, 2.0).status == "never"
    assert contradiction_witness(1.0, 0.8, 0.2, 1.0, 2.0).status == "not-applicable"
    assert contradiction_witness(spec_at(1.0), 1.5, 0.2, 1.0, 2.0, t0=50.0).T_violation == 50.0
