import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qemtools.mitigation.extrapolation import (
    NonExponentialData,
    NonHyperbolicDecay,
    fit_multi_exp,
    hyperbolic_extrapolate,
    partition_forward,
    recombine_identity_check,
    select_model,
    two_point_exp,
)

MUS = (0.5, 1.0, 1.5, 2.0)


def points(amps, gammas, xs=MUS):
    return [(x, sum(a * math.exp(-g * x) for a, g in zip(amps, gammas))) for x in xs]


# -- two-point ------------------------------------------------------------------

def test_two_point_examples():
    assert two_point_exp(math.exp(-0.1), math.exp(-0.2), 2) == pytest.approx(1.0, abs=1e-12)
    assert two_point_exp(0.3, 0.3, 2) == pytest.approx(0.3)
    a, g, mu, lam = 0.8, 0.3, 0.5, 3.0
    assert two_point_exp(a * math.exp(-g * mu), a * math.exp(-g * lam * mu), lam) == pytest.approx(0.8, abs=1e-12)


def test_two_point_carries_negative_sign():
    assert two_point_exp(-0.5 * math.exp(-0.2), -0.5 * math.exp(-0.4), 2) == pytest.approx(-0.5)


def test_two_point_rejects_sign_change():
    with pytest.raises(NonExponentialData):
        two_point_exp(0.2, -0.1, 2)
    with pytest.raises(ValueError):
        two_point_exp(0.2, 0.1, 1.0)


# -- multi-exponential fits ---------------------------------------------------------

def test_dual_exp_recovery():
    m = fit_multi_exp(points((0.6, 0.4), (0.2, 0.9)), 2)
    assert m.amplitudes == pytest.approx((0.6, 0.4), abs=1e-6)
    assert m.gammas == pytest.approx((0.2, 0.9), abs=1e-6)
    assert m.zero_noise == pytest.approx(1.0, abs=1e-6)


def test_single_exp_fit_matches_two_point():
    pts = points((0.7,), (0.35,), xs=(1.0, 2.0))
    assert fit_multi_exp(pts, 1).zero_noise == pytest.approx(two_point_exp(pts[0][1], pts[1][1], 2), abs=1e-9)


def test_flat_data():
    m = fit_multi_exp([(x, 0.42) for x in MUS], 1)
    assert m.amplitudes[0] == pytest.approx(0.42) and m.gammas[0] == pytest.approx(0.0, abs=1e-9)


def test_power_basis():
    pts = [(l, 0.5 * 0.9**l + 0.2 * 0.4**l) for l in range(8)]
    m = fit_multi_exp(pts, 2, basis="power")
    assert m.gammas == pytest.approx((0.1, 0.6), abs=1e-6)
    assert m(np.array([3.0]))[0] == pytest.approx(pts[3][1], abs=1e-9)


def test_fit_input_validation():
    with pytest.raises(ValueError):
        fit_multi_exp([(1.0, 0.5), (2.0, 0.4)], 2)
    with pytest.raises(ValueError):
        fit_multi_exp([(1.0, 0.5), (1.0, 0.4)], 1)


@settings(max_examples=25, deadline=None)
@given(st.floats(-1, 1), st.floats(0.0, 1.0))
def test_single_component_round_trip(a, g):
    if abs(a) < 1e-3:
        return
    m = fit_multi_exp(points((a,), (g,)), 1)
    assert m.zero_noise == pytest.approx(a, abs=1e-8)


# -- model selection -------------------------------------------------------------

def test_selects_one_component_for_single_exp():
    assert select_model(points((0.9,), (0.4,)), 2).k == 1


def test_selects_two_components_for_sign_crossing():
    pts = points((0.5, -0.3), (0.9, 0.1))
    assert fit_multi_exp(pts, 1).normalized_residual > 1e-4
    m = select_model(pts, 2, 1e-4)
    assert m.k == 2 and m.normalized_residual < 1e-4 and not m.warning


def test_warning_when_no_model_fits():
    pts = [(0.5, 0.9), (1.0, 0.2), (1.5, 0.8), (2.0, 0.1)]
    with pytest.warns(RuntimeWarning):
        m = select_model(pts, 2, 1e-6)
    assert m.warning


def test_selected_model_is_smallest_adequate_or_best():
    rng = np.random.default_rng(0)
    for _ in range(10):
        pts = points(rng.uniform(-1, 1, 2), rng.uniform(0, 1, 2))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            m = select_model(pts, 2, 1e-4)
        res = {k: fit_multi_exp(pts, k).normalized_residual for k in (1, 2)}
        if m.warning:
            assert m.normalized_residual == pytest.approx(min(res.values()))
        else:
            assert m.normalized_residual < 1e-4
            assert all(res[k] >= 1e-4 for k in res if k < m.k)


# -- hyperbolic extrapolation ---------------------------------------------------------

def test_hyperbolic_example():
    o_pass, o_fail = partition_forward(0.8, 0.3, 1.0)
    assert (o_pass, o_fail) == pytest.approx((0.65072, 0.51641), abs=5e-5)
    assert hyperbolic_extrapolate(o_pass, o_fail, 1.0) == pytest.approx(0.8, abs=1e-12)


def test_hyperbolic_flat_case():
    for o in (0.3, -0.7):
        assert hyperbolic_extrapolate(o, o, 0.8) == pytest.approx(o)


def test_non_hyperbolic_detected():
    with pytest.raises(NonHyperbolicDecay):
        hyperbolic_extrapolate(0.1, 0.9, 1.0)


@settings(max_examples=300, deadline=None)
@given(st.floats(-1, 1).filter(lambda v: abs(v) > 1e-6), st.floats(0, 0.999), st.floats(0.01, 3))
def test_hyperbolic_inverts_forward_map(o, g, mu_d):
    assert hyperbolic_extrapolate(*partition_forward(o, g, mu_d), mu_d) == pytest.approx(o, abs=1e-10)


def test_recombine_identity():
    assert recombine_identity_check(0.4, -0.2, 0.0) == 0.4
    assert recombine_identity_check(0.3, 0.3, 1.7) == pytest.approx(0.3)
    o, g, mu_d = 0.6, 0.4, 0.9
    op, of = partition_forward(o, g, mu_d)
    assert recombine_identity_check(op, of, mu_d) == pytest.approx(o * math.exp(-g * mu_d), abs=1e-12)
