"""Logistic kernel and two-block closed forms."""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blauspace import (
    KernelParams,
    SbmSpec,
    edge_probability,
    log_odds,
    logit,
    sigmoid,
)
from blauspace.kernel import sbm_edge_probability


@given(st.floats(1e-12, 1.0 - 1e-12))
def test_logit_sigmoid_round_trip(p):
    assert sigmoid(logit(p)) == pytest.approx(p, rel=1e-9)


# past |x| ~ 15 the round trip hits 1 - sigmoid underflowing in double
# precision, so the recoverable range is capped
@given(st.floats(-15.0, 15.0))
def test_sigmoid_logit_round_trip(x):
    assert logit(sigmoid(x)) == pytest.approx(x, rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.2, 1.3])
def test_logit_domain(bad):
    with pytest.raises(ValueError):
        logit(bad)


def test_sigmoid_extremes_stay_finite():
    with np.errstate(over="raise"):
        vals = sigmoid(np.array([-1000.0, -40.0, 0.0, 40.0, 1000.0]))
    assert vals[0] == 0.0
    assert vals[2] == 0.5
    assert vals[4] == 1.0
    assert np.all((vals >= 0.0) & (vals <= 1.0))


def test_kernel_params_validation():
    with pytest.raises(ValueError):
        KernelParams(np.array([1.0, np.nan]))
    with pytest.raises(ValueError):
        KernelParams(np.array([1.0, 2.0]), names=("only",))
    assert KernelParams(np.array([-1.0, -0.5, -2.0])).is_homophilous
    assert not KernelParams(np.array([-1.0, 0.5])).is_homophilous


def test_log_odds_matches_dot_product(toy_table, toy_config, identity_std):
    theta = np.array([-3.0, -0.5, -1.0, -0.25, -2.0, -0.1])
    params = KernelParams(theta, names=toy_config.names)
    x = toy_table.row("p2")
    y = toy_table.row("p9")
    from blauspace import evaluate_features

    f = evaluate_features(x, y, toy_config)
    assert log_odds(x, y, params, toy_config, identity_std) == pytest.approx(f @ theta)
    assert edge_probability(x, y, params, toy_config, identity_std) == pytest.approx(
        sigmoid(f @ theta)
    )


def test_sbm_spec_validation():
    with pytest.raises(ValueError):
        SbmSpec(block_probs=(0.7, 0.2), rho_same=0.05, rho_diff=0.01)
    with pytest.raises(ValueError):
        SbmSpec(block_probs=(1.0,), rho_same=0.05, rho_diff=0.01)
    with pytest.raises(ValueError):
        SbmSpec(block_probs=(0.5, 0.5), rho_same=1.0, rho_diff=0.01)


def test_sbm_edge_probability():
    spec = SbmSpec(block_probs=(0.8, 0.2), rho_same=0.05, rho_diff=0.01)
    assert sbm_edge_probability(1, 1, spec) == 0.05
    assert sbm_edge_probability(1, 2, spec) == 0.01
    with pytest.raises(ValueError):
        sbm_edge_probability(0, 1, spec)
    with pytest.raises(ValueError):
        sbm_edge_probability(1, 3, spec)
