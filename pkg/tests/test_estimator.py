import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gridseer import (BddConfig, EstimatorConfig, UnobservableError, bdd_check, estimate_and_check,
                      forge_attack, verify_undetectable, wls_estimate)
from gridseer.estimator import EstimationResult, simulate_measurements
from gridseer.observability import find_basic_set


@pytest.fixture(scope="module")
def H14(ieee14):
    return ieee14[1].jacobian


def test_noise_free_recovers_state(H14):
    rng = np.random.default_rng(1)
    theta = rng.uniform(-0.5, 0.5, 13)
    res = wls_estimate(H14, H14.matrix @ theta)
    np.testing.assert_allclose(res.theta_hat, theta, atol=1e-9)
    assert res.residual_norm <= 1e-9


def test_square_system_has_zero_residual(ieee14):
    _, meters = ieee14
    basic = find_basic_set(meters)
    H = meters.jacobian.rows(basic.meter_ids)
    z = np.random.default_rng(2).normal(size=13)
    assert wls_estimate(H, z).residual_norm <= 1e-9


def test_matches_pseudoinverse_oracle(H14):
    rng = np.random.default_rng(3)
    theta = rng.uniform(-0.5, 0.5, 13)
    z = simulate_measurements(H14, theta, 0.01, rng)
    res = wls_estimate(H14, z)
    oracle = np.linalg.pinv(H14.matrix) @ z
    np.testing.assert_allclose(res.theta_hat, oracle, atol=1e-9)
    # the error stays within what the noise can explain through H^+
    bound = np.abs(np.linalg.pinv(H14.matrix)).sum(axis=1).max() * np.abs(z - H14.matrix @ theta).max()
    assert np.abs(res.theta_hat - theta).max() <= bound


def test_weighted_matches_normal_equations(H14):
    rng = np.random.default_rng(4)
    w = rng.uniform(0.5, 4.0, 16)
    z = rng.normal(size=16)
    res = wls_estimate(H14, z, EstimatorConfig(weights=w))
    H = H14.matrix
    oracle = np.linalg.solve(H.T @ (w[:, None] * H), H.T @ (w * z))
    np.testing.assert_allclose(res.theta_hat, oracle, atol=1e-9)


def test_rank_deficient_names_certificate(ieee14):
    _, meters = ieee14
    H = meters.jacobian.matrix[:-4]
    with pytest.raises(UnobservableError, match="unobservable system") as info:
        wls_estimate(H, np.zeros(H.shape[0]))
    c = info.value.certificate
    assert np.abs(c).max() > 0 and np.allclose(H @ c, 0, atol=1e-9)


def test_bad_weights_and_shapes(H14):
    with pytest.raises(ValueError):
        wls_estimate(H14, np.zeros(16), EstimatorConfig(weights=np.zeros(16)))
    with pytest.raises(ValueError):
        wls_estimate(H14, np.zeros(5))
    with pytest.raises(ValueError):
        BddConfig(0.0)


@pytest.mark.parametrize("norm, tau, flagged", [(0.0, 0.1, False), (0.2, 0.1, True), (0.1, 0.1, False)])
def test_bdd_threshold(norm, tau, flagged):
    res = EstimationResult(np.zeros(1), np.zeros(1), norm, norm)
    assert bdd_check(res, BddConfig(tau)) is flagged


def test_chi_square_threshold():
    from scipy.stats import chi2

    cfg = BddConfig.chi_square(16, 13, 0.01)
    assert cfg.tau == pytest.approx(0.01 * np.sqrt(chi2.ppf(0.99, 3)))
    with pytest.raises(ValueError):
        BddConfig.chi_square(13, 13, 0.01)


def test_forge_attack_small_cases(H14):
    a = forge_attack(H14, np.zeros(13))
    assert not a.support and not a.a.any() and verify_undetectable(H14, a)
    two = np.array([[-2.0]])
    from gridseer.grid import Jacobian

    J = Jacobian(two, ("f",), (2,))
    np.testing.assert_allclose(forge_attack(J, [0.1]).a, [-0.2])


def test_spike_on_redundant_meter_is_detectable(H14):
    H = H14.matrix
    P = H @ np.linalg.pinv(H)
    k = int(np.argmax(1 - np.diag(P)))
    spike = np.zeros(16)
    spike[k] = 1.0
    assert 1 - P[k, k] > 1e-6
    assert not verify_undetectable(H14, spike)


def test_report_serialization(H14):
    z = H14.matrix @ np.full(13, 0.01)
    res = estimate_and_check(H14, z, None, BddConfig(0.1))
    doc = json.loads(json.dumps(res.to_dict(z)))
    assert set(doc) == {"z", "theta_hat", "residual_norm", "detected"}
    assert doc["detected"] is False


angles = arrays(np.float64, 13, elements=st.floats(-1.0, 1.0))


@settings(max_examples=100, deadline=None)
@given(angles, angles, st.integers(0, 2**32 - 1))
def test_residual_invariance_and_shift(H14, theta, c, seed):
    z = simulate_measurements(H14, theta, 0.01, np.random.default_rng(seed))
    a = forge_attack(H14, c)
    clean, bad = wls_estimate(H14, z), wls_estimate(H14, z + a.a)
    assert abs(clean.residual_norm - bad.residual_norm) <= 1e-9
    np.testing.assert_allclose(bad.theta_hat - clean.theta_hat, c, atol=1e-9)
    assert verify_undetectable(H14, a)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 16, elements=st.floats(0.1, 10.0)), st.floats(0.01, 100.0),
       arrays(np.float64, 16, elements=st.floats(-1.0, 1.0)))
def test_weight_scaling_leaves_estimate_unchanged(H14, w, k, z):
    a = wls_estimate(H14, z, EstimatorConfig(weights=w))
    b = wls_estimate(H14, z, EstimatorConfig(weights=k * w))
    np.testing.assert_allclose(a.theta_hat, b.theta_hat, atol=1e-9)
