import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tdrc.errors import (DegenerateError, MomentLengthError, NotAnEquilibrium,
                         SingularError, UnstableError)
from tdrc.kernels import Ikeda, MackeyGlass, find_equilibria
from tdrc.reservoir import ReservoirConfig
from tdrc.varmodel import (VarApprox, autocovariance, build_var_approx,
                           char_poly_coefficients, char_poly_spectral_radius,
                           connectivity, connectivity_matrix, gaussian_moments,
                           noise_moments, noise_vector, norm_bound_holds,
                           norm_bound_stable, q_coefficients, row_sum_norm,
                           simulate_var, spectral_radius, stationary_mean,
                           yule_walker_gamma0)

finite = dict(allow_nan=False, allow_infinity=False)
MG3 = MackeyGlass(2.0, 0.796, 2)


def _fig3_mask(N=20):
    return np.random.default_rng(0).uniform(-1, 1, N)


# -- connectivity -------------------------------------------------------------

def test_connectivity_single_neuron():
    cfg = ReservoirConfig(1, 0.4)
    e = 1 / 1.4
    phi = (1 - e) * 0.7
    np.testing.assert_allclose(connectivity_matrix(cfg, 0.7), [[phi + e]], rtol=1e-15)


def test_connectivity_zero_slope():
    cfg = ReservoirConfig(2, 0.5)
    e = 1 / 1.5
    A = connectivity_matrix(cfg, 0.0)
    np.testing.assert_allclose(A, [[0, e], [0, e ** 2]], rtol=1e-15)
    assert spectral_radius(A) == pytest.approx(e ** 2, rel=1e-12)


def test_connectivity_structure():
    cfg = ReservoirConfig(5, 0.3)
    fp = -0.6
    e = 1 / 1.3
    phi = (1 - e) * fp
    A = connectivity_matrix(cfg, fp)
    for i in range(5):
        for j in range(5):
            want = phi * e ** (i - j) if j <= i else 0.0
            if j == 4:
                want += e ** (i + 1)
            assert A[i, j] == pytest.approx(want, rel=1e-14, abs=1e-16)


def test_connectivity_requires_equilibrium():
    with pytest.raises(NotAnEquilibrium):
        connectivity(ReservoirConfig(3, 0.5), MG3, 0.5)


# -- norm bound ---------------------------------------------------------------

def test_norm_bound_small_gain():
    k = MackeyGlass(0.9, 1.0, 2)
    for N in (1, 2, 7, 30):
        for d in (0.05, 0.5, 2.0):
            assert norm_bound_stable(ReservoirConfig(N, d), k, 0.0)


def test_norm_bound_violated():
    assert not norm_bound_holds(ReservoirConfig(10, 0.3), 1.2)


@settings(max_examples=300)
@given(N=st.integers(2, 60), d=st.floats(0.01, 5, **finite),
       fp=st.floats(-3, 3, **finite).filter(lambda v: abs(abs(v) - 1) > 1e-9))
def test_norm_bound_equivalence_from_two_neurons(N, d, fp):
    assert norm_bound_holds(ReservoirConfig(N, d), fp) == (abs(fp) < 1)


def test_norm_bound_grid_from_two_neurons():
    fps = np.round(np.arange(-15, 16) * 0.1, 12)
    for N in (2, 5, 20):
        for d in (0.1, 0.5, 1.0):
            cfg = ReservoirConfig(N, d)
            for fp in fps:
                assert norm_bound_holds(cfg, fp) == (abs(fp) < 1), (N, d, fp)


def test_single_neuron_norm_is_not_the_slope_condition():
    # with one neuron the matrix is the scalar (1 - e) f' + e, whose modulus
    # stays below one for slopes down to -(1 + e) / (1 - e)
    for d in (0.1, 0.5, 1.0):
        cfg = ReservoirConfig(1, d)
        e = cfg.decay
        assert norm_bound_holds(cfg, -1.2)
        assert row_sum_norm(connectivity_matrix(cfg, -1.2)) == pytest.approx(
            abs((1 - e) * -1.2 + e), rel=1e-14)
        edge = -(1 + e) / (1 - e)
        assert norm_bound_holds(cfg, edge + 1e-6) and not norm_bound_holds(cfg, edge - 1e-6)


@settings(max_examples=200)
@given(N=st.integers(1, 40), d=st.floats(0.01, 5, **finite), fp=st.floats(-3, 3, **finite))
def test_spectral_radius_below_row_sum_norm(N, d, fp):
    A = connectivity_matrix(ReservoirConfig(N, d), fp)
    assert spectral_radius(A) <= row_sum_norm(A) * (1 + 1e-12) + 1e-14


# -- characteristic polynomial --------------------------------------------------

def test_char_poly_two_neurons():
    cfg = ReservoirConfig(2, 0.5)
    phi = 0.3
    coeffs = char_poly_coefficients(cfg, phi)
    np.testing.assert_allclose(coeffs, [1, -(cfg.decay ** 2 / phi + 2), 1], rtol=1e-14)
    A = connectivity_matrix(cfg, phi / (1 - cfg.decay))
    want = np.sort(np.abs(np.linalg.eigvals(A)))
    got = np.sort(np.abs(phi * np.roots(coeffs)))
    np.testing.assert_allclose(got, want, rtol=1e-10)


def test_char_poly_single_neuron():
    cfg = ReservoirConfig(1, 0.8)
    phi = -0.25
    assert char_poly_spectral_radius(cfg, phi) == pytest.approx(abs(phi + cfg.decay), rel=1e-14)


def test_char_poly_matches_eigenvalues_example():
    cfg = ReservoirConfig(5, 0.5)
    A = connectivity_matrix(cfg, 0.4 / (1 - cfg.decay))
    assert char_poly_spectral_radius(cfg, 0.4) == pytest.approx(spectral_radius(A), abs=1e-8)


@settings(max_examples=200)
@given(N=st.integers(1, 8), d=st.floats(0.01, 2, **finite),
       phi=st.floats(-1, 1, **finite).filter(lambda v: abs(v) > 1e-3))
def test_char_poly_matches_eigenvalues(N, d, phi):
    cfg = ReservoirConfig(N, d)
    A = connectivity_matrix(cfg, phi / (1 - cfg.decay))
    assert abs(char_poly_spectral_radius(cfg, phi) - spectral_radius(A)) <= 1e-8


def test_char_poly_degenerate():
    with pytest.raises(DegenerateError):
        char_poly_spectral_radius(ReservoirConfig(3, 0.5), 0.0)


# -- Taylor noise ---------------------------------------------------------------

def test_gaussian_moments():
    m = gaussian_moments(0.01, 8)
    assert m[0] == 1 and m[1] == 0 and m[3] == 0
    assert m[2] == pytest.approx(1e-4, rel=1e-15)
    assert m[4] == pytest.approx(3e-8, rel=1e-14)
    assert m[6] == pytest.approx(15e-12, rel=1e-14)
    with pytest.raises(ValueError):
        gaussian_moments(-1.0, 2)


def test_noise_vector_zero_input():
    cfg = ReservoirConfig(6, 0.4)
    np.testing.assert_array_equal(noise_vector(cfg, MG3, 1.0, _fig3_mask(6), 8, 0.0), 0.0)


def test_noise_vector_first_order_single_neuron():
    cfg = ReservoirConfig(1, 0.4)
    k = Ikeda(0.8, 1.3, 0.5)
    x0 = find_equilibria(k)[0].x0
    slope = k.eta * k.gamma * math.sin(2 * (x0 + k.phi))
    got = noise_vector(cfg, k, x0, [0.7], 1, 0.02)
    assert got[0] == pytest.approx((1 - cfg.decay) * slope * 0.7 * 0.02, rel=1e-13)


def test_noise_moments_first_order():
    cfg = ReservoirConfig(4, 0.3)
    c = _fig3_mask(4)
    a = q_coefficients(cfg, MG3, 1.0, c, 1)
    mu, S = noise_moments(cfg, MG3, 1.0, c, 1, gaussian_moments(0.01, 2))
    np.testing.assert_array_equal(mu, 0.0)
    np.testing.assert_allclose(S, (1 - cfg.decay) ** 2 * 1e-4 * np.outer(a[0], a[0]),
                               rtol=1e-13)


def test_noise_moments_zero_mask():
    cfg = ReservoirConfig(4, 0.3)
    mu, S = noise_moments(cfg, MG3, 1.0, np.zeros(4), 8, gaussian_moments(0.01, 16))
    np.testing.assert_array_equal(mu, 0.0)
    np.testing.assert_array_equal(S, 0.0)


def test_noise_moments_need_enough_moments():
    cfg = ReservoirConfig(4, 0.3)
    with pytest.raises(MomentLengthError):
        noise_moments(cfg, MG3, 1.0, _fig3_mask(4), 8, gaussian_moments(0.01, 15))


def test_noise_moments_match_sampling():
    cfg = ReservoirConfig(20, 0.5)
    c = _fig3_mask()
    x0 = 1.0
    mu, S = noise_moments(cfg, MG3, x0, c, 8, gaussian_moments(0.01, 16))
    # antithetic pairs cancel the odd terms of the sample mean exactly
    half = np.random.default_rng(11).normal(0, 0.01, 500_000)
    eps = noise_vector(cfg, MG3, x0, c, 8, np.concatenate([half, -half]))
    big = np.abs(mu) > 1e-12
    np.testing.assert_allclose(eps.mean(axis=0)[big], mu[big], rtol=0.01)
    Sm = np.cov(eps, rowvar=False, bias=True)
    big = np.abs(S) > 1e-12
    np.testing.assert_allclose(Sm[big], S[big], rtol=0.01)


def test_noise_covariance_is_psd():
    for k, x0 in ((MG3, 1.0), (Ikeda(1.2443, 1.4762, 0.1161), None)):
        if x0 is None:
            x0 = find_equilibria(k)[0].x0
        cfg = ReservoirConfig(20, 0.2581)
        _, S = noise_moments(cfg, k, x0, _fig3_mask(), 8, gaussian_moments(0.01, 16))
        assert np.max(np.abs(S - S.T)) <= 1e-10
        assert np.min(np.linalg.eigvalsh(S)) >= -1e-10


# -- stationary moments ---------------------------------------------------------

def test_stationary_mean_examples():
    np.testing.assert_allclose(stationary_mean(np.eye(3) * 0.5, np.zeros(3), 0.7), 0.7)
    assert stationary_mean([[0.5]], [0.1], 2.0)[0] == pytest.approx(2.2, rel=1e-15)
    with pytest.raises(SingularError):
        stationary_mean(np.eye(2), np.zeros(2), 0.0)


def test_yule_walker_examples():
    assert yule_walker_gamma0([[0.5]], [[1.0]])[0, 0] == pytest.approx(4 / 3, rel=1e-15)
    np.testing.assert_array_equal(yule_walker_gamma0(np.eye(3) * 0.2, np.zeros((3, 3))), 0.0)
    with pytest.raises(UnstableError):
        yule_walker_gamma0(np.eye(2) * 1.01, np.eye(2))


def test_yule_walker_large_n_uses_lyapunov_solver():
    rng = np.random.default_rng(5)
    A = rng.normal(size=(45, 45))
    A *= 0.9 / spectral_radius(A)
    B = rng.normal(size=(45, 45))
    S = B @ B.T
    G = yule_walker_gamma0(A, S)
    assert np.max(np.abs(G - A @ G @ A.T - S)) <= 1e-8 * np.max(np.abs(S))


def test_autocovariance():
    assert autocovariance([[0.5]], [[4 / 3]], 1)[0, 0] == pytest.approx(2 / 3)
    rng = np.random.default_rng(1)
    A = rng.normal(size=(4, 4))
    A *= 0.8 / spectral_radius(A)
    G = yule_walker_gamma0(A, np.eye(4))
    np.testing.assert_array_equal(autocovariance(A, G, 0), G)
    np.testing.assert_allclose(autocovariance(A, G, -1), autocovariance(A, G, 1).T)
    np.testing.assert_allclose(autocovariance(A, G, 3), A @ A @ A @ G, rtol=1e-12)


def _surrogate(N=10, d=0.5):
    cfg = ReservoirConfig(N, d)
    return build_var_approx(cfg, MG3, 1.0, _fig3_mask(N), 0.01, 8)


def test_surrogate_invariants():
    var = _surrogate()
    G, A = var.Gamma0, var.A
    assert np.max(np.abs(G - A @ G @ A.T - var.Sigma_eps)) <= 1e-8
    assert np.max(np.abs(G - G.T)) <= 1e-10
    assert np.min(np.linalg.eigvalsh(G)) >= -1e-10
    assert var.stable == (spectral_radius(A) < 1)


def test_surrogate_unstable():
    cfg = ReservoirConfig(5, 0.5)
    with pytest.raises(UnstableError):
        build_var_approx(cfg, MackeyGlass(1.5, 1.0, 2), 0.0, np.ones(5))


def _batch_se(x, batches=100):
    b = x[: len(x) // batches * batches].reshape(batches, -1, x.shape[1]).mean(axis=1)
    return b.std(axis=0, ddof=1) / math.sqrt(batches)


def test_stationary_mean_matches_simulation():
    var = build_var_approx(ReservoirConfig(20, 0.5), MG3, 1.0, _fig3_mask(), 0.01, 8)
    z = np.random.default_rng(7).normal(0, 0.01, 100_200)
    X = simulate_var(var, z)[200:]
    se = _batch_se(X)
    assert np.all(np.abs(X.mean(axis=0) - var.mu_x) <= 3 * se + 1e-15)


def test_gamma0_matches_simulation():
    var = _surrogate()
    z = np.random.default_rng(8).normal(0, 0.01, 100_200)
    X = simulate_var(var, z)[200:]
    S = np.cov(X, rowvar=False, bias=True)
    assert np.linalg.norm(S - var.Gamma0) <= 0.05 * np.linalg.norm(var.Gamma0)


def test_simulate_var_initial_state():
    var = _surrogate(4)
    out = simulate_var(var, np.zeros(3), init=var.x0 + np.ones(4))
    np.testing.assert_allclose(out[0] - var.x0, var.A @ np.ones(4), rtol=1e-14)


def test_json_round_trip():
    var = _surrogate(5)
    back = VarApprox.from_dict(json.loads(var.to_json()))
    for name in ("A", "coeffs", "moments", "mu_eps", "Sigma_eps", "mu_x", "Gamma0"):
        np.testing.assert_array_equal(getattr(back, name), getattr(var, name))
    assert (back.cfg, back.x0, back.R, back.stable) == (var.cfg, var.x0, var.R, var.stable)
