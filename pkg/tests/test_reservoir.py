import csv
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tdrc.errors import DimensionError, NonFiniteError
from tdrc.kernels import Ikeda, MackeyGlass, find_equilibria
from tdrc.reservoir import (ReservoirConfig, check_mask, multiplex, run_continuous,
                            run_discrete, step_discrete, step_discrete_sweep,
                            write_layers_csv)
from tdrc.varmodel import connectivity, noise_vector

finite = dict(allow_nan=False, allow_infinity=False)
MG = MackeyGlass(2.0, 1.0, 2)


def test_config_invariants():
    cfg = ReservoirConfig(20, 0.2581)
    assert cfg.tau == 20 * 0.2581
    assert cfg.xi == math.log(1 + 0.2581)
    assert cfg.decay == pytest.approx(1 / 1.2581, rel=1e-15)
    for bad in ((0, 0.5), (2, 0.0), (2, -1.0), (2, math.inf), (1.5, 0.2)):
        with pytest.raises(ValueError):
            ReservoirConfig(*bad)


def test_multiplex_examples():
    np.testing.assert_array_equal(multiplex([1, -1], 0.5), [0.5, -0.5])
    np.testing.assert_array_equal(multiplex(np.zeros(4), 3.7), np.zeros(4))
    np.testing.assert_array_equal(multiplex([2, 3], 0.0), [0, 0])


def test_mask_checks():
    cfg = ReservoirConfig(3, 0.5)
    with pytest.raises(DimensionError):
        check_mask(cfg, [1, 2])
    with pytest.raises(ValueError):
        check_mask(cfg, [1, np.nan, 2])


# -- discrete map -------------------------------------------------------------

@settings(max_examples=100)
@given(N=st.integers(1, 30), d=st.floats(0.01, 3, **finite), data=st.data())
def test_sweep_matches_unrolled_form(N, d, data):
    cfg = ReservoirConfig(N, d)
    prev = data.draw(arrays(float, N, elements=st.floats(-2, 2, **finite)))
    I = data.draw(arrays(float, N, elements=st.floats(-1, 1, **finite)))
    k = data.draw(st.sampled_from([MG, Ikeda(1.2443, 1.4762, 0.1161)]))
    if isinstance(k, MackeyGlass):
        prev = np.abs(prev)
        I = np.abs(I)
    np.testing.assert_allclose(step_discrete(cfg, k, prev, I),
                               step_discrete_sweep(cfg, k, prev, I), rtol=0, atol=1e-12)


@pytest.mark.parametrize("k", [MackeyGlass(1.0781, 0.796, 2), MackeyGlass(1.3541, 4.79, 2),
                               Ikeda(1.2443, 1.4762, 0.1161), Ikeda(2.0, 1.0, -0.3)])
@pytest.mark.parametrize("N,d", [(1, 0.3), (7, 0.05), (20, 0.2581), (50, 1.0)])
def test_equilibria_are_fixed_points_of_the_map(k, N, d):
    cfg = ReservoirConfig(N, d)
    for e in find_equilibria(k):
        x = np.full(N, e.x0)
        np.testing.assert_allclose(step_discrete(cfg, k, x, np.zeros(N)), x, rtol=0, atol=1e-12)
        np.testing.assert_allclose(step_discrete_sweep(cfg, k, x, np.zeros(N)), x, rtol=0,
                                   atol=1e-12)


def test_zero_kernel_decays_geometrically():
    cfg = ReservoirConfig(1, 0.7)
    layers = run_discrete(cfg, MackeyGlass(0.0, 1.0, 2), [1.0], np.ones(6), 2.0)
    np.testing.assert_allclose(layers[:, 0], 2.0 / 1.7 ** np.arange(1, 7), rtol=1e-14)


def _mp_kernel(k):
    def f(x, I):
        if isinstance(k, MackeyGlass):
            u = x + mpmath.mpf(k.gamma) * I
            return mpmath.mpf(k.eta) * u / (1 + u ** mpmath.mpf(k.p))
        return mpmath.mpf(k.eta) * mpmath.sin(x + mpmath.mpf(k.gamma) * I + mpmath.mpf(k.phi)) ** 2
    return f


def _mp_step_deviation(cfg, f, x0, c, z):
    """``F(x0 * 1, c z) - x0 * 1`` evaluated by the neuron sweep in high precision."""
    e = 1 / (1 + mpmath.mpf(cfg.d))
    x, out = x0, []
    for j in range(cfg.N):
        x = e * x + (1 - e) * f(x0, mpmath.mpf(c[j]) * z)
        out.append(x - x0)
    return out


def _mp_taylor_noise(cfg, f, x0, c, z, R):
    e = 1 / (1 + mpmath.mpf(cfg.d))
    derivs = [mpmath.diff(lambda I: f(x0, I), 0, r) / mpmath.factorial(r) for r in range(1, R + 1)]
    out, acc = [], mpmath.mpf(0)
    for j in range(cfg.N):
        u = mpmath.mpf(c[j]) * z
        acc = e * acc + (1 - e) * sum(derivs[r - 1] * u ** r for r in range(1, R + 1))
        out.append(acc)
    return out


@pytest.mark.parametrize("k,N,d", [
    (MackeyGlass(1.0781, 0.796, 2), 10, 0.3),
    (MackeyGlass(2.0, 1.0, 2), 5, 0.5),
    (Ikeda(1.2443, 1.4762, 0.1161), 8, 0.2581),
])
def test_step_deviation_matches_noise_vector(k, N, d):
    mpmath.mp.dps = 50
    cfg = ReservoirConfig(N, d)
    f = _mp_kernel(k)
    x0_float = find_equilibria(k)[-1].x0
    x0 = mpmath.findroot(lambda x: f(x, 0) - x, mpmath.mpf(x0_float))
    c = np.random.default_rng(3).uniform(-1, 1, N)
    z = mpmath.mpf(1e-3)
    exact = _mp_step_deviation(cfg, f, x0, c, z)
    # independent oracle: numerically differentiated kernel, Taylor order 8
    oracle = _mp_taylor_noise(cfg, f, x0, c, z, 8)
    assert max(abs(a - b) for a, b in zip(exact, oracle)) <= 1e-20
    # the library's own noise vector evaluated at the same precision
    eps_mp = noise_vector(cfg, k, x0, c, 8, z)
    assert max(abs(a - b) for a, b in zip(exact, eps_mp)) <= 1e-20
    # float64 evaluation
    exact_f = np.array([float(v) for v in exact])
    eps = noise_vector(cfg, k, float(x0), c, 8, 1e-3)
    np.testing.assert_allclose(eps, exact_f, rtol=0, atol=1e-18)
    dev = step_discrete(cfg, k, np.full(N, float(x0)), c * 1e-3) - float(x0)
    np.testing.assert_allclose(dev, exact_f, rtol=0, atol=2e-15)


def test_jacobian_matches_connectivity():
    for k, N, d in ((MackeyGlass(1.0781, 0.796, 2), 10, 0.3),
                    (Ikeda(1.2443, 1.4762, 0.1161), 20, 0.2581)):
        cfg = ReservoirConfig(N, d)
        x0 = find_equilibria(k)[-1].x0
        base = np.full(N, x0)
        h = 1e-6
        J = np.empty((N, N))
        for j in range(N):
            dx = np.zeros(N)
            dx[j] = h
            J[:, j] = (step_discrete(cfg, k, base + dx, np.zeros(N))
                       - step_discrete(cfg, k, base - dx, np.zeros(N))) / (2 * h)
        np.testing.assert_allclose(J, connectivity(cfg, k, x0), rtol=0, atol=1e-6)


def test_constant_at_equilibrium():
    cfg = ReservoirConfig(20, 0.5)
    layers = run_discrete(cfg, MG, np.ones(20), np.zeros(50), 1.0)
    np.testing.assert_allclose(layers, 1.0, rtol=0, atol=1e-15)


def test_perturbation_converges():
    cfg = ReservoirConfig(20, 0.5)
    init = 1.0 + 1e-3 * np.random.default_rng(0).uniform(-1, 1, 20)
    layers = run_discrete(cfg, MG, np.ones(20), np.zeros(500), init)
    dist = np.max(np.abs(layers - 1.0), axis=1)
    assert dist[-1] < 1e-6
    assert dist[-1] < dist[0]


def test_composition():
    cfg = ReservoirConfig(6, 0.4)
    c = np.random.default_rng(1).uniform(-1, 1, 6)
    z = np.array([0.01, -0.02, 0.005])
    full = run_discrete(cfg, MG, c, z, 1.0)
    two = run_discrete(cfg, MG, c, z[:2], 1.0)
    third = step_discrete(cfg, MG, two[-1], multiplex(c, z[2]))
    np.testing.assert_array_equal(full[:2], two)
    np.testing.assert_allclose(full[2], third, rtol=0, atol=1e-15)


def test_discrete_blow_up_is_reported():
    cfg = ReservoirConfig(2, 0.5)
    with pytest.raises(NonFiniteError):
        run_discrete(cfg, MackeyGlass(1e300, 1.0, 1), [1, 1], np.ones(400), 1.0)


# -- continuous model ---------------------------------------------------------

def _naive_rk4(cfg, k, c, z, init, substeps=5):
    """Scalar RK4 with an explicit history buffer and linear interpolation."""
    N = cfg.N
    h = cfg.d / substeps
    M = N * substeps
    hist = [float(init)] * (M + 1)   # hist[n] = x(n h - tau) for n = 0..M
    x = float(init)
    layers = []
    for t in range(len(z)):
        for n in range(M):
            I = c[n // substeps] * z[t]
            base = len(hist) - 1 - M   # index of x(now - tau)

            def delayed(frac):
                lo = hist[base]
                hi = hist[base + 1]
                return (1 - frac) * lo + frac * hi

            def rhs(xv, frac):
                return -xv + float(k.f(delayed(frac), I))

            k1 = rhs(x, 0.0)
            k2 = rhs(x + h / 2 * k1, 0.5)
            k3 = rhs(x + h / 2 * k2, 0.5)
            k4 = rhs(x + h * k3, 1.0)
            x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            hist.append(x)
        layers.append(hist[-M - 1 + substeps::substeps][:N])
    return np.array(layers)


def test_continuous_matches_naive_integrator():
    cfg = ReservoirConfig(4, 0.3)
    k = MackeyGlass(1.0781, 0.796, 2)
    c = np.array([0.5, -1.0, 0.25, 0.8])
    z = np.random.default_rng(2).normal(0, 0.1, 6)
    fast = run_continuous(cfg, k, c, z, 0.2)
    slow = _naive_rk4(cfg, k, c, z, 0.2)
    np.testing.assert_allclose(fast, slow, rtol=0, atol=1e-13)


def test_continuous_stationary_at_equilibrium():
    cfg = ReservoirConfig(20, 0.2581)
    k = Ikeda(1.2443, 1.4762, 0.1161)
    x0 = find_equilibria(k)[0].x0
    layers = run_continuous(cfg, k, np.ones(20), np.zeros(100), x0)
    np.testing.assert_allclose(layers, x0, rtol=0, atol=1e-8)


def test_continuous_converges_to_operating_point():
    cfg = ReservoirConfig(20, 0.3)
    k = MackeyGlass(1.0781, 0.796, 2)
    layers = run_continuous(cfg, k, np.ones(20), np.zeros(100), 0.28)
    np.testing.assert_allclose(layers[-1], math.sqrt(0.0781), rtol=0, atol=1e-3)
    assert abs(math.sqrt(0.0781) - 0.2795) < 1e-4


def test_continuous_blow_up_is_reported():
    cfg = ReservoirConfig(2, 0.5)
    with pytest.raises(NonFiniteError):
        run_continuous(cfg, MackeyGlass(1e300, 1.0, 1), [1, 1], np.ones(400), 1.0)


def test_layers_csv(tmp_path):
    layers = np.array([[0.1, 1 / 3], [2.0, -5e-20]])
    path = tmp_path / "layers.csv"
    write_layers_csv(path, layers)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "x_1", "x_2"]
    assert [int(r[0]) for r in rows[1:]] == [1, 2]
    np.testing.assert_array_equal(np.array([[float(v) for v in r[1:]] for r in rows[1:]]), layers)
