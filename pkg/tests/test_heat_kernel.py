import math

import numpy as np
import pytest
from scipy import integrate

from emheat import ConfigurationError, TruncationError, solve_ab, solve_sphere_constant
from emheat.fields import GaussianField, ut_field
from emheat.heat_kernel import (
    KernelConfig,
    SpectralState,
    evaluate_solution_kernel,
    evaluate_solution_spectral,
    expand_datum,
    kernel_K,
    propagate,
    write_batch_csv,
)
from emheat.ou import gamma_eigenvalue

FREE3 = solve_sphere_constant(3, 0.0, 40)


def gauss_kernel(x, y):
    return (4 * np.pi) ** -1.5 * np.exp(-np.sum((x - y) ** 2, axis=-1) / 4)


def test_free_kernel_diagonal():
    x = np.array([1.0, 0, 0])
    assert kernel_K(x, x, FREE3, 3) == pytest.approx((4 * np.pi) ** -1.5, abs=1e-12)
    assert (4 * np.pi) ** -1.5 == pytest.approx(0.0224484, abs=1e-7)


def test_free_kernel_antipodal():
    x = np.array([0, 0, 1.0])
    val = kernel_K(x, -x, FREE3, 3)
    assert abs(val - (4 * np.pi) ** -1.5 * math.exp(-1)) <= 1e-8


def test_free_kernel_random_pairs():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(50, 3))
    y = rng.normal(size=(50, 3))
    x *= (rng.uniform(0.05, 6, 50) / np.linalg.norm(x, axis=1))[:, None]
    y *= (rng.uniform(0.05, 6, 50) / np.linalg.norm(y, axis=1))[:, None]
    err = np.abs(kernel_K(x, y, FREE3, 3, KernelConfig(k_max=40, tail_tol=1e-10)) - gauss_kernel(x, y))
    assert err.max() <= 1e-8


def test_free_planar_kernel_excluded():
    # AB with phi = 0 is the free plane, which sits on the Hardy boundary for N = 2
    with pytest.raises(ConfigurationError):
        kernel_K(np.array([1.0, 0]), np.array([0, 1.0]), solve_ab(0.0, 10), 2)


def test_ab_kernel_hermitian():
    pairs = solve_ab(0.3, 40)
    x = np.array([1.0, 0.0])
    assert np.isreal(kernel_K(x, x, pairs, 2)) and kernel_K(x, x, pairs, 2).real > 0
    rng = np.random.default_rng(7)
    a = rng.uniform(-2, 2, (20, 2))
    b = rng.uniform(-2, 2, (20, 2))
    np.testing.assert_allclose(kernel_K(a, b, pairs, 2), np.conj(kernel_K(b, a, pairs, 2)), atol=1e-14)


def test_ab_kernel_gauge_phase():
    # for phi -> phi + 1 the eigenfunctions shift n -> n + 1, giving a phase exp(i(th_y - th_x))
    a, b = solve_ab(0.3, 40), solve_ab(1.3, 41)
    x, y = np.array([0.6, 0.8]), np.array([-1.1, 0.4])
    ph = np.exp(1j * (math.atan2(y[1], y[0]) - math.atan2(x[1], x[0])))
    assert kernel_K(x, y, b, 2) == pytest.approx(ph * kernel_K(x, y, a, 2), abs=1e-12)


def test_kernel_errors():
    with pytest.raises(ConfigurationError):
        kernel_K(np.zeros(3), np.ones(3), FREE3, 3)
    with pytest.raises(TruncationError):
        kernel_K(np.array([5.0, 0, 0]), np.array([5.0, 0, 0]), solve_sphere_constant(3, 0.0, 3), 3)
    with pytest.raises(ConfigurationError):
        kernel_K(np.ones(2), np.ones(2), solve_ab(0.0, 3), 2)  # Hardy margin is 0
    with pytest.raises(ConfigurationError):
        KernelConfig(tail_tol=0.0)


def test_expand_eigen_datum():
    pairs = solve_ab(0.3, 2)
    md = gamma_eigenvalue(2, 1, pairs, 2)
    st = expand_datum(ut_field(md, pairs), pairs, 2, m_max=4)
    for key, c in st.coeffs.items():
        assert abs(c - (1.0 if key == (2, 1) else 0.0)) <= 1e-10
    md2 = gamma_eigenvalue(1, 1, pairs, 2)
    both = expand_datum(ut_field(gamma_eigenvalue(0, 1, pairs, 2), pairs) + ut_field(md2, pairs), pairs, 2, 3)
    assert both.coefficient(0, 1) == pytest.approx(1, abs=1e-10)
    assert both.coefficient(1, 1) == pytest.approx(1, abs=1e-10)
    assert both.coefficient(2, 1) == pytest.approx(0, abs=1e-10)


def test_expand_gaussian_datum_free3():
    pairs = solve_sphere_constant(3, 0.0, 1)
    u0 = lambda x: np.exp(-np.sum(np.asarray(x) ** 2, axis=-1) / 2)  # noqa: E731
    st = expand_datum(u0, pairs, 3, m_max=6, n_angle=16)
    for m in range(7):
        md = gamma_eigenvalue(m, 1, pairs, 3)
        vt = lambda r: md.radial(r) / math.sqrt(md.norm2)  # noqa: E731
        ref = math.sqrt(4 * math.pi) * integrate.quad(lambda r: math.exp(-r * r / 2) * vt(r) * r * r, 0, np.inf,
                                                      epsabs=1e-13, epsrel=1e-12)[0]
        assert st.coefficient(m, 1) == pytest.approx(ref, abs=1e-8)
    assert all(abs(st.coefficient(m, k)) < 1e-10 for m in range(7) for k in (2, 3, 4))


def test_propagate():
    pairs = solve_ab(0.3, 2)
    st = SpectralState(0.0, {(0, 1): 1.0, (1, 2): 0.5, (2, 3): -0.25j}, tuple(pairs), 2)
    same = propagate(st, 0.0)
    assert same.coeffs == st.coeffs
    one = propagate(st, 1.0)
    for key, c in one.coeffs.items():
        g = gamma_eigenvalue(key[0], key[1], pairs, 2).gamma_tilde
        assert c == pytest.approx(st.coeffs[key] * 2.0**-g, rel=1e-15)
    assert propagate(st, 3.0).norm2() <= st.norm2()
    twice = propagate(propagate(st, 0.5), 1 / 3)  # (1.5)(4/3) = 2
    for key in st.coeffs:
        assert twice.coeffs[key] == pytest.approx(one.coeffs[key], rel=1e-14)
    with pytest.raises(ConfigurationError):
        propagate(st, -1.0)


def test_spectral_solution_free_fundamental():
    pairs = solve_sphere_constant(3, 0.0, 0)
    st = SpectralState(0.0, {(0, 1): 1.0}, tuple(pairs), 3)
    x = np.random.default_rng(8).normal(size=(10, 3))
    c = 1 / math.sqrt(4 * math.pi) / math.sqrt(gamma_eigenvalue(0, 1, pairs, 3).norm2)
    for t in (0.0, 0.5, 4.0):
        ref = c * (1 + t) ** -1.5 * np.exp(-np.sum(x**2, axis=1) / (4 * (1 + t)))
        np.testing.assert_allclose(evaluate_solution_spectral(st, x, t, None), ref, rtol=1e-13)


def test_spectral_solution_linear_and_reproduces_datum():
    pairs = solve_ab(0.3, 2)
    a = SpectralState(0.0, {(0, 1): 1.0, (1, 1): 0.3}, tuple(pairs), 2)
    b = SpectralState(0.0, {(0, 2): 2.0j}, tuple(pairs), 2)
    x = np.random.default_rng(9).normal(size=(10, 2))
    lhs = evaluate_solution_spectral(a + b.scaled(3.0), x, 0.7, None)
    rhs = evaluate_solution_spectral(a, x, 0.7, None) + 3.0 * evaluate_solution_spectral(b, x, 0.7, None)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-14)
    u0 = ut_field(gamma_eigenvalue(0, 1, pairs, 2), pairs) + ut_field(gamma_eigenvalue(1, 1, pairs, 2), pairs, 0.3)
    np.testing.assert_allclose(evaluate_solution_spectral(a, x, 0.0, None), u0(x), rtol=1e-13)


def test_spectral_tail_guard():
    pairs = solve_ab(0.3, 1)
    st = SpectralState(0.0, {(0, 1): 1.0, (3, 1): 1.0}, tuple(pairs), 2)
    with pytest.raises(TruncationError):
        evaluate_solution_spectral(st, np.ones((1, 2)), 0.1)


def test_kernel_solution_free_gaussian():
    pairs = solve_sphere_constant(3, 0.0, 40)
    sigma = 0.5
    u0 = GaussianField(3, pairs, sigma, amp=sigma**1.5).at(0.0)  # exp(-|x|^2/(4 sigma))
    x = np.array([[0.3, 0.0, 0.1], [1.0, 1.0, -0.5], [2.5, 0.0, 0.0]])
    for t in (0.25, 1.0):
        ref = (sigma / (sigma + t)) ** 1.5 * np.exp(-np.sum(x**2, axis=1) / (4 * (sigma + t)))
        val = evaluate_solution_kernel(u0, x, t, pairs, 3, KernelConfig(k_max=40, tail_tol=1e-12))
        np.testing.assert_allclose(val, ref, atol=1e-8)


def test_kernel_solution_matches_spectral_ab():
    pairs = solve_ab(0.3, 40)
    for k in (1, 2):
        u0 = ut_field(gamma_eigenvalue(0, k, pairs, 2), pairs)
        st = SpectralState(0.0, {(0, k): 1.0}, tuple(pairs), 2)
        x = np.array([[0.5, 0.2], [-1.0, 1.5], [0.1, -2.0]])
        kv = evaluate_solution_kernel(u0, x, 0.5, pairs, 2, KernelConfig(k_max=len(pairs)))
        np.testing.assert_allclose(kv, evaluate_solution_spectral(st, x, 0.5, None), atol=1e-6)


def test_large_time_decay_rate():
    # at fixed x the lowest mode decays like (1+t)^{-(gamma~ - alpha/2)}; the (1,1) admixture fades as 1/t
    pairs = solve_ab(0.3, 2)
    st = SpectralState(0.0, {(0, 1): 1.0, (1, 1): 0.1}, tuple(pairs), 2)
    x = np.array([[0.7, 0.2]])
    ts = np.geomspace(10, 100, 8)
    vals = np.array([abs(evaluate_solution_spectral(st, x, t, None)[0]) for t in ts])
    slope = np.polyfit(np.log1p(ts), np.log(vals), 1)[0]
    md = gamma_eigenvalue(0, 1, pairs, 2)
    assert abs(-slope - (md.gamma_tilde - md.alpha / 2)) < 0.01


def test_batch_csv(tmp_path):
    path = tmp_path / "k.csv"
    write_batch_csv(path, [(np.ones(3), 0.5), (np.zeros(3), 1.0)], np.array([1 + 2j, 3]), np.array([1e-12, 2e-12]))
    assert len(path.read_text().splitlines()) == 3


@pytest.mark.parametrize("case", ["fourier", "sphere"])
def test_kernel_solution_matches_spectral_nonradial(case):
    from emheat import AngularPotential, solve_fourier

    if case == "fourier":
        pot = AngularPotential.fourier(a_coeffs=np.array([0.1, 0, 0.1]), A_coeffs=np.array([0.05, -0.3, 0.05]))
        pairs, N, k = solve_fourier(pot, 100, 41), 2, 2
        x = np.array([[0.5, 0.2], [-1.0, 1.5]])
    else:
        pairs, N, k = solve_sphere_constant(3, 0.0, 30), 3, 3
        x = np.array([[0.5, 0.2, -0.3], [-1.0, 1.5, 0.4]])
    u0 = ut_field(gamma_eigenvalue(1, k, pairs, N), pairs, 1 - 0.5j)
    st = SpectralState(0.0, {(1, k): 1 - 0.5j}, tuple(pairs), N)
    kv = evaluate_solution_kernel(u0, x, 0.5, pairs, N, KernelConfig(k_max=len(pairs)))
    np.testing.assert_allclose(kv, evaluate_solution_spectral(st, x, 0.5, None), atol=1e-6)
