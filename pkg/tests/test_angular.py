import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import sparse
from scipy.sparse.linalg import eigsh

from emheat import AngularPotential, ConfigurationError, ProblemSpec, solve_ab, solve_fourier, solve_sphere_constant
from emheat.angular import (
    angular_spectrum,
    check_hardy_condition,
    harmonic_dimension,
    psi_gradient,
    psi_values,
    rayleigh_quotient,
    write_eigenpairs_csv,
)
from emheat.fields import angular_rule


def test_ab_enumeration():
    pairs = solve_ab(0.3, 2)
    np.testing.assert_allclose([p.mu for p in pairs], [0.09, 0.49, 1.69, 2.89, 5.29], rtol=0, atol=1e-15)
    assert [p.label for p in pairs] == [0, 1, -1, 2, -2]


def test_ab_free_circle():
    pairs = solve_ab(0.0, 1)
    assert [p.mu for p in pairs] == [0.0, 1.0, 1.0]
    th = np.linspace(0, 2 * np.pi, 7)
    np.testing.assert_allclose(pairs[0](th), 1 / math.sqrt(2 * math.pi))
    np.testing.assert_allclose(pairs[1](th), np.exp(-1j * th) / math.sqrt(2 * math.pi))


def test_ab_lowest_only():
    pairs = solve_ab(0.3, 0)
    assert len(pairs) == 1
    assert pairs[0].mu == pytest.approx(0.09, abs=1e-15)


def test_fourier_agrees_with_ab():
    explicit = solve_ab(0.3, 3)
    galerkin = solve_fourier(AngularPotential.constant_fourier(A=-0.3), 32, len(explicit))
    np.testing.assert_allclose([p.mu for p in galerkin], [p.mu for p in explicit], atol=1e-10)
    assert [p.label for p in galerkin] == [p.label for p in explicit]
    for g, e in zip(galerkin, explicit):
        L = (len(g.psi) - 1) // 2
        assert abs(g.psi[e.label + L]) == pytest.approx(1.0, abs=1e-10)


def test_fourier_free_and_constant_shift():
    free = solve_fourier(AngularPotential.constant_fourier(), 20, 5)
    np.testing.assert_allclose([p.mu for p in free], [0, 1, 1, 4, 4], atol=1e-12)
    shifted = solve_fourier(AngularPotential.constant_fourier(a=0.37), 20, 5)
    np.testing.assert_allclose([p.mu for p in shifted], np.array([0, 1, 1, 4, 4]) - 0.37, atol=1e-12)


def test_fourier_needs_basis_room():
    with pytest.raises(ConfigurationError):
        solve_fourier(AngularPotential.constant_fourier(), 10, 5)


def test_nonhermitian_coefficients_rejected():
    with pytest.raises(ConfigurationError):
        AngularPotential.fourier(a_coeffs=np.array([1.0, 0.0, 2.0]))


@settings(max_examples=30, deadline=None)
@given(phi=st.floats(-0.49, 0.49), shift=st.integers(-3, 3))
def test_integer_gauge_shift(phi, shift):
    # exp(i n0 theta) conjugation maps A to A + n0 without changing the spectrum
    a = solve_fourier(AngularPotential.constant_fourier(A=phi), 40, 7)
    b = solve_fourier(AngularPotential.constant_fourier(A=phi + shift), 40, 7)
    np.testing.assert_allclose([p.mu for p in a], [p.mu for p in b], atol=1e-9)


def test_smooth_potential_against_finite_differences():
    # A = 0.2 + 0.1 cos(theta), a = 0.3 cos(2 theta); oracle: gauge-link finite differences on a periodic grid
    A_c = np.array([0.05, 0.2, 0.05])
    a_c = np.array([0.15, 0, 0, 0, 0.15])
    pairs = solve_fourier(AngularPotential.fourier(a_coeffs=a_c, A_coeffs=A_c), 40, 4)
    n = 4000
    h = 2 * np.pi / n
    th = np.arange(n) * h
    link = np.exp(1j * h * (0.2 + 0.1 * np.cos(th + h / 2)))
    B = sparse.diags([-np.ones(n), link[:-1]], [0, 1]) + sparse.coo_matrix(([link[-1]], ([n - 1], [0])), shape=(n, n))
    B = B.tocsr() / h
    H = (B.conj().T @ B - sparse.diags(0.3 * np.cos(2 * th))).tocsc()
    fd = np.sort(eigsh(H, k=4, sigma=-1.0, which="LM")[0])
    np.testing.assert_allclose([p.mu for p in pairs], fd, atol=2e-5)


def test_sphere_n3():
    pairs = solve_sphere_constant(3, 0.0, 1)
    assert [p.mu for p in pairs] == [0, 2, 2, 2]
    pts = np.array([[0, 0, 1.0], [1.0, 0, 0], [0.6, 0.8, 0]])
    np.testing.assert_allclose(psi_values(pairs[0], pts), 1 / math.sqrt(4 * math.pi))


def test_sphere_n4_shift():
    pairs = solve_sphere_constant(4, 1.0, 1)
    assert pairs[0].mu == -1.0
    assert [p.mu for p in pairs[1:]] == [2.0] * 4


@pytest.mark.parametrize("N,dims", [(3, [1, 3, 5, 7]), (4, [1, 4, 9, 16]), (5, [1, 5, 14, 30])])
def test_harmonic_dimension(N, dims):
    assert [harmonic_dimension(N, ell) for ell in range(4)] == dims


def test_sphere_harmonics_orthonormal():
    pairs = solve_sphere_constant(3, 0.0, 3)
    pts, w = angular_rule(3, 32)
    Y = np.stack([psi_values(p, pts) for p in pairs])
    G = (Y.conj() * w) @ Y.T
    np.testing.assert_allclose(G, np.eye(len(pairs)), atol=1e-12)


def test_sphere_gradient_matches_finite_differences():
    pairs = solve_sphere_constant(3, 0.0, 3)
    pol, az = 1.1, 0.7
    h = 1e-6

    def point(p, a):
        return np.array([np.sin(p) * np.cos(a), np.sin(p) * np.sin(a), np.cos(p)])

    for pair in pairs:
        g = psi_gradient(pair, point(pol, az))
        dpol = (psi_values(pair, point(pol + h, az)) - psi_values(pair, point(pol - h, az))) / (2 * h)
        daz = (psi_values(pair, point(pol, az + h)) - psi_values(pair, point(pol, az - h))) / (2 * h)
        np.testing.assert_allclose(g, [dpol, daz / np.sin(pol)], atol=1e-8)


def test_sphere_energy_identity():
    # int |grad_S Y|^2 = l(l+1) for normalized harmonics
    pairs = solve_sphere_constant(3, 0.0, 3)
    pts, w = angular_rule(3, 48)
    for p in pairs:
        g = psi_gradient(p, pts)
        energy = np.sum(w * np.sum(np.abs(g) ** 2, axis=-1))
        assert energy == pytest.approx(p.label * (p.label + 1), rel=1e-10)


def test_rayleigh_quotient_examples():
    ab = AngularPotential.aharonov_bohm(0.3)
    psi = np.zeros(7, complex)
    psi[3] = 1
    assert rayleigh_quotient(ab, psi) == pytest.approx(0.09, abs=1e-14)
    with pytest.raises(ConfigurationError):
        rayleigh_quotient(ab, np.zeros(5))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False), min_size=9, max_size=9))
def test_rayleigh_quotient_bounds(coefs):
    psi = np.array(coefs)
    if np.linalg.norm(psi) < 1e-6:
        return
    assert rayleigh_quotient(AngularPotential.aharonov_bohm(0.3), psi) >= 0.09 - 1e-8
    assert rayleigh_quotient(AngularPotential.constant_fourier(), psi) >= 0.0


@pytest.mark.parametrize(
    "pairs,N,margin,ok",
    [
        (solve_ab(0.3, 2), 2, 0.09, True),
        (solve_sphere_constant(3, 0.0, 1), 3, 0.25, True),
        (solve_ab(0.0, 2), 2, 0.0, False),
        (solve_sphere_constant(3, 0.3, 1), 3, -0.05, False),
    ],
)
def test_hardy_condition(pairs, N, margin, ok):
    chk = check_hardy_condition(pairs, N)
    assert chk.ok is ok
    assert chk.margin == pytest.approx(margin, abs=1e-14)


def test_dispatch_and_csv(tmp_path):
    pairs = angular_spectrum(ProblemSpec(2, AngularPotential.aharonov_bohm(0.5)), 1)
    assert [p.label for p in pairs] == [0, 1, -1]
    path = tmp_path / "pairs.csv"
    write_eigenpairs_csv(pairs, path, ["note"])
    lines = path.read_text().splitlines()
    assert lines[0] == "# note"
    assert len(lines) == 2 + len(pairs)
