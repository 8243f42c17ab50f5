import math

import numpy as np
import pytest
from scipy import integrate

from emheat import AngularPotential, ConfigurationError, NumericalError, ProblemSpec, solve_ab, solve_sphere_constant
from emheat.almgren import (
    beta_coefficients,
    blowup_distance,
    blowup_report,
    compute_D,
    compute_H,
    derivative_identity,
    frequency,
    h_vanishing_rate,
    ladder,
    monotone_H_check,
    richardson_limit,
    write_report_json,
    write_trace_csv,
)
from emheat.fields import GaussianField, ModalField, ScaledField, SelfSimilarField, SumField, Term, eigenfield
from emheat.ou import eigenspace_basis, gamma_eigenvalue

PAIRS = solve_ab(0.3, 3)
AB = ProblemSpec(2, AngularPotential.aharonov_bohm(0.3))


def eig(m, k, coef=1.0):
    return eigenfield((m, k), PAIRS, 2, coef)


def test_ladder():
    np.testing.assert_allclose(ladder(1.0, 4, 2.0), [1, 0.5, 0.25, 0.125])


@pytest.mark.parametrize("m,k", [(0, 1), (1, 2), (2, 3)])
def test_H_and_D_of_eigenfield(m, k):
    g = gamma_eigenvalue(m, k, PAIRS, 2).gamma
    u = eig(m, k)
    for t in (0.01, 0.3, 2.0):
        assert compute_H(u, t) == pytest.approx(t ** (2 * g), rel=1e-12)
        assert compute_D(u, t) == pytest.approx(g * t ** (2 * g - 1), rel=1e-10)


def test_zero_and_constant_fields():
    zero = SelfSimilarField(2, PAIRS, {})
    assert compute_H(zero, 1.0) == 0.0
    assert compute_D(zero, 1.0) == 0.0
    free = solve_sphere_constant(3, 0.0, 1)
    const = ModalField(3, free, {0: (Term(1.0),)})
    assert compute_D(const, 0.7) == pytest.approx(0.0, abs=1e-14)
    assert compute_H(const, 0.7) == pytest.approx(math.sqrt(4 * math.pi), rel=1e-12)  # psi_0^2 times int G
    with pytest.raises(NumericalError):
        frequency(zero, ladder(1, 4, 2))


def test_H_of_gaussian_against_radial_quadrature():
    free = solve_sphere_constant(3, 0.0, 1)
    u = GaussianField(3, free, 1.5, "backward")
    for t in (0.2, 1.0):
        s = 1.5 - t
        f = lambda r: s**-3 * math.exp(-r * r / (2 * s)) * t**-1.5 * math.exp(-r * r / (4 * t)) * 4 * math.pi * r * r  # noqa: E731
        assert compute_H(u, t) == pytest.approx(integrate.quad(f, 0, np.inf, epsrel=1e-12)[0], rel=1e-8)


def test_scaling_identities():
    u = SumField(eig(0, 1), eig(1, 2, 0.5), eig(0, 3, -0.2j))
    for lam in (0.3, 2.0):
        ul = ScaledField(u, lam)
        for t in (0.1, 0.8):
            assert compute_H(ul, t) == pytest.approx(compute_H(u, lam**2 * t), rel=1e-10)
            assert compute_D(ul, t) == pytest.approx(lam**2 * compute_D(u, lam**2 * t), rel=1e-10)


def test_frequency_of_eigenfield():
    tr = frequency(eig(0, 1), ladder(1.0, 8, 2.0), AB)
    np.testing.assert_allclose(tr.N, 0.15, atol=1e-12)
    assert tr.gamma_fit == pytest.approx(0.15, abs=1e-12)
    assert [(md.m, md.label) for md in tr.matched_modes] == [(0, 0)]


def test_frequency_of_mixture():
    u = SumField(eig(0, 1), eig(1, 1))
    tr = frequency(u, ladder(1.0, 8, 2.0), AB)
    assert abs(tr.gamma_fit - 0.15) <= 1e-4
    assert np.all(np.diff(tr.N[::-1]) >= -1e-12)  # N(t) nondecreasing in t


def test_frequency_scale_invariance():
    u = SumField(eig(0, 1), eig(1, 2, 0.4))
    ts = np.array([0.05, 0.2, 0.7])
    base = frequency(u, ts * 0.25).N
    np.testing.assert_allclose(frequency(ScaledField(u, 0.5), ts).N, base, rtol=1e-10)


def test_richardson_limit():
    t = ladder(1.0, 3, 2.0)
    lim, delta = richardson_limit(t, 2.0 + 3 * t**1.5)
    assert lim == pytest.approx(2.0, abs=1e-12)
    assert delta == pytest.approx(1.5, abs=1e-12)
    with pytest.raises(NumericalError):
        richardson_limit([1, 0.5], [1, 2])


def test_h_vanishing_rate():
    g = gamma_eigenvalue(0, 1, PAIRS, 2).gamma
    ts = ladder(1.0, 6, 2.0)
    assert h_vanishing_rate(eig(0, 1), ts, g)["limit"] == pytest.approx(1.0, abs=1e-12)
    assert h_vanishing_rate(eig(0, 1, 2.0), ts, g)["limit"] == pytest.approx(4.0, abs=1e-12)
    assert abs(h_vanishing_rate(eig(1, 1), ts, g)["limit"]) <= 1e-6


def test_beta_of_eigenfield():
    modes = eigenspace_basis(0.15, PAIRS, 2, 4)
    res = beta_coefficients(eig(0, 1), modes, [0.1, 0.2, 0.3, 0.4, 0.5])
    assert res.betas[(0, 1)] == pytest.approx(1.0, abs=1e-8)
    assert res.spread <= 1e-8
    res3 = beta_coefficients(eig(0, 1, 3 - 1j), modes, [0.1, 0.5])
    assert res3.betas[(0, 1)] == pytest.approx(3 - 1j, abs=1e-8)


def test_beta_pattern_with_degenerate_eigenspace():
    pairs = solve_ab(0.5, 2)
    modes = eigenspace_basis(0.25, pairs, 2, 3)
    keys = [(md.m, md.k) for md in modes]
    u = eigenfield(keys[1], pairs, 2)
    res = beta_coefficients(u, modes, [0.1, 0.3, 0.5])
    assert res.betas[keys[0]] == pytest.approx(0.0, abs=1e-8)
    assert res.betas[keys[1]] == pytest.approx(1.0, abs=1e-8)


def test_beta_ignores_higher_modes_and_rotation():
    u = SumField(eig(0, 2), eig(1, 2, 5.0))
    md = gamma_eigenvalue(0, 2, PAIRS, 2)
    res = beta_coefficients(u, [md], [0.1, 0.2])
    assert res.betas[(0, 2)] == pytest.approx(1.0, abs=1e-8)
    th0 = 0.6

    class Rotated:
        N, pairs = 2, PAIRS

        def at(self, t):
            return eig(0, 2).at(t).rotated(th0)

    rot = beta_coefficients(Rotated(), [md], [0.2])
    assert rot.betas[(0, 2)] == pytest.approx(np.exp(-1j * md.label * th0), abs=1e-12)


def test_beta_rejects_mixed_eigenvalues():
    with pytest.raises(ConfigurationError):
        beta_coefficients(eig(0, 1), [gamma_eigenvalue(0, 1, PAIRS, 2), gamma_eigenvalue(0, 2, PAIRS, 2)], [0.1])


def test_blowup_distance():
    lams = [0.4, 0.2, 0.1, 0.05]
    exact = blowup_distance(eig(0, 1), 0.15, {(0, 1): 1.0}, lams)
    assert np.max(exact[:, 1:]) <= 1e-14
    pert = blowup_distance(SumField(eig(0, 1), eig(1, 1)), 0.15, {(0, 1): 1.0}, lams)
    slope = np.polyfit(np.log(pert[:, 0]), np.log(pert[:, 1]), 1)[0]
    assert slope == pytest.approx(2.0, abs=1e-6)  # lam^{2 (gamma' - gamma)} with gamma' - gamma = 1
    bad = blowup_distance(eig(0, 1), 0.15, {(0, 1): 0.0}, lams)
    assert np.min(bad[:, 1]) > 0.1


def test_monotonicity():
    g = gamma_eigenvalue(0, 1, PAIRS, 2).gamma
    ts = np.sort(ladder(1.0, 8, 2.0))
    assert monotone_H_check(eig(0, 1), ts, -2 * g, AB)
    free = solve_sphere_constant(3, 0.0, 1)
    assert monotone_H_check(GaussianField(3, free, 2.0, "backward"), ts, 0.0)
    fake = np.column_stack([ts, np.linspace(2, 1, len(ts))])
    res = monotone_H_check(fake, None, 0.0)
    assert not res and res.step == 0
    with pytest.raises(ConfigurationError):
        monotone_H_check(eig(0, 1), ts[::-1], 0.0)


def test_monotone_frequency_of_gaussian():
    free = solve_sphere_constant(3, 0.0, 1)
    tr = frequency(GaussianField(3, free, 2.0, "backward"), np.linspace(0.1, 1.5, 15))
    assert np.all(np.diff(tr.N) >= -1e-12)


def test_derivative_identity():
    u = SumField(eig(0, 1), eig(1, 2, 0.5), eig(2, 1, 0.1j))
    for t in (0.2, 1.0):
        assert derivative_identity(u, t, rel_step=1e-3) < 1e-5


def test_perturbed_D_includes_h():
    from emheat import StaticPerturbation

    pert = ProblemSpec(2, AngularPotential.aharonov_bohm(0.3), StaticPerturbation(0.5, 0.0, 1.0))
    u = eig(0, 1)
    assert compute_D(u, 1.0, pert) == pytest.approx(compute_D(u, 1.0) - 0.5 * compute_H(u, 1.0), rel=1e-12)


def test_report_files(tmp_path):
    tr = frequency(eig(0, 1), ladder(1.0, 4, 2.0), AB)
    write_trace_csv(tr, tmp_path / "tr.csv", ["x"])
    assert len((tmp_path / "tr.csv").read_text().splitlines()) == 6
    modes = eigenspace_basis(0.15, PAIRS, 2, 4)
    rep = blowup_report(tr, beta_coefficients(eig(0, 1), modes, [0.1, 0.2]))
    write_report_json(rep, tmp_path / "r.json")
    assert '"gamma_fit"' in (tmp_path / "r.json").read_text()
