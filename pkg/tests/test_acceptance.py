"""Acceptance gate: one test per criterion, each logging a pass/fail line.

The lines are collected into an "acceptance criteria" section at the end
of the pytest report.
"""

import math
import time

import numpy as np
import pytest

from emheat import AngularPotential, ProblemSpec, solve_ab, solve_fourier, solve_sphere_constant
from emheat.almgren import beta_coefficients, compute_D, compute_H, frequency, ladder
from emheat.fields import GaussianField, ScaledField, SumField, eigenfield, ut_field, vt_field
from emheat.heat_kernel import KernelConfig, kernel_K
from emheat.inequalities import SUITE_CONFIGS, best_constant_probe, config_problem, run_suite
from emheat.ou import eigen_residual, eigenspace_basis, gamma_eigenvalue, inner_product_L, norm_V_quadrature
from emheat.reference import coefficient_decay, compare_with_spectral

AB = ProblemSpec(2, AngularPotential.aharonov_bohm(0.3))
AB_PAIRS = solve_ab(0.3, 4)


def _mixtures(pairs, N):
    e = lambda m, k, c=1.0: eigenfield((m, k), pairs, N, c)  # noqa: E731
    return [e(0, 1), e(1, 2), SumField(e(0, 1), e(1, 1)), SumField(e(0, 2), e(1, 1, 0.5j)),
            SumField(e(0, 1), e(1, 2, 0.5), e(0, 3, -0.2j)), SumField(e(2, 1), e(0, 3, 2.0))]


def test_c01_spectrum_exactness(acceptance):
    t0 = time.perf_counter()
    worst_exact = worst_fourier = 0.0
    for phi in (0.1, 0.3, 0.5):
        pairs = solve_ab(phi, 5)
        assert sorted(p.label for p in pairs) == list(range(-5, 6))
        for k, p in enumerate(pairs, 1):
            for m in range(6):
                g = gamma_eigenvalue(m, k, pairs, 2).gamma
                worst_exact = max(worst_exact, abs(g - (m + abs(p.label - phi) / 2)))
        galerkin = solve_fourier(AngularPotential.constant_fourier(A=-phi), 40, len(pairs))
        g_exp = sorted(gamma_eigenvalue(m, k, pairs, 2).gamma for k in range(1, 12) for m in range(6))
        g_gal = sorted(gamma_eigenvalue(m, k, galerkin, 2).gamma for k in range(1, 12) for m in range(6))
        worst_fourier = max(worst_fourier, float(np.max(np.abs(np.subtract(g_exp, g_gal)))))
    dt = time.perf_counter() - t0
    ok = worst_exact <= 1e-12 and worst_fourier <= 1e-10 and dt < 1.0
    acceptance(1, "spectrum exactness", ok, f"explicit {worst_exact:.1e}, fourier {worst_fourier:.1e}, {dt:.2f}s")
    assert ok


def test_c02_orthonormality(acceptance):
    t0 = time.perf_counter()
    pairs = AB_PAIRS[:4]
    fields = [vt_field(gamma_eigenvalue(m, k, pairs, 2), pairs) for k in range(1, 5) for m in range(5)]
    G = np.array([[inner_product_L(f, g) for g in fields] for f in fields])
    gram_err = float(np.max(np.abs(G - np.eye(len(fields)))))
    norm_err = 0.0
    for pairs, N in [(AB_PAIRS, 2), (solve_sphere_constant(3, 0.1, 4), 3)]:
        for k in range(1, 5):
            for m in range(5):
                md = gamma_eigenvalue(m, k, pairs, N)
                norm_err = max(norm_err, abs(norm_V_quadrature(md) / md.norm2 - 1))
    dt = time.perf_counter() - t0
    ok = gram_err <= 1e-8 and norm_err <= 1e-8 and dt < 10
    acceptance(2, "eigenbasis orthonormality", ok, f"gram {gram_err:.1e}, norms {norm_err:.1e}, {dt:.2f}s")
    assert ok


def test_c03_eigen_residual(acceptance):
    t0 = time.perf_counter()
    r = np.linspace(0.1, 10.0, 400)
    worst = 0.0
    for pairs, N in [(solve_ab(0.3, 4), 2), (solve_ab(0.5, 4), 2), (solve_sphere_constant(3, 0.1, 9), 3),
                     (solve_sphere_constant(4, 0.0, 5), 4)]:
        for k in range(1, len(pairs) + 1):
            for m in range(6):
                worst = max(worst, float(np.max(eigen_residual(gamma_eigenvalue(m, k, pairs, N), r))))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-9 and dt < 5
    acceptance(3, "eigen-residual", ok, f"max relative residual {worst:.1e}, {dt:.2f}s")
    assert ok


def _ball(rng, n, R):
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    return v * (R * rng.random(n) ** (1 / 3))[:, None]


def test_c04_kernel_free_reduction(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    x, y = _ball(rng, 200, 6.0), _ball(rng, 200, 6.0)
    pairs = solve_sphere_constant(3, 0.0, 40)
    K = kernel_K(x, y, pairs, 3, KernelConfig(k_max=40))
    exact = (4 * math.pi) ** -1.5 * np.exp(-np.sum((x - y) ** 2, axis=1) / 4)
    err = float(np.max(np.abs(K - exact)))
    dt = time.perf_counter() - t0
    ok = err <= 1e-8 and dt < 30
    acceptance(4, "kernel free-case reduction", ok, f"max error {err:.1e} over 200 pairs, {dt:.2f}s")
    assert ok


def test_c05_representation_vs_oracle(acceptance):
    t0 = time.perf_counter()
    ts = [0.25, 0.5, 1.0]
    eig = compare_with_spectral(AB, ut_field(gamma_eigenvalue(0, 1, AB_PAIRS, 2), AB_PAIRS), ts, pairs=AB_PAIRS)
    kpairs = solve_ab(0.3, 80)
    gauss = GaussianField(2, kpairs, 1.0, amp=1.0).at(0.0)
    ker = compare_with_spectral(AB, gauss, ts, method="kernel", pairs=kpairs, kernel_config=KernelConfig(k_max=len(kpairs)))
    worst = max(eig.rel_error + ker.rel_error)
    dt = time.perf_counter() - t0
    ok = worst <= 1e-3 and dt < 120
    acceptance(5, "representation vs CN oracle", ok,
               f"eigen {max(eig.rel_error):.1e}, gaussian/kernel {max(ker.rel_error):.1e}, {dt:.1f}s")
    assert ok


def test_c06_coefficient_decay(acceptance):
    t0 = time.perf_counter()
    devs = []
    for m, k in [(0, 1), (1, 2), (0, 3)]:
        res = coefficient_decay(AB, m, k, [0.25, 0.5, 1.0], pairs=AB_PAIRS)
        devs.append(abs(res["fitted_exponent"] - res["gamma_tilde"]))
    dt = time.perf_counter() - t0
    ok = max(devs) <= 1e-2 and dt < 60
    acceptance(6, "coefficient decay", ok, f"exponent deviations {', '.join(f'{d:.1e}' for d in devs)}, {dt:.1f}s")
    assert ok


def test_c07_frequency_limit(acceptance):
    t0 = time.perf_counter()
    ts = ladder(1.0, 8, 2.0)
    pure_dev = 0.0
    for pairs, N, problem in [(AB_PAIRS, 2, AB), (solve_sphere_constant(3, 0.1, 4), 3, None)]:
        for m, k in [(0, 1), (1, 1), (0, 2), (2, 3)]:
            g = gamma_eigenvalue(m, k, pairs, N).gamma
            tr = frequency(eigenfield((m, k), pairs, N), ts, problem)
            pure_dev = max(pure_dev, float(np.max(np.abs(tr.N - g))), abs(tr.gamma_fit - g))
    mix_dev = 0.0
    e = lambda m, k, c=1.0: eigenfield((m, k), AB_PAIRS, 2, c)  # noqa: E731
    # gaps of at least one between the two eigenvalues; smaller gaps need a finer ladder
    for u, g in [(SumField(e(0, 1), e(1, 1)), 0.15), (SumField(e(0, 2), e(1, 2, 0.5j)), 0.35),
                 (SumField(e(0, 3, 3.0), e(2, 1)), 0.65)]:
        mix_dev = max(mix_dev, abs(frequency(u, ts, AB).gamma_fit - g))
    dt = time.perf_counter() - t0
    ok = pure_dev <= 1e-6 and mix_dev <= 1e-4 and dt < 60
    acceptance(7, "frequency limit", ok, f"pure {pure_dev:.1e}, mixtures {mix_dev:.1e}, {dt:.2f}s")
    assert ok


def test_c08_beta_coefficients(acceptance):
    t0 = time.perf_counter()
    lams = [0.1, 0.2, 0.3, 0.4, 0.5]
    spread = pattern = 0.0
    # nondegenerate level
    modes = eigenspace_basis(0.15, AB_PAIRS, 2, 4)
    for c in (1.0, 3 - 1j):
        res = beta_coefficients(eigenfield((0, 1), AB_PAIRS, 2, c), modes, lams, AB)
        spread = max(spread, res.spread)
        pattern = max(pattern, abs(res.betas[(0, 1)] / c - 1))
    # a higher mode in the field does not change the blow-up coefficients
    mixed = SumField(eigenfield((0, 1), AB_PAIRS, 2), eigenfield((1, 2), AB_PAIRS, 2, 0.5))
    res = beta_coefficients(mixed, modes, lams, AB)
    spread = max(spread, res.spread)
    # degenerate level: 1/0 pattern
    pairs = solve_ab(0.5, 2)
    modes = eigenspace_basis(0.25, pairs, 2, 3)
    keys = [(md.m, md.k) for md in modes]
    for j, key in enumerate(keys):
        res = beta_coefficients(eigenfield(key, pairs, 2), modes, lams)
        spread = max(spread, res.spread)
        for i, other in enumerate(keys):
            pattern = max(pattern, abs(res.betas[other] - (1.0 if i == j else 0.0)))
    dt = time.perf_counter() - t0
    ok = spread <= 1e-6 and pattern <= 1e-8 and dt < 30
    acceptance(8, "beta-coefficient formula", ok, f"spread {spread:.1e}, pattern {pattern:.1e}, {dt:.2f}s")
    assert ok


def test_c09_scaling_identities(acceptance):
    t0 = time.perf_counter()
    worst = 0.0
    for u in _mixtures(AB_PAIRS, 2)[2:]:
        for lam in (0.3, 0.7, 2.0):
            ul = ScaledField(u, lam)
            for t in (0.05, 0.4, 1.3):
                worst = max(worst, abs(compute_H(ul, t) / compute_H(u, lam**2 * t) - 1))
            ts = np.array([0.05, 0.4, 1.3])
            n_l = frequency(ul, ts, AB).N
            n_0 = frequency(u, lam**2 * ts, AB).N
            worst = max(worst, float(np.max(np.abs(n_l / n_0 - 1))))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-10 and dt < 10
    acceptance(9, "scaling identities", ok, f"max relative deviation {worst:.1e}, {dt:.2f}s")
    assert ok


def test_c10_inequality_suite(acceptance):
    t0 = time.perf_counter()
    worst = {}
    for name in sorted(SUITE_CONFIGS):
        rep = run_suite(config_problem(name), n_fields=1000, t_values=(0.25, 1.0, 4.0), seed=11, name=name)
        worst[name] = min(rep.worst.values())
    _, quot, mu1 = best_constant_probe(0.3)
    excess = quot[-1] / mu1 - 1
    dt = time.perf_counter() - t0
    ok = min(worst.values()) >= -1e-10 and 0 <= excess <= 0.05 and dt < 120
    acceptance(10, "inequality suite", ok,
               f"worst margin {min(worst.values()):.1e}, best-constant excess {excess:.3f}, {dt:.1f}s")
    assert ok


def test_c11_monotonicity(acceptance):
    t0 = time.perf_counter()
    ts = np.linspace(0.01, 4.0, 40)
    worst = 0.0
    cases = [(u, AB) for u in _mixtures(AB_PAIRS, 2)]
    pairs3 = solve_sphere_constant(3, 0.1, 4)
    cases += [(u, None) for u in _mixtures(pairs3, 3)]
    free = solve_sphere_constant(3, 0.0, 1)
    cases.append((GaussianField(3, free, 5.0, "backward"), None))
    for u, problem in cases:
        n = frequency(u, ts, problem).N
        worst = max(worst, float(np.max(-np.diff(n))))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-8 and dt < 30
    acceptance(11, "frequency monotonicity", ok, f"largest per-step drop {worst:.1e} over {len(cases)} fields, {dt:.2f}s")
    assert ok
