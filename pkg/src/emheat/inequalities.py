"""Weighted Hardy, moment, Sobolev and diamagnetic inequalities on random test fields.

Test fields are finite sums ``sum_j c_j r^{p_j} exp(-q_j r^2) psi_{k_j}``.
Every weighted integral of such a field against ``G(x,t)`` reduces to the
moments ``int_0^inf r^P exp(-c r^2) dr = Gamma((P+1)/2) / (2 c^{(P+1)/2})``
times angular Gram matrices, so the quadratic inequalities are checked in
closed form. The Sobolev and diamagnetic checks need pointwise values and use
Gauss-Laguerre radii times an angular rule.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import gammaln

from .angular import angular_spectrum, fourier_matrix, psi_gradient, psi_values
from .fields import ModalField, Term, angular_rule
from .problem import ConfigurationError, HardyConditionError, ProblemSpec
from .quadrature import RadialQuadrature


def radial_moment(P, c):
    """``int_0^inf r^P exp(-c r^2) dr`` for ``P > -1``, ``c > 0``."""
    P = np.asarray(P, dtype=float)
    c = np.asarray(c, dtype=float)
    a = (P + 1) / 2
    return 0.5 * np.exp(gammaln(a) - a * np.log(c))


@dataclass(frozen=True)
class AngularForms:
    """Gram matrices of the angular forms in the eigenbasis.

    ``kinetic[i, j] = <grad_S psi_i, grad_S psi_j>``,
    ``magnetic[i, j] = <(grad_S + iA) psi_i, (grad_S + iA) psi_j>`` and
    ``mu`` the eigenvalues, so that ``magnetic - diag(mu)`` is the Gram
    matrix of ``a``.
    """

    kinetic: np.ndarray
    magnetic: np.ndarray
    mu: np.ndarray

    @property
    def a_form(self):
        return self.magnetic - np.diag(self.mu)


def angular_forms(pairs, potential=None) -> AngularForms:
    mu = np.array([p.mu for p in pairs])
    p0 = pairs[0]
    if p0.basis == "sphere" or all(p.is_pure_fourier for p in pairs):
        return AngularForms(np.diag([p.kinetic for p in pairs]).astype(complex),
                            np.diag([p.magnetic for p in pairs]).astype(complex), mu)
    if potential is None:
        raise ConfigurationError("mixed Fourier eigenvectors need the potential to build the magnetic form")
    L = (len(p0.psi) - 1) // 2
    Psi = np.stack([p.psi for p in pairs], axis=1)
    n = np.arange(-L, L + 1)
    K = Psi.conj().T @ (n[:, None] ** 2 * Psi)
    M = Psi.conj().T @ fourier_matrix(potential, L, include_a=False) @ Psi
    return AngularForms(K, M, mu)


class TestField:
    """``sum_j coef_j r^{p_j} exp(-q_j r^2) psi_{k_j}(theta)`` with 0-based angular indices ``k_j``."""

    __test__ = False  # not a pytest class

    def __init__(self, N: int, pairs, coef, p, q, k, description: str = ""):
        self.N, self.pairs = N, tuple(pairs)
        self.coef = np.atleast_1d(np.asarray(coef, dtype=complex))
        self.p = np.atleast_1d(np.asarray(p, dtype=float))
        self.q = np.atleast_1d(np.asarray(q, dtype=float))
        self.k = np.atleast_1d(np.asarray(k, dtype=int))
        self.description = description
        if not (len(self.coef) == len(self.p) == len(self.q) == len(self.k)):
            raise ConfigurationError("term arrays must have equal length")
        if np.any(self.p <= 1 - N / 2):
            raise ConfigurationError(f"exponents must exceed {1 - N / 2} for |u|^2/|x|^2 to be integrable")
        if np.any(self.q < 0):
            raise ConfigurationError("Gaussian rates must be >= 0")
        if np.any(self.k < 0) or np.any(self.k >= len(self.pairs)):
            raise ConfigurationError("angular index out of range")

    def __len__(self):
        return len(self.coef)

    def scaled(self, c) -> "TestField":
        return TestField(self.N, self.pairs, self.coef * c, self.p, self.q, self.k, self.description)

    def dilated(self, lam: float) -> "TestField":
        """The field ``x -> u(lam x)``."""
        return TestField(self.N, self.pairs, self.coef * lam**self.p, self.p, self.q * lam**2, self.k, self.description)

    def to_modal(self) -> ModalField:
        modes: dict = {}
        for c, p, q, k in zip(self.coef, self.p, self.q, self.k):
            modes.setdefault(int(k), []).append(Term(c, p, q))
        return ModalField(self.N, self.pairs, {k: tuple(v) for k, v in modes.items()})

    def radial(self, r):
        """Per-term radial factors and their derivatives, shape ``(n_terms, len(r))``."""
        r = np.asarray(r, dtype=float)[None, :]
        p, q = self.p[:, None], self.q[:, None]
        f = self.coef[:, None] * r**p * np.exp(-q * r * r)
        return f, f * (p / r - 2 * q * r)

    def __call__(self, x):
        return self.to_modal()(x)


def _gram(field: TestField, t: float):
    ci = np.conj(field.coef)[:, None] * field.coef[None, :]
    E = field.p[:, None] + field.p[None, :]
    c = field.q[:, None] + field.q[None, :] + 1.0 / (4 * t)
    same = (field.k[:, None] == field.k[None, :]).astype(float)
    return ci, E, c, same


@dataclass(frozen=True)
class WeightedNorms:
    """Integrals against ``G(x,t)``: ``mass = |u|^2``, ``grad = |grad u|^2``,
    ``inv_r2 = |u|^2/|x|^2``, ``grad_A = |grad_A u|^2``, ``a_form = a|u|^2/|x|^2``, ``x2 = |x|^2|u|^2``."""

    mass: float
    grad: float
    inv_r2: float
    grad_A: float
    a_form: float
    x2: float

    def as_tuple(self):
        return self.mass, self.grad, self.inv_r2, self.grad_A

    def hilbert(self, t: float) -> float:
        """Squared norm ``int (t|grad u|^2 + |u|^2 + t|u|^2/|x|^2) G``."""
        return t * self.grad + self.mass + t * self.inv_r2


def weighted_norms(field: TestField, t: float, forms: AngularForms | None = None) -> WeightedNorms:
    if t <= 0:
        raise ConfigurationError("t must be positive")
    N = field.N
    forms = forms or angular_forms(field.pairs)
    if len(field) == 0:
        return WeightedNorms(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    ci, E, c, same = _gram(field, t)
    pi, pj = field.p[:, None], field.p[None, :]
    qi, qj = field.q[:, None], field.q[None, :]
    I = lambda P: radial_moment(P, c)  # noqa: E731
    Im2 = I(E + N - 3)
    I0 = I(E + N - 1)
    I2 = I(E + N + 1)
    # the r^{E+N-3} moment of p_i p_j diverges only when p_i p_j = 0
    pp = pi * pj
    rad_core = np.where(pp == 0, 0.0, pp * np.where(pp == 0, 1.0, Im2)) - 2 * (pi * qj + qi * pj) * I0 + 4 * qi * qj * I2
    w = t ** (-N / 2)
    kk = np.ix_(field.k, field.k)

    def total(mat):
        return float(np.real(np.sum(ci * mat)) * w)

    rad = total(same * rad_core)
    return WeightedNorms(
        mass=total(same * I0),
        grad=rad + total(forms.kinetic[kk] * Im2),
        inv_r2=total(same * Im2),
        grad_A=rad + total(forms.magnetic[kk] * Im2),
        a_form=total(forms.a_form[kk] * Im2),
        x2=total(same * I2),
    )


def check_hardy_parabolic(field: TestField, t: float, nm: WeightedNorms | None = None) -> float:
    N = field.N
    if N < 3:
        raise ConfigurationError("the parabolic Hardy inequality needs N >= 3")
    nm = nm or weighted_norms(field, t)
    return nm.mass / ((N - 2) * t) + 4 / (N - 2) ** 2 * nm.grad - nm.inv_r2


def check_hardy_magnetic(field: TestField, t: float, problem: ProblemSpec | None = None,
                         forms: AngularForms | None = None, nm: WeightedNorms | None = None) -> float:
    N = field.N
    forms = forms or angular_forms(field.pairs, problem.potential if problem else None)
    mu1 = float(np.min(forms.mu))
    margin_h = mu1 + (N - 2) ** 2 / 4
    if margin_h <= 0:
        raise HardyConditionError(margin_h)
    nm = nm or weighted_norms(field, t, forms)
    return nm.grad_A - nm.a_form + (N - 2) / (4 * t) * nm.mass - margin_h * nm.inv_r2


def check_moment_bound(field: TestField, t: float, forms: AngularForms | None = None,
                       nm: WeightedNorms | None = None) -> float:
    nm = nm or weighted_norms(field, t, forms)
    return nm.grad_A + field.N / (4 * t) * nm.mass - nm.x2 / (16 * t * t)


class _AngularNodes:
    """Angular rule with cached eigenfunction values and tangential derivatives."""

    def __init__(self, pairs, N: int, n_angle: int, tangential_A=None):
        self.N = N
        self.ang, self.w = angular_rule(N, n_angle)
        self.psi = np.stack([psi_values(p, self.ang) for p in pairs])  # (K, n_ang)
        g = np.stack([psi_gradient(p, self.ang) for p in pairs])
        # (K, components, n_ang)
        self.dpsi = g[:, None, :] if N == 2 else np.moveaxis(g, -1, 1)
        self.A = np.zeros(len(self.ang)) if tangential_A is None else tangential_A(self.ang)


def _tangential_A(potential):
    """Tangential component ``A(theta)`` for circle potentials (AB as ``-phi``)."""
    if potential is None:
        return None
    if potential.kind == "aharonov_bohm":
        return lambda th: np.full_like(th, -potential.phi)
    if potential.kind == "fourier":
        L = (len(potential.A_coeffs) - 1) // 2
        n = np.arange(-L, L + 1)
        return lambda th: np.real(np.exp(1j * np.asarray(th)[..., None] * n) @ potential.A_coeffs)
    return None


def _pointwise(field: TestField, r, nodes: _AngularNodes, with_grad: bool = True):
    """Values ``u`` and components of ``grad_A u`` on ``r x angles``."""
    f, df = field.radial(r)
    psi = nodes.psi[field.k]  # (J, n_ang)
    u = f.T @ psi  # (n_r, n_ang)
    if not with_grad:
        return u, None
    dpsi = nodes.dpsi[field.k]  # (J, comps, n_ang)
    ur = df.T @ psi
    tang = np.einsum("jr,jca->rca", f, dpsi) / np.asarray(r)[:, None, None]
    if field.N == 2:
        tang = tang + 1j * nodes.A[None, None, :] * u[:, None, :] / np.asarray(r)[:, None, None]
    comps = np.concatenate([ur[:, None, :], tang], axis=1)
    return u, comps


def check_diamagnetic(field: TestField, t: float, nodes: _AngularNodes, quad: RadialQuadrature | None = None) -> float:
    """``int |grad_A u|^2 G - int |grad |u||^2 G`` on the same nodes."""
    quad = quad or RadialQuadrature(48, check=False)
    power = float(2 * np.min(field.p) - 2)
    r, wr = quad.nodes(field.N, t, power=power)
    u, comps = _pointwise(field, r, nodes)
    au = np.abs(u)
    safe = np.where(au > 0, au, 1.0)
    g_abs = np.where(au[:, None, :] > 0, np.real(np.conj(u)[:, None, :] * comps) / safe[:, None, :], 0.0)
    lhs = np.sum(np.abs(comps) ** 2, axis=1)
    rhs = np.sum(g_abs**2, axis=1)
    W = (wr * r ** (-power))[:, None] * nodes.w[None, :]
    return float(np.sum(W * (lhs - rhs)))


@dataclass
class SobolevResult:
    ratio: float  # (int |u|^s G^{s/2})^{2/s} / ||u||^2_H
    constant_estimate: float  # ratio * t^{(N/s)(s-2)/2}
    fitted_exponent: float
    expected_exponent: float

    @property
    def margin(self) -> float:
        return -abs(self.fitted_exponent - self.expected_exponent)


def _sobolev_ratio(field: TestField, s: float, t: float, nodes, quad):
    N = field.N
    power = float(s * np.min(field.p))
    r, wr = quad.nodes(N, t, power=power, rate=s / 2)
    u, _ = _pointwise(field, r, nodes, with_grad=False)
    W = (wr * r ** (-power))[:, None] * nodes.w[None, :]
    lhs = (t ** (N / 2 - N * s / 4) * np.sum(W * np.abs(u) ** s)) ** (2 / s)
    h = weighted_norms(field, t).hilbert(t)
    return lhs, h


def check_weighted_sobolev(field: TestField, s: float, t: float, nodes: _AngularNodes | None = None,
                           quad: RadialQuadrature | None = None) -> SobolevResult:
    """Empirical Sobolev quotient and its ``t``-scaling exponent from ``t`` and ``t/4``."""
    N = field.N
    if s < 2 or (N >= 3 and s > 2 * N / (N - 2)):
        raise ConfigurationError(f"s={s} outside the admissible range for N={N}")
    nodes = nodes or _AngularNodes(field.pairs, N, 32)
    quad = quad or RadialQuadrature(48, check=False)
    expected = (N / s) * (s - 2) / 2
    lhs, h = _sobolev_ratio(field, s, t, nodes, quad)
    if h == 0:
        return SobolevResult(0.0, 0.0, expected, expected)
    # same profile one scale down: u_{t/4}(x) = u_t(2x)
    lhs4, h4 = _sobolev_ratio(field.dilated(2.0), s, t / 4, nodes, quad)
    fitted = math.log((lhs4 / h4) / (lhs / h)) / math.log(4.0)
    return SobolevResult(lhs / h, lhs / h * t**expected, fitted, expected)


def random_field(N: int, pairs, rng: np.random.Generator, t: float = 1.0, n_modes: int | None = None,
                 max_terms: int = 3) -> TestField:
    """Random mixture of up to ``max_terms`` Gaussian bumps on the lowest angular modes."""
    K = min(n_modes or 5, len(pairs))
    J = int(rng.integers(1, max_terms + 1))
    p = rng.uniform(1 - N / 2 + 0.02, 3.0, J)
    q = np.exp(rng.uniform(math.log(1e-2), math.log(10.0), J)) / t
    k = rng.integers(0, K, J)
    c = rng.normal(size=J) + 1j * rng.normal(size=J)
    return TestField(N, pairs, c, p, q, k, "random")


@dataclass
class SuiteReport:
    config: str
    n_fields: int
    t_values: list
    worst: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def passed(self, tol: float = 1e-10) -> bool:
        return all(v >= -tol for v in self.worst.values())


SUITE_CONFIGS = {
    "N2_AB_0.1": (2, ("aharonov_bohm", 0.1)),
    "N2_AB_0.3": (2, ("aharonov_bohm", 0.3)),
    "N2_AB_0.5": (2, ("aharonov_bohm", 0.5)),
    "N3_free": (3, ("sphere_constant", 0.0)),
    "N3_a0.1": (3, ("sphere_constant", 0.1)),
}


def config_problem(name: str) -> ProblemSpec:
    from .problem import AngularPotential

    N, (kind, val) = SUITE_CONFIGS[name]
    pot = AngularPotential.aharonov_bohm(val) if kind == "aharonov_bohm" else AngularPotential.sphere_constant(val)
    return ProblemSpec(N, pot)


def run_suite(problem: ProblemSpec, n_fields: int = 1000, t_values=(0.25, 1.0, 4.0), seed: int = 0,
              name: str = "", k_max: int = 4, n_angle: int | None = None, sobolev_s=None) -> SuiteReport:
    """Worst margins of every applicable inequality over ``n_fields`` random fields per ``t``.

    Fields are normalized to unit ``H_t`` norm, so margins are relative.
    """
    N = problem.N
    pairs = angular_spectrum(problem, k_max)
    forms = angular_forms(pairs, problem.potential)
    n_angle = n_angle or (32 if N == 2 else 16)
    nodes = _AngularNodes(pairs, N, n_angle, _tangential_A(problem.potential) if N == 2 else None)
    quad = RadialQuadrature(48, check=False)
    s = sobolev_s or (4.0 if N == 2 else 2 * N / (N - 2))
    rng = np.random.default_rng(seed)
    names = ["hardy_magnetic", "moment", "diamagnetic", "sobolev_scaling"] + (["hardy_parabolic"] if N >= 3 else [])
    worst = {n: math.inf for n in names}
    c_max = 0.0
    for t in t_values:
        for _ in range(n_fields):
            f = random_field(N, pairs, rng, t, n_modes=len(pairs))
            nm = weighted_norms(f, t, forms)
            f = f.scaled(1 / math.sqrt(nm.hilbert(t)))
            nm = weighted_norms(f, t, forms)
            vals = {
                "hardy_magnetic": check_hardy_magnetic(f, t, forms=forms, nm=nm),
                "moment": check_moment_bound(f, t, nm=nm),
                "diamagnetic": check_diamagnetic(f, t, nodes, quad),
            }
            sob = check_weighted_sobolev(f, s, t, nodes, quad)
            vals["sobolev_scaling"] = sob.margin
            c_max = max(c_max, sob.constant_estimate)
            if N >= 3:
                vals["hardy_parabolic"] = check_hardy_parabolic(f, t, nm=nm)
            for key, v in vals.items():
                worst[key] = min(worst[key], float(v))
    return SuiteReport(name or problem.potential.kind, n_fields, list(t_values), worst,
                       {"sobolev_s": s, "sobolev_constant_lower_estimate": c_max})


def best_constant_probe(phi: float, t: float = 1.0, p_values=(0.2, 0.1, 0.05, 0.02, 0.01), q: float = 0.0):
    """Quotients ``||grad_A u||^2 / ||u/|x|||^2`` along ``r^p exp(-q r^2) psi_lowest`` as ``p -> 0``.

    Returns ``(p_values, quotients, min_n (n - phi)^2)``; N=2, AB potential, no ``a``.
    """
    from .problem import AngularPotential

    prob = ProblemSpec(2, AngularPotential.aharonov_bohm(phi))
    pairs = angular_spectrum(prob, 2)
    forms = angular_forms(pairs)
    quot = []
    for p in p_values:
        nm = weighted_norms(TestField(2, pairs, 1.0, p, q, 0), t, forms)
        quot.append(nm.grad_A / nm.inv_r2)
    return np.asarray(p_values, float), np.asarray(quot), float(pairs[0].mu)


def hardy_sharpness_probe(eps_values=(0.2, 0.1, 0.05, 0.02), t: float = 1.0):
    """Relative parabolic Hardy margin along ``r^{-1/2+eps} exp(-r^2/8)`` in N=3."""
    from .problem import AngularPotential

    pairs = angular_spectrum(ProblemSpec(3, AngularPotential.sphere_constant(0.0)), 1)
    rel = []
    for e in eps_values:
        f = TestField(3, pairs, 1.0, -0.5 + e, 1 / (8 * t), 0)
        nm = weighted_norms(f, t)
        rel.append(check_hardy_parabolic(f, t, nm) / nm.inv_r2)
    return np.asarray(eps_values, float), np.asarray(rel)


def write_report_json(path, reports, probe=None) -> None:
    out = {"suites": [asdict(r) | {"passed": r.passed()} for r in reports]}
    if probe is not None:
        out["best_constant_probe"] = probe
    with open(path, "w") as fh:
        json.dump(out, fh, indent=2, sort_keys=True)
