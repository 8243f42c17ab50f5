"""Explicit spectrum of the Ornstein-Uhlenbeck operator with singular angular potential.

Eigenvalues are ``gamma_{m,k} = m - alpha_k/2`` with eigenfunctions

    V_{m,k}(x) = |x|^{-alpha_k} P_{k,m}(|x|^2/4) psi_k(x/|x|),

where ``P_{k,m}`` is a normalized generalized Laguerre polynomial of order
``beta_k``. ``Vt`` (``V`` tilde) denotes ``V / ||V||`` in the Gaussian space
with weight ``exp(-|x|^2/4)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from .angular import AngularEigenpair
from .problem import ConfigurationError, HardyConditionError
from .quadrature import DEFAULT_QUAD, RadialQuadrature

TAU_ANALYTIC = 1e-9
TAU_FOURIER = 1e-6


def exponents(mu: float, N: int) -> tuple[float, float]:
    """``(alpha, beta)`` with ``beta = sqrt(((N-2)/2)^2 + mu)`` and ``alpha = (N-2)/2 - beta``."""
    half = (N - 2) / 2.0
    rad = half * half + mu
    if rad < 0:
        raise HardyConditionError(rad)
    beta = math.sqrt(rad)
    return half - beta, beta


def radial_poly_coeffs(m: int, beta: float) -> np.ndarray:
    """Coefficients ``c_i`` of ``P(t) = sum_i (-m)_i / (1+beta)_i t^i / i!`` (ascending powers)."""
    if m < 0:
        raise ConfigurationError("m must be >= 0")
    i = np.arange(m + 1)
    logmag = gammaln(m + 1) - gammaln(m - i + 1) - gammaln(1 + beta + i) + gammaln(1 + beta) - gammaln(i + 1)
    return np.where(i % 2 == 0, 1.0, -1.0) * np.exp(logmag)


def radial_poly_eval(m: int, beta: float, s):
    """``P_m(s) = L_m^beta(s) / binom(m+beta, m)`` by the three-term recurrence."""
    s = np.asarray(s, dtype=float)
    prev = np.zeros_like(s)
    cur = np.ones_like(s)
    for j in range(m):
        prev, cur = cur, ((2 * j + 1 + beta - s) * cur - j * prev) / (j + 1 + beta)
    return cur


def radial_poly_deriv(m: int, beta: float, s):
    """``dP_m/ds = -(m/(beta+1)) P_{m-1}^{(beta+1)}(s)``."""
    if m == 0:
        return np.zeros_like(np.asarray(s, dtype=float))
    return -(m / (beta + 1.0)) * radial_poly_eval(m - 1, beta + 1.0, s)


def log_binom(m: int, beta: float) -> float:
    return float(gammaln(m + beta + 1) - gammaln(beta + 1) - gammaln(m + 1))


def norm2_closed_form(m: int, beta: float) -> float:
    """``||V_{m,k}||^2 = 2^{1+2 beta} Gamma(1+beta) / binom(m+beta, m)``."""
    if beta <= -1:
        raise ConfigurationError("beta must exceed -1")
    return float(np.exp((1 + 2 * beta) * math.log(2.0) + gammaln(1 + beta) - log_binom(m, beta)))


@dataclass(frozen=True)
class SpectralMode:
    """Mode ``(m, k)``; ``k`` is 1-based into the angular eigenpair list."""

    m: int
    k: int
    N: int
    pair: AngularEigenpair = field(repr=False, compare=False)
    alpha: float
    beta: float
    gamma: float
    gamma_tilde: float
    radial_poly: np.ndarray = field(repr=False, compare=False)

    @property
    def label(self) -> int:
        return self.pair.label

    @property
    def mu(self) -> float:
        return self.pair.mu

    @property
    def norm2(self) -> float:
        return norm2_closed_form(self.m, self.beta)

    def P(self, s):
        return radial_poly_eval(self.m, self.beta, s)

    def dP(self, s):
        return radial_poly_deriv(self.m, self.beta, s)

    def radial(self, r):
        """Radial factor ``r^{-alpha} P(r^2/4)`` of ``V``."""
        r = np.asarray(r, dtype=float)
        return r ** (-self.alpha) * self.P(r * r / 4.0)


def gamma_eigenvalue(m: int, k: int, eigenpairs, N: int) -> SpectralMode:
    if not 1 <= k <= len(eigenpairs):
        raise IndexError(f"angular index k={k} outside computed spectrum (1..{len(eigenpairs)})")
    if m < 0:
        raise IndexError("radial index m must be >= 0")
    pair = eigenpairs[k - 1]
    alpha, beta = exponents(pair.mu, N)
    gamma = m - alpha / 2.0
    return SpectralMode(m, k, N, pair, alpha, beta, gamma, gamma + N / 2.0, radial_poly_coeffs(m, beta))


def radial_poly(m: int, k: int, eigenpairs, N: int) -> np.ndarray:
    return gamma_eigenvalue(m, k, eigenpairs, N).radial_poly


def mode_table(eigenpairs, N: int, m_max: int) -> list[SpectralMode]:
    return [gamma_eigenvalue(m, k, eigenpairs, N) for k in range(1, len(eigenpairs) + 1) for m in range(m_max + 1)]


def laguerre_consistency(m: int, beta: float, grid=None) -> float:
    """Max difference between the Pochhammer form and ``L_m^beta / binom(m+beta, m)``."""
    if beta <= -1:
        raise ConfigurationError("beta must exceed -1")
    s = np.linspace(0.0, 10.0, 201) if grid is None else np.asarray(grid, dtype=float)
    poch = np.polynomial.polynomial.polyval(s, radial_poly_coeffs(m, beta))
    lag = eval_genlaguerre(m, beta, s) * math.exp(-log_binom(m, beta))
    return float(np.max(np.abs(poch - lag)))


def eigen_residual(mode: SpectralMode, r):
    """Relative residual of ``phi'' + ((N-1)/r - r/2) phi' + (gamma - mu/r^2) phi`` for ``phi = r^-alpha P(r^2/4)``.

    Derivatives come from the polynomial coefficients; the common factor
    ``r^-alpha`` is divided out and each point is scaled by the sum of the
    absolute values of the three terms.
    """
    r = np.asarray(r, dtype=float)
    poly = np.polynomial.Polynomial(mode.radial_poly)
    s = r * r / 4.0
    P, dP, d2P = poly(s), poly.deriv(1)(s), poly.deriv(2)(s)
    a = mode.alpha
    # phi = r^-a P,  phi' = r^-a Q,  phi'' = r^-a (Q' - a Q / r)
    Q = -a / r * P + r / 2.0 * dP
    dQ = a / r**2 * P + (1.0 - a) / 2.0 * dP + r * r / 4.0 * d2P
    t2 = dQ - a * Q / r
    t1 = ((mode.N - 1) / r - r / 2.0) * Q
    t0 = (mode.gamma - mode.mu / r**2) * P
    return np.abs(t2 + t1 + t0) / np.maximum(np.abs(t2) + np.abs(t1) + np.abs(t0), 1e-300)


def _split(x, N):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != N:
        raise ConfigurationError(f"points must have trailing dimension {N}")
    r = np.sqrt(np.sum(x * x, axis=-1))
    safe = np.where(r > 0, r, 1.0)
    if N == 2:
        ang = np.arctan2(x[..., 1], x[..., 0])
    else:
        ang = np.where((r > 0)[..., None], x / safe[..., None], np.eye(N)[-1])
    return r, ang


def eval_V(mode: SpectralMode, x, normalized: bool = False):
    """``V_{m,k}(x)`` at points ``x`` of shape ``(..., N)``; ``normalized`` returns ``Vt``."""
    r, ang = _split(x, mode.N)
    if np.any(r == 0) and mode.alpha > 0:
        raise ConfigurationError("V is singular at the origin for alpha > 0")
    val = mode.radial(r) * mode.pair(ang)
    if normalized:
        val = val / math.sqrt(mode.norm2)
    return val


def eval_Vt(mode: SpectralMode, x):
    return eval_V(mode, x, normalized=True)


def norm_V_closed_form(mode: SpectralMode) -> float:
    return mode.norm2


def norm_V_quadrature(mode: SpectralMode, quad: RadialQuadrature = DEFAULT_QUAD) -> float:
    """``||V||^2`` by radial quadrature (angular part is exactly 1)."""
    return float(quad.integrate(lambda r: mode.P(r * r / 4.0) ** 2, mode.N, 1.0, power=-2 * mode.alpha))


def inner_product_L(f, g, t: float = 1.0, quad: RadialQuadrature = DEFAULT_QUAD) -> complex:
    """``int f conj(g) G(x,t) dx`` for modal fields (see :mod:`emheat.fields`)."""
    from .fields import as_modal, inner

    return inner(as_modal(f), as_modal(g), t, quad)


def eigenspace_basis(gamma_target: float, eigenpairs, N: int, m_max: int, k_max: int | None = None,
                     tol: float | None = None) -> list[SpectralMode]:
    """All modes with ``|gamma_{m,k} - gamma_target| <= tol`` inside the truncation."""
    if tol is None:
        tol = TAU_ANALYTIC if all(p.is_pure_fourier or p.basis == "sphere" for p in eigenpairs) else TAU_FOURIER
    k_max = len(eigenpairs) if k_max is None else min(k_max, len(eigenpairs))
    out = []
    for k in range(1, k_max + 1):
        alpha, _ = exponents(eigenpairs[k - 1].mu, N)
        m = round(gamma_target + alpha / 2.0)
        if 0 <= m <= m_max and abs(m - alpha / 2.0 - gamma_target) <= tol:
            out.append(gamma_eigenvalue(m, k, eigenpairs, N))
    if not out:
        raise ConfigurationError(f"gamma={gamma_target} is not an eigenvalue of the truncated spectrum")
    return out


def truncation_may_hide_modes(gamma: float, eigenpairs, N: int) -> bool:
    """True when angular modes beyond the truncation could still reach ``gamma``."""
    _, beta_last = exponents(eigenpairs[-1].mu, N)
    return beta_last < 2 * gamma + N - 2


def tilde_transform(f, inverse: bool = False):
    """Multiply a pointwise field by ``exp(-|x|^2/4)`` (or ``exp(+|x|^2/4)`` for the inverse)."""
    sign = 1.0 if inverse else -1.0

    def out(x):
        x = np.asarray(x, dtype=float)
        return f(x) * np.exp(sign * np.sum(x * x, axis=-1) / 4.0)

    return out


def write_spectrum_csv(modes, path, header_lines=()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["m", "k", "label", "mu", "alpha", "beta", "gamma", "gamma_tilde", "norm2"])
        for md in modes:
            w.writerow([md.m, md.k, md.label] + [f"{v:.16g}" for v in
                        (md.mu, md.alpha, md.beta, md.gamma, md.gamma_tilde, md.norm2)])
