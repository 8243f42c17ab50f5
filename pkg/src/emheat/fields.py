"""Fields expanded in angular eigenfunctions with analytic radial profiles.

A :class:`ModalField` is ``u(r theta) = sum_k f_k(r) psi_k(theta)`` where each
profile is a sum of :class:`Term` objects

    f(r) = coef * r^p * exp(-q r^2) * g(r),

with ``g`` smooth and even in ``r``. Weighted integrals of products of terms
then map onto exact Gauss-Laguerre rules (see :mod:`emheat.quadrature`).

Time-dependent fields expose ``at(t) -> ModalField``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .angular import AngularEigenpair, harmonic_dimension, psi_values, sphere_area
from .ou import SpectralMode, gamma_eigenvalue
from .problem import ConfigurationError, StaticPerturbation
from .quadrature import DEFAULT_QUAD, RadialQuadrature


def _num_deriv(g, r):
    h = 1e-3 * np.maximum(r, 1e-3)
    return (8 * (g(r + h) - g(r - h)) - (g(r + 2 * h) - g(r - 2 * h))) / (12 * h)


@dataclass(frozen=True)
class Term:
    coef: complex = 1.0
    p: float = 0.0
    q: float = 0.0
    g: Callable | None = None
    dg: Callable | None = None

    def smooth(self, r):
        return np.ones_like(r) if self.g is None else self.g(r)

    def dsmooth(self, r):
        if self.g is None:
            return np.zeros_like(r)
        return self.dg(r) if self.dg is not None else _num_deriv(self.g, r)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return self.coef * r**self.p * np.exp(-self.q * r * r) * self.smooth(r)

    def derivative(self) -> "Term":
        """``f'`` written again as a term with an even smooth part."""
        p, q, g, dg = self.p, self.q, self.smooth, self.dsmooth
        if p == 0.0:
            return Term(self.coef, 1.0, q, lambda r: dg(r) / r - 2 * q * g(r))
        return Term(self.coef, p - 1.0, q, lambda r: (p - 2 * q * r * r) * g(r) + r * dg(r))

    def scaled(self, c) -> "Term":
        return replace(self, coef=self.coef * c)

    def rescaled(self, lam: float) -> "Term":
        """Profile of ``r -> f(lam r)``."""
        g, dg = self.g, self.dg
        return Term(
            self.coef * lam**self.p, self.p, self.q * lam * lam,
            None if g is None else (lambda r: g(lam * r)),
            None if dg is None else (lambda r: lam * dg(lam * r)),
        )


@dataclass(frozen=True)
class ModalField:
    """Static field ``sum_k f_k(r) psi_k``; ``modes`` maps 0-based eigenpair index to terms."""

    N: int
    pairs: tuple = field(repr=False)
    modes: dict = field(default_factory=dict)

    def at(self, t: float) -> "ModalField":
        return self

    def profile(self, idx: int, r):
        r = np.asarray(r, dtype=float)
        return sum((tm(r) for tm in self.modes.get(idx, ())), np.zeros(r.shape, complex))

    def dprofile(self, idx: int, r):
        r = np.asarray(r, dtype=float)
        return sum((tm.derivative()(r) for tm in self.modes.get(idx, ())), np.zeros(r.shape, complex))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        r = np.sqrt(np.sum(x * x, axis=-1))
        if self.N == 2:
            ang = np.arctan2(x[..., 1], x[..., 0])
        else:
            ang = x / np.where(r > 0, r, 1.0)[..., None]
        out = np.zeros(r.shape, complex)
        for idx in self.modes:
            out += self.profile(idx, r) * psi_values(self.pairs[idx], ang)
        return out

    def _combine(self, other: "ModalField", sign: float) -> "ModalField":
        if other.N != self.N:
            raise ConfigurationError("fields live in different dimensions")
        modes = {k: tuple(v) for k, v in self.modes.items()}
        for k, v in other.modes.items():
            modes[k] = modes.get(k, ()) + tuple(tm.scaled(sign) for tm in v)
        return ModalField(self.N, self.pairs, modes)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def scaled(self, c) -> "ModalField":
        return ModalField(self.N, self.pairs, {k: tuple(tm.scaled(c) for tm in v) for k, v in self.modes.items()})

    def __mul__(self, c):
        return self.scaled(c)

    __rmul__ = __mul__

    def rescaled(self, lam: float) -> "ModalField":
        """The field ``x -> u(lam x)``."""
        return ModalField(self.N, self.pairs, {k: tuple(tm.rescaled(lam) for tm in v) for k, v in self.modes.items()})

    def rotated(self, theta0: float) -> "ModalField":
        """``x -> u(R_{-theta0} x)`` for pure Fourier modes in the plane."""
        if self.N != 2 or not all(self.pairs[k].is_pure_fourier for k in self.modes):
            raise ConfigurationError("rotation is implemented for planar pure Fourier modes")
        ph = {k: np.exp(-1j * self.pairs[k].label * theta0) for k in self.modes}
        return ModalField(self.N, self.pairs, {k: tuple(tm.scaled(ph[k]) for tm in v) for k, v in self.modes.items()})


# ---------------------------------------------------------------------------
# weighted integrals
# ---------------------------------------------------------------------------


def term_integral(a: Term, b: Term, N: int, t: float, quad: RadialQuadrature = DEFAULT_QUAD,
                  extra_power: float = 0.0, weight=None) -> complex:
    """``t^{-N/2} int a(r) conj(b(r)) r^extra w(r) exp(-r^2/4t) r^{N-1} dr``."""
    rate = 1.0 + 4.0 * t * (a.q + b.q)
    c = a.coef * np.conj(b.coef)
    if a.g is None and b.g is None and weight is None:
        fun = lambda r: np.ones_like(r)  # noqa: E731
    else:
        def fun(r):
            v = a.smooth(r) * np.conj(b.smooth(r))
            return v if weight is None else v * weight(r)
    return c * quad.integrate(fun, N, t, power=a.p + b.p + extra_power, rate=rate)


def _terms_integral(ta, tb, N, t, quad, extra_power=0.0, weight=None) -> complex:
    return sum((term_integral(a, b, N, t, quad, extra_power, weight) for a in ta for b in tb), 0j)


def inner(f: ModalField, g: ModalField, t: float = 1.0, quad: RadialQuadrature = DEFAULT_QUAD) -> complex:
    """``int f conj(g) G(x,t) dx`` using angular orthonormality."""
    return sum((_terms_integral(f.modes[k], g.modes[k], f.N, t, quad) for k in f.modes if k in g.modes), 0j)


def mode_norms(u: ModalField, t: float, quad: RadialQuadrature = DEFAULT_QUAD, h: StaticPerturbation | None = None):
    """Per-mode weighted integrals.

    Returns a dict of arrays indexed like ``sorted(u.modes)``:
    ``mass`` = int |f|^2 G, ``grad_r`` = int |f'|^2 G, ``inv_r2`` = int |f|^2/r^2 G,
    ``r2`` = int r^2 |f|^2 G and, when ``h`` is given, ``h`` = int h |f|^2 G.
    """
    keys = sorted(u.modes)
    out = {name: np.zeros(len(keys)) for name in ("mass", "grad_r", "inv_r2", "r2", "h")}
    for i, k in enumerate(keys):
        ts = u.modes[k]
        ds = [tm.derivative() for tm in ts]
        out["mass"][i] = _terms_integral(ts, ts, u.N, t, quad).real
        out["grad_r"][i] = _terms_integral(ds, ds, u.N, t, quad).real
        out["inv_r2"][i] = _terms_integral(ts, ts, u.N, t, quad, extra_power=-2.0).real
        out["r2"][i] = _terms_integral(ts, ts, u.N, t, quad, extra_power=2.0).real
        if h is not None and not h.is_zero:
            val = h.c0 * out["mass"][i] if h.c0 else 0.0
            if h.c1:
                val += h.c1 * _terms_integral(ts, ts, u.N, t, quad, extra_power=h.eps - 2.0).real
            out["h"][i] = val
    out["keys"] = keys
    return out


def compute_H_modal(u: ModalField, t: float, quad: RadialQuadrature = DEFAULT_QUAD) -> float:
    return float(sum(_terms_integral(v, v, u.N, t, quad).real for v in u.modes.values()))


def compute_D_modal(u: ModalField, t: float, quad: RadialQuadrature = DEFAULT_QUAD,
                    h: StaticPerturbation | None = None) -> float:
    """``int (|grad_A u|^2 - a|u|^2/|x|^2 - h|u|^2) G`` via the per-mode angular eigenvalues."""
    nm = mode_norms(u, t, quad, h)
    mus = np.array([u.pairs[k].mu for k in nm["keys"]])
    return float(np.sum(nm["grad_r"] + mus * nm["inv_r2"] - nm["h"]))


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


def mode_index(pairs, label: int, sub: int = 0) -> int:
    for i, p in enumerate(pairs):
        if p.label == label and p.sub == sub:
            return i
    raise ConfigurationError(f"no angular eigenpair with label {label} (sub {sub}) in the truncation")


def _vt_term(mode: SpectralMode, coef: complex, scale2: float, q: float = 0.0) -> Term:
    """Term of ``coef * Vt(x / sqrt(scale2))`` (times ``exp(-q r^2)``)."""
    m = mode.m
    c = coef * scale2 ** (mode.alpha / 2.0) / math.sqrt(mode.norm2)
    if m == 0:
        return Term(c, -mode.alpha, q)
    return Term(
        c, -mode.alpha, q,
        lambda r: mode.P(r * r / (4 * scale2)),
        lambda r: mode.dP(r * r / (4 * scale2)) * r / (2 * scale2),
    )


class SelfSimilarField:
    """Finite combination of separated eigen-solutions.

    ``direction="backward"``: ``u(x,t) = sum c t^gamma Vt(x/sqrt t)``, a solution
    in backward time (the variable of the frequency function).

    ``direction="forward"``: ``u(x,t) = sum c (1+t)^{-gamma~} Ut(x/sqrt(1+t))``
    with ``Ut = exp(-|x|^2/4) Vt``, a solution of the forward equation.
    """

    def __init__(self, N: int, pairs, coeffs: dict, direction: str = "backward"):
        if direction not in ("backward", "forward"):
            raise ConfigurationError("direction must be 'backward' or 'forward'")
        self.N = N
        self.pairs = tuple(pairs)
        self.direction = direction
        self.coeffs = {tuple(k): complex(v) for k, v in coeffs.items() if v != 0}
        self.modes = {key: gamma_eigenvalue(key[0], key[1], self.pairs, N) for key in self.coeffs}

    def at(self, t: float) -> ModalField:
        if self.direction == "backward" and t <= 0:
            raise ConfigurationError("backward self-similar fields need t > 0")
        if self.direction == "forward" and t < 0:
            raise ConfigurationError("forward fields need t >= 0")
        modes: dict = {}
        for key, c in self.coeffs.items():
            md = self.modes[key]
            if self.direction == "backward":
                tm = _vt_term(md, c * t**md.gamma, t)
            else:
                s = 1.0 + t
                tm = _vt_term(md, c * s ** (-md.gamma_tilde), s, q=1.0 / (4.0 * s))
            modes.setdefault(md.k - 1, ())
            modes[md.k - 1] += (tm,)
        return ModalField(self.N, self.pairs, modes)

    def __call__(self, x, t: float):
        return self.at(t)(x)


def eigenfield(mode_or_key, pairs, N: int, coef: complex = 1.0, direction: str = "backward") -> SelfSimilarField:
    key = (mode_or_key.m, mode_or_key.k) if isinstance(mode_or_key, SpectralMode) else tuple(mode_or_key)
    return SelfSimilarField(N, pairs, {key: coef}, direction)


def vt_field(mode: SpectralMode, pairs, coef: complex = 1.0) -> ModalField:
    """Static field ``coef * Vt_{m,k}``."""
    return ModalField(mode.N, tuple(pairs), {mode.k - 1: (_vt_term(mode, coef, 1.0),)})


def ut_field(mode: SpectralMode, pairs, coef: complex = 1.0) -> ModalField:
    """Static field ``coef * exp(-|x|^2/4) Vt_{m,k}``."""
    return ModalField(mode.N, tuple(pairs), {mode.k - 1: (_vt_term(mode, coef, 1.0, q=0.25),)})


def _constant_mode(pairs, N: int) -> tuple[int, float]:
    for i, p in enumerate(pairs):
        if p.basis == "sphere" and p.label == 0:
            return i, math.sqrt(sphere_area(N))
        if p.basis == "fourier" and p.is_pure_fourier and p.label == 0:
            return i, math.sqrt(2 * math.pi)
    raise ConfigurationError("angular basis has no constant mode")


class GaussianField:
    """Radial Gaussian ``amp * s^{-N/2} exp(-|x|^2/(4s))``.

    ``direction="backward"``: ``s = sigma - t`` (solution for ``t < sigma``);
    ``"forward"``: ``s = sigma + t``. For ``A = 0, a = 0`` both solve the heat
    equation in their respective time variables.
    """

    def __init__(self, N: int, pairs, sigma: float, direction: str = "forward", amp: float = 1.0):
        self.N, self.pairs, self.sigma, self.direction, self.amp = N, tuple(pairs), sigma, direction, amp
        self._idx, self._scale = _constant_mode(self.pairs, N)

    def width(self, t: float) -> float:
        s = self.sigma - t if self.direction == "backward" else self.sigma + t
        if s <= 0:
            raise ConfigurationError("Gaussian field evaluated past its blow-up time")
        return s

    def at(self, t: float) -> ModalField:
        s = self.width(t)
        return ModalField(self.N, self.pairs, {self._idx: (Term(self.amp * self._scale * s ** (-self.N / 2), 0.0, 1 / (4 * s)),)})

    def __call__(self, x, t: float):
        x = np.asarray(x, dtype=float)
        s = self.width(t)
        return self.amp * s ** (-self.N / 2) * np.exp(-np.sum(x * x, axis=-1) / (4 * s))


class ScaledField:
    """Blow-up family ``factor * u(lam x, lam^2 t)``."""

    def __init__(self, base, lam: float, factor: complex = 1.0):
        self.base, self.lam, self.factor = base, lam, factor
        self.N, self.pairs = base.N, base.pairs

    def at(self, t: float) -> ModalField:
        return self.base.at(self.lam**2 * t).rescaled(self.lam).scaled(self.factor)


class SumField:
    def __init__(self, *fields, weights=None):
        self.fields = fields
        self.weights = weights or [1.0] * len(fields)
        self.N, self.pairs = fields[0].N, fields[0].pairs

    def at(self, t: float) -> ModalField:
        out = self.fields[0].at(t).scaled(self.weights[0])
        for f, w in zip(self.fields[1:], self.weights[1:]):
            out = out + f.at(t).scaled(w)
        return out


def as_modal(f) -> ModalField:
    if isinstance(f, ModalField):
        return f
    raise ConfigurationError(f"expected a ModalField, got {type(f).__name__}; use reduce_to_modes for pointwise functions")


# ---------------------------------------------------------------------------
# pointwise functions -> modes
# ---------------------------------------------------------------------------


def angular_rule(N: int, n_angle: int = 64):
    """Points on ``S^{N-1}`` (angles for N=2, unit vectors for N=3) and weights summing to the area."""
    if N == 2:
        th = 2 * np.pi * np.arange(n_angle) / n_angle
        return th, np.full(n_angle, 2 * np.pi / n_angle)
    if N == 3:
        n_pol = max(n_angle // 2, 4)
        z, wz = np.polynomial.legendre.leggauss(n_pol)
        ph = 2 * np.pi * np.arange(n_angle) / n_angle
        Z, PH = np.meshgrid(z, ph, indexing="ij")
        s = np.sqrt(1 - Z**2)
        pts = np.stack([s * np.cos(PH), s * np.sin(PH), Z], axis=-1).reshape(-1, 3)
        w = (wz[:, None] * np.full(n_angle, 2 * np.pi / n_angle)[None, :]).ravel()
        return pts, w
    raise NotImplementedError("angular quadrature is implemented for N = 2, 3")


def _to_cartesian(r, ang, N):
    if N == 2:
        return np.stack([r[:, None] * np.cos(ang)[None, :], r[:, None] * np.sin(ang)[None, :]], axis=-1)
    return r[:, None, None] * ang[None, :, :]


def analytic_power(pair: AngularEigenpair) -> float:
    """Leading power ``r^p`` of the mode-``pair`` component of a smooth function."""
    if pair.basis == "sphere":
        return float(pair.label)
    return float(abs(pair.label)) if pair.is_pure_fourier else 0.0


def reduce_to_modes(fun, pairs, N: int, n_angle: int = 64, powers=None, tol: float = 1e-10) -> ModalField:
    """Project a pointwise function ``fun(x)`` onto the angular eigenfunctions.

    Profiles are computed lazily at whatever radii the radial quadrature asks
    for. Modes whose projection vanishes on a probe set are dropped.
    """
    pairs = tuple(pairs)
    ang, w = angular_rule(N, n_angle)
    psis = np.stack([np.conj(psi_values(p, ang)) for p in pairs])  # (K, n_ang)

    def proj(r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        vals = fun(_to_cartesian(r, ang, N))
        return (vals * w[None, :]) @ psis.T  # (n_r, K)

    probe = proj(np.array([0.3, 0.9, 1.7, 2.9]))
    scale = max(np.max(np.abs(probe)), 1e-300)
    modes = {}
    for k, pair in enumerate(pairs):
        if np.max(np.abs(probe[:, k])) <= tol * scale:
            continue
        p = analytic_power(pair) if powers is None else powers[k]
        modes[k] = (Term(1.0, p, 0.0, (lambda r, k=k, p=p: proj(r)[:, k] / np.asarray(r) ** p)),)
    return ModalField(N, pairs, modes)


def reconstruction_error(fun, u: ModalField, points) -> float:
    return float(np.max(np.abs(fun(points) - u(points))))


def sphere_counts(N: int, k_max: int) -> list[int]:
    return [harmonic_dimension(N, ell) for ell in range(k_max + 1)]
