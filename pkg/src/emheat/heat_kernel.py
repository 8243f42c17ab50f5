"""Representation kernel of the unperturbed heat semigroup and spectral propagation.

For ``h = 0`` the solution with datum ``u0`` is

    u(x,t) = t^{-N/2} int u0(y) K(y/sqrt t, x/sqrt t) dy,
    K(x,y) = 1/2 (|x||y|)^{-(N-2)/2} exp(-(|x|^2+|y|^2)/4)
             * sum_k psi_k(y/|y|) conj(psi_k(x/|x|)) I_{beta_k}(|x||y|/2).

Equivalently, in self-similar variables every coefficient on ``Ut_{m,k}``
decays like ``(1+t)^{-gamma~_{m,k}}``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import eval_gegenbauer

from .angular import psi_values, sphere_area
from .bessel import bessel_I_scaled, tail_bound
from .fields import ModalField, SelfSimilarField, Term, angular_rule, reduce_to_modes
from .kernels import ive
from .ou import exponents, gamma_eigenvalue
from .problem import ConfigurationError, QuadratureError, TruncationError
from .quadrature import DEFAULT_QUAD, RadialQuadrature

__all__ = [
    "KernelConfig", "SpectralState", "bessel_I_scaled", "kernel_K", "expand_datum", "propagate",
    "evaluate_solution_spectral", "evaluate_solution_kernel", "write_batch_csv",
]


@dataclass(frozen=True)
class KernelConfig:
    """Truncation policy for the kernel series and the datum integral."""

    k_max: int = 40
    tail_tol: float = 1e-12
    domain_radius: float | None = None
    radial_order: int = 96
    angular_order: int = 64

    def __post_init__(self):
        if self.tail_tol <= 0:
            raise ConfigurationError("tail_tol must be positive")
        if self.domain_radius is not None and self.domain_radius <= 0:
            raise ConfigurationError("domain_radius must be positive")


@dataclass
class _Group:
    beta: float
    members: list
    ang_bound: float
    degree: int | None = None


def _groups(pairs, N):
    """Kernel terms ordered by Bessel order; sphere degrees are merged into zonal sums."""
    out = []
    if pairs[0].basis == "sphere":
        omega = sphere_area(N)
        by_deg: dict = {}
        for i, p in enumerate(pairs):
            by_deg.setdefault(p.label, []).append(i)
        for ell, idx in sorted(by_deg.items()):
            _, beta = exponents(pairs[idx[0]].mu, N)
            out.append(_Group(beta, idx, len(idx) / omega, ell))
        return out
    for i, p in enumerate(pairs):
        _, beta = exponents(p.mu, N)
        out.append(_Group(beta, [i], float(np.sum(np.abs(p.psi))) ** 2 / (2 * math.pi)))
    out.sort(key=lambda g: g.beta)
    return out


def _next_beta(pairs, N, groups):
    """Bessel order of the first term left out by the truncation (lower estimate)."""
    p = pairs[0]
    if p.basis == "sphere":
        L = groups[-1].degree + 1
        a_const = p.kinetic - p.mu
        return exponents(L * (L + N - 2) - a_const, N)[1]
    if all(q.is_pure_fourier for q in pairs):
        kmax = max(abs(q.label) for q in pairs)
        edge = [exponents(q.mu, N)[1] for q in pairs if abs(q.label) == kmax]
        return min(edge) + 1.0
    return groups[-1].beta


def _zonal(group, pairs, N, ang_x, ang_y):
    """``sum_{k in group} psi_k(y) conj(psi_k(x))``; angles (N=2) or unit vectors broadcast together."""
    if group.degree is not None:
        c = np.clip(np.sum(np.asarray(ang_x) * np.asarray(ang_y), axis=-1), -1.0, 1.0)
        lam = (N - 2) / 2.0
        dim = len(group.members)
        return dim / sphere_area(N) * eval_gegenbauer(group.degree, lam, c) / eval_gegenbauer(group.degree, lam, 1.0)
    total = 0
    for i in group.members:
        total = total + psi_values(pairs[i], ang_y) * np.conj(psi_values(pairs[i], ang_x))
    return total


def _polar(x, N):
    x = np.asarray(x, dtype=float)
    r = np.sqrt(np.sum(x * x, axis=-1))
    if N == 2:
        return r, np.arctan2(x[..., 1], x[..., 0])
    return r, x / np.where(r > 0, r, 1.0)[..., None]


def _tail(pref, group_bound, beta_next, z, n_families, unit_spaced=False):
    b = bessel_tail(beta_next, z)
    rho = z / (2.0 * (beta_next + 1.0))
    geom = np.where(rho < 1.0, 1.0 / (1.0 - np.minimum(rho, 0.999999)), np.inf)
    est = np.where(b < 1.0, b * geom, np.inf)
    if unit_spaced:
        # orders at least one apart and I_nu decreasing in nu: each family sums to <= 1
        est = np.minimum(est, 1.0)
    with np.errstate(invalid="ignore"):
        return np.where(pref == 0, 0.0, np.abs(pref) * n_families * group_bound * est)


bessel_tail = tail_bound


def kernel_K(x, y, eigenpairs, N: int, config: KernelConfig = KernelConfig(), return_tail: bool = False):
    """Kernel values for broadcastable point arrays ``x``, ``y`` of shape ``(..., N)``."""
    pairs = list(eigenpairs)
    if min(p.mu for p in pairs) + ((N - 2) / 2) ** 2 <= 0:
        raise ConfigurationError("Hardy condition fails for this spectrum")
    rx, ax = _polar(x, N)
    ry, ay = _polar(y, N)
    if np.any(rx == 0) or np.any(ry == 0):
        raise ConfigurationError("kernel_K is defined for x, y != 0")
    rx, ry = np.broadcast_arrays(rx, ry)
    z = rx * ry / 2.0
    pref = 0.5 * (rx * ry) ** (-(N - 2) / 2.0) * np.exp(-((rx - ry) ** 2) / 4.0)
    groups = _groups(pairs, N)
    fams = 2.0 if pairs[0].basis == "fourier" else 1.0
    total = np.zeros(z.shape, complex)
    active = np.ones(z.shape, dtype=bool)
    tail = np.full(z.shape, np.inf)
    for gi, g in enumerate(groups):
        if not active.any():
            break
        zg = _zonal(g, pairs, N, ax, ay)
        zg = np.broadcast_to(zg, z.shape)
        total[active] += pref[active] * zg[active] * ive(g.beta, z[active])
        nb = groups[gi + 1].beta if gi + 1 < len(groups) else _next_beta(pairs, N, groups)
        nbound = groups[gi + 1].ang_bound if gi + 1 < len(groups) else g.ang_bound
        tail[active] = _tail(pref[active], nbound, nb, z[active], fams)
        active &= tail >= config.tail_tol
    if np.any(tail >= config.tail_tol):
        worst = float(np.max(tail))
        raise TruncationError(f"kernel series tail bound {worst:.3g} exceeds tail_tol with {len(groups)} terms", worst)
    total = total if total.ndim else complex(total)
    return (total, tail) if return_tail else total


# ---------------------------------------------------------------------------
# spectral propagation
# ---------------------------------------------------------------------------


@dataclass
class SpectralState:
    """Coefficients of ``phi(., t)`` on ``Ut_{m,k}`` where ``phi(y,t) = u(sqrt(1+t) y, t)``."""

    t: float
    coeffs: dict
    pairs: tuple = field(repr=False)
    N: int = 2

    def norm2(self) -> float:
        return float(sum(abs(c) ** 2 for c in self.coeffs.values()))

    def coefficient(self, m: int, k: int) -> complex:
        return self.coeffs.get((m, k), 0j)

    def __add__(self, other):
        if other.t != self.t:
            raise ConfigurationError("states at different times")
        c = dict(self.coeffs)
        for key, v in other.coeffs.items():
            c[key] = c.get(key, 0j) + v
        return SpectralState(self.t, c, self.pairs, self.N)

    def scaled(self, s):
        return SpectralState(self.t, {k: s * v for k, v in self.coeffs.items()}, self.pairs, self.N)


def _gamma_tilde(key, pairs, N):
    return gamma_eigenvalue(key[0], key[1], pairs, N).gamma_tilde


def expand_datum(u0, eigenpairs, N: int, m_max: int, k_max: int | None = None,
                 quad: RadialQuadrature = DEFAULT_QUAD, datum_q: float = 0.125, n_angle: int = 64) -> SpectralState:
    """Coefficients ``c_{m,k} = int u0 conj(Vt_{m,k}) dx`` of a datum.

    ``u0`` is a :class:`ModalField` whose terms carry Gaussian decay ``q > 0``,
    or a pointwise callable. Callables are reduced to angular modes and must
    decay faster than ``exp(-datum_q |x|^2)``.
    """
    pairs = tuple(eigenpairs)
    k_max = len(pairs) if k_max is None else min(k_max, len(pairs))
    if not isinstance(u0, ModalField):
        red = reduce_to_modes(u0, pairs, N, n_angle)
        modes = {}
        for k, terms in red.modes.items():
            tm = terms[0]
            g = tm.g
            modes[k] = (Term(tm.coef, tm.p, datum_q, lambda r, g=g: g(r) * np.exp(datum_q * np.asarray(r) ** 2)),)
        u0 = ModalField(N, pairs, modes)
    coeffs = {}
    for idx, terms in u0.modes.items():
        if idx >= k_max:
            continue
        shifted = []
        for tm in terms:
            if tm.q <= 0:
                raise QuadratureError("datum terms need Gaussian decay (q > 0) for the expansion integral")
            shifted.append(Term(tm.coef, tm.p, tm.q - 0.25, tm.g, tm.dg))
        for m in range(m_max + 1):
            md = gamma_eigenvalue(m, idx + 1, pairs, N)
            vt = Term(1.0 / math.sqrt(md.norm2), -md.alpha, 0.0,
                      None if m == 0 else (lambda r, md=md: md.P(r * r / 4.0)))
            c = 0j
            for tm in shifted:
                rate = 1.0 + 4.0 * tm.q
                fun = (lambda r, tm=tm, vt=vt: tm.smooth(r) * vt.smooth(r))
                c += tm.coef * vt.coef * quad.integrate(fun, N, 1.0, power=tm.p + vt.p, rate=rate)
            coeffs[(m, idx + 1)] = complex(c)
    return SpectralState(0.0, coeffs, pairs, N)


def propagate(state: SpectralState, t: float) -> SpectralState:
    """Multiply each coefficient by ``(1+t)^{-gamma~}``; the clock composes as ``1+T = (1+s)(1+t)``."""
    if t < 0:
        raise ConfigurationError("propagate needs t >= 0")
    c = {key: v * (1.0 + t) ** (-_gamma_tilde(key, state.pairs, state.N)) for key, v in state.coeffs.items()}
    return SpectralState((1.0 + state.t) * (1.0 + t) - 1.0, c, state.pairs, state.N)


def solution_field(state: SpectralState) -> SelfSimilarField:
    """Forward solution field whose time-``state.t`` slice is described by ``state``."""
    s = state.t
    datum = {key: v * (1.0 + s) ** _gamma_tilde(key, state.pairs, state.N) for key, v in state.coeffs.items()}
    return SelfSimilarField(state.N, state.pairs, datum, direction="forward")


def spectral_tail(state: SpectralState, t: float) -> float:
    """Relative weight of the highest radial shell at time ``t``."""
    if not state.coeffs:
        return 0.0
    m_max = max(key[0] for key in state.coeffs)
    fac = {key: ((1.0 + t) / (1.0 + state.t)) ** (-_gamma_tilde(key, state.pairs, state.N)) for key in state.coeffs}
    tot = sum(abs(v * fac[k]) ** 2 for k, v in state.coeffs.items())
    top = sum(abs(v * fac[k]) ** 2 for k, v in state.coeffs.items() if k[0] == m_max)
    return math.sqrt(top / tot) if tot > 0 else 0.0


def evaluate_solution_spectral(state: SpectralState, x, t: float, tail_tol: float | None = 1e-6):
    """``u(x,t) = sum c (1+t)^{-gamma~} Ut(x / sqrt(1+t))`` at points ``x``."""
    if t < 0:
        raise ConfigurationError("t must be >= 0")
    if tail_tol is not None:
        tail = spectral_tail(state, t)
        if tail > tail_tol:
            raise TruncationError(f"spectral tail {tail:.3g} above tolerance {tail_tol:g}", tail)
    return solution_field(state).at(t)(x)


def _datum_rule(N, R, config):
    v, wv = np.polynomial.legendre.leggauss(config.radial_order)
    v = 0.5 * (v + 1.0)
    wv = 0.5 * wv
    # rho = R v^4 clusters nodes at the origin, where data behave like rho^beta
    rho = R * v**4
    wr = 4 * R * v**3 * wv * rho ** (N - 1)
    ang, wa = angular_rule(N, config.angular_order)
    return rho, wr, ang, wa


def evaluate_solution_kernel(u0, x, t: float, eigenpairs, N: int, config: KernelConfig = KernelConfig(),
                             tol: float = 1e-6, return_diagnostics: bool = False):
    """``u(x,t) = t^{-N/2} int_{|y|<=R} u0(y) K(y/sqrt t, x/sqrt t) dy`` by product quadrature.

    The kernel sum is organised as a radial table of Bessel terms times the
    angular sums, so each Bessel value is computed once per radial node.
    """
    if t <= 0:
        raise ConfigurationError("kernel evaluation needs t > 0")
    pairs = list(eigenpairs)
    if min(p.mu for p in pairs) + ((N - 2) / 2) ** 2 <= 0:
        raise ConfigurationError("Hardy condition fails for this spectrum")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    rx, ax = _polar(x, N)
    R = config.domain_radius or float(np.max(rx) + math.sqrt(4 * t * math.log(1e12)) + 1.0)
    rho, wr, ang, wa = _datum_rule(N, R, config)
    if N == 2:
        ypts = np.stack([rho[:, None] * np.cos(ang)[None, :], rho[:, None] * np.sin(ang)[None, :]], axis=-1)
    else:
        ypts = rho[:, None, None] * ang[None, :, :]
    U = np.asarray(u0(ypts), dtype=complex) * wa[None, :]  # (n_rad, n_ang)
    groups = _groups(pairs, N)
    fams = 2.0 if pairs[0].basis == "fourier" else 1.0
    betas = np.array([g.beta for g in groups])
    nb = _next_beta(pairs, N, groups)
    # boundary estimate: datum on the outer sphere times the kernel's Gaussian envelope there
    edge = np.max(np.abs(u0(ypts[-1]))) if len(rho) else 0.0
    out = np.zeros(len(x), complex)
    tails = np.zeros(len(x))
    bnd = np.zeros(len(x))
    sq = math.sqrt(t)
    absU = np.abs(U).sum(axis=1)
    n_ang = len(wa)
    modal = pairs[0].basis == "fourier"
    unit_spaced = modal and all(p.is_pure_fourier for p in pairs)
    if modal:
        # circle: project the datum on each conj(psi_k) once, then contract with psi_k(x)
        gpairs = [pairs[g.members[0]] for g in groups]
        P = U @ np.conj(np.stack([psi_values(p, ang) for p in gpairs], axis=1))
        Psi_x = np.stack([psi_values(p, ax) for p in gpairs], axis=1)
    rx_u, inv = np.unique(rx, return_inverse=True)
    a = rho / sq
    for ir, rv in enumerate(rx_u):
        b = rv / sq
        z = a * b / 2.0
        pref = 0.5 * (a * b) ** (-(N - 2) / 2.0) * np.exp(-((a - b) ** 2) / 4.0)
        table = pref[:, None] * ive(betas[None, :], z[:, None])  # (n_rad, G)
        tail_k = _tail(pref, groups[-1].ang_bound, nb, z, fams, unit_spaced)
        tail_val = t ** (-N / 2) * np.sum(wr * absU * tail_k)
        bnd_val = edge * math.exp(-((R - rv) ** 2) / (4 * t)) * sphere_area(N) * R ** (N - 1) * math.sqrt(math.pi * t)
        for j in np.flatnonzero(inv == ir):
            if modal:
                S = P * Psi_x[j][None, :]
            else:
                Z = np.stack([np.broadcast_to(_zonal(g, pairs, N, ang, ax[j]), (n_ang,)) for g in groups], axis=1)
                S = U @ Z  # (n_rad, G)
            out[j] = t ** (-N / 2) * np.sum(wr * np.sum(table * S, axis=1))
            tails[j] = tail_val
            bnd[j] = bnd_val
    scale = max(float(np.max(np.abs(out))), 1e-300)
    if np.max(tails) > tol * scale:
        raise TruncationError(f"kernel series tail {np.max(tails):.3g} too large for requested tolerance", float(np.max(tails)))
    if np.max(bnd) > tol * scale:
        raise QuadratureError(f"domain radius {R:g} too small (boundary estimate {np.max(bnd):.3g})")
    if return_diagnostics:
        return out, {"tail": tails, "boundary": bnd, "R": R}
    return out


def write_batch_csv(path, rows, values, tails, header_lines=()) -> None:
    """CSV of ``x..., t, re, im, tail_estimate`` for batch evaluations."""
    rows = list(rows)
    N = len(np.atleast_1d(rows[0][0])) if rows else 0
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(N)] + ["t", "re_u", "im_u", "tail_estimate"])
        for (xv, tv), u, tl in zip(rows, values, tails):
            w.writerow([f"{c:.16g}" for c in np.atleast_1d(xv)] + [f"{tv:.16g}", f"{u.real:.16g}", f"{u.imag:.16g}", f"{tl:.3g}"])
