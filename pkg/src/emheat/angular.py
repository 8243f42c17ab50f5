"""Eigenpairs of the angular operator ``(-i grad_S + A)^2 - a`` on the unit sphere.

Three regimes are supported:

* Aharonov-Bohm on the circle, solved in closed form;
* general smooth ``(A, a)`` on the circle, by Fourier-Galerkin assembly;
* ``A = 0`` and constant ``a`` on ``S^{N-1}`` (spherical harmonics).

Sign convention: the Aharonov-Bohm potential with circulation ``phi`` has
eigenfunctions ``exp(i n theta)`` with eigenvalue ``(n - phi)^2``; as a
tangential potential in ``(-i d/dtheta + A)^2`` it corresponds to ``A = -phi``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import sph_harm_y

from .problem import AngularPotential, ConfigurationError, NumericalError, ProblemSpec

TIE_TOL = 1e-12


@dataclass(frozen=True)
class AngularEigenpair:
    """One eigenpair ``(mu_k, psi_k)``.

    ``psi`` holds coefficients on the basis named by ``basis``: for
    ``"fourier"`` the functions ``exp(i n theta)/sqrt(2 pi)`` with
    ``n = -L..L`` (``len(psi) = 2L+1``); for ``"sphere"`` a one-hot vector over
    the enumerated spherical harmonics. ``label`` is the wavenumber (circle) or
    the degree (sphere); ``sub`` numbers eigenfunctions inside a degree.
    ``kinetic`` and ``magnetic`` are the angular energies
    ``int |grad_S psi|^2`` and ``int |(grad_S + iA) psi|^2``.
    """

    k: int
    mu: float
    psi: np.ndarray = field(repr=False, compare=False)
    label: int
    sub: int = 0
    basis: str = "fourier"
    N: int = 2
    kinetic: float = 0.0
    magnetic: float = 0.0

    @property
    def wavenumbers(self) -> np.ndarray:
        L = (len(self.psi) - 1) // 2
        return np.arange(-L, L + 1)

    @property
    def is_pure_fourier(self) -> bool:
        return self.basis == "fourier" and np.count_nonzero(self.psi) == 1

    def __call__(self, points):
        """Evaluate ``psi`` at angles (N=2, array of ``theta``) or unit vectors (N>=3, shape ``(..., N)``)."""
        return psi_values(self, points)


class HardyCheck(NamedTuple):
    ok: bool
    margin: float


def sphere_area(N: int) -> float:
    return 2.0 * math.pi ** (N / 2) / math.gamma(N / 2)


def harmonic_dimension(N: int, ell: int) -> int:
    """Number of linearly independent degree-``ell`` spherical harmonics on ``S^{N-1}``."""
    if ell < 0:
        return 0
    top = math.comb(ell + N - 1, N - 1)
    return top - (math.comb(ell + N - 3, N - 1) if ell >= 2 else 0)


def _sort_pairs(mus, labels, subs):
    order = sorted(range(len(mus)), key=lambda i: (mus[i], labels[i], subs[i]))
    # group near-ties so that the label decides, not rounding noise
    groups, cur = [], [order[0]] if order else []
    for i in order[1:]:
        if abs(mus[i] - mus[cur[0]]) <= TIE_TOL * max(1.0, abs(mus[cur[0]])):
            cur.append(i)
        else:
            groups.append(cur)
            cur = [i]
    if cur:
        groups.append(cur)
    return [i for g in groups for i in sorted(g, key=lambda j: (labels[j], subs[j]))]


def solve_ab(phi: float, k_max: int) -> list[AngularEigenpair]:
    """Closed-form Aharonov-Bohm spectrum for wavenumbers ``|n| <= k_max``."""
    if k_max < 0:
        raise ConfigurationError("k_max must be >= 0")
    ns = list(range(-k_max, k_max + 1))
    mus = [(n - phi) ** 2 for n in ns]
    out = []
    for k, i in enumerate(_sort_pairs(mus, ns, [0] * len(ns)), start=1):
        psi = np.zeros(2 * k_max + 1, complex)
        psi[i] = 1.0
        out.append(AngularEigenpair(k, mus[i], psi, ns[i], N=2, kinetic=float(ns[i] ** 2), magnetic=mus[i]))
    return out


def _coef(c: np.ndarray, j):
    L = (len(c) - 1) // 2
    j = np.asarray(j)
    inside = np.abs(j) <= L
    return np.where(inside, c[np.clip(j + L, 0, len(c) - 1)], 0.0)


def fourier_matrix(potential: AngularPotential, n_basis: int, include_a: bool = True) -> np.ndarray:
    """Hermitian matrix of the circle operator on ``exp(i n theta)``, ``|n| <= n_basis``."""
    if potential.kind == "aharonov_bohm":
        potential = AngularPotential.constant_fourier(A=-potential.phi)
    if potential.kind != "fourier":
        raise ConfigurationError("fourier_matrix needs a circle potential")
    A, a = potential.A_coeffs, potential.a_coeffs
    A2 = np.convolve(A, A)
    n = np.arange(-n_basis, n_basis + 1)
    d = n[:, None] - n[None, :]
    M = np.diag(n.astype(float) ** 2).astype(complex)
    M += (n[:, None] + n[None, :]) * _coef(A, d) + _coef(A2, d)
    if include_a:
        M -= _coef(a, d)
    return M


def solve_fourier(potential: AngularPotential, n_basis: int, k_max: int) -> list[AngularEigenpair]:
    """Lowest ``k_max`` eigenpairs of a circle potential via dense Fourier-Galerkin."""
    if n_basis < 2 * k_max + 8:
        raise ConfigurationError("n_basis must be >= 2*k_max + 8")
    M = fourier_matrix(potential, n_basis)
    resid = np.max(np.abs(M - M.conj().T))
    if resid > 1e-10:
        raise NumericalError(f"assembled matrix is not Hermitian (residual {resid:.3g})")
    try:
        w, v = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    Mmag = fourier_matrix(potential, n_basis, include_a=False)
    n = np.arange(-n_basis, n_basis + 1)
    take = min(k_max, len(w))
    # include any eigenvalues tied with the last kept one, then sort and cut
    extra = take
    while extra < len(w) and abs(w[extra] - w[take - 1]) <= TIE_TOL * max(1.0, abs(w[take - 1])):
        extra += 1
    mus, labels, vecs = [], [], []
    for j in range(extra):
        vec = v[:, j]
        top = np.argmax(np.abs(vec) - 1e-9 * np.abs(n))  # prefer smaller |n| on exact ties
        vec = vec * (np.abs(vec[top]) / vec[top])  # fix phase: dominant coefficient real positive
        mus.append(float(w[j]))
        labels.append(int(n[top]))
        vecs.append(vec)
    out = []
    for k, i in enumerate(_sort_pairs(mus, labels, [0] * len(mus))[:take], start=1):
        vec = vecs[i]
        out.append(AngularEigenpair(
            k, mus[i], vec, labels[i], N=2,
            kinetic=float(np.sum(np.abs(vec) ** 2 * n**2)),
            magnetic=float(np.real(vec.conj() @ Mmag @ vec)),
        ))
    return out


def solve_sphere_constant(N: int, a_const: float, k_max: int) -> list[AngularEigenpair]:
    """Spherical-harmonic spectrum ``l(l+N-2) - a`` for degrees ``l <= k_max``."""
    if N < 3:
        raise ConfigurationError("sphere_constant needs N >= 3")
    if k_max < 0:
        raise ConfigurationError("k_max must be >= 0")
    dims = [harmonic_dimension(N, ell) for ell in range(k_max + 1)]
    total = sum(dims)
    out, pos = [], 0
    for ell, dim in enumerate(dims):
        lam = ell * (ell + N - 2)
        for j in range(dim):
            psi = np.zeros(total)
            psi[pos] = 1.0
            out.append(AngularEigenpair(pos + 1, lam - a_const, psi, ell, sub=j, basis="sphere",
                                        N=N, kinetic=float(lam), magnetic=float(lam)))
            pos += 1
    return out


def angular_spectrum(problem: ProblemSpec, k_max: int, n_basis: int | None = None) -> list[AngularEigenpair]:
    """Dispatch on the potential kind. ``k_max`` means |n| cutoff, pair count or max degree."""
    pot = problem.potential
    if pot.kind == "aharonov_bohm":
        return solve_ab(pot.phi, k_max)
    if pot.kind == "fourier":
        return solve_fourier(pot, n_basis or 2 * k_max + 16, k_max)
    return solve_sphere_constant(problem.N, pot.a_const, k_max)


def rayleigh_quotient(potential: AngularPotential, psi, N: int = 3) -> float:
    """Quadratic-form quotient ``<T psi, psi> / <psi, psi>``.

    Circle potentials take Fourier coefficients (length ``2L+1``); for
    ``sphere_constant`` ``psi`` holds coefficients on the enumerated harmonics
    of :func:`solve_sphere_constant` in dimension ``N``.
    """
    psi = np.asarray(psi, dtype=complex)
    nrm = np.vdot(psi, psi).real
    if nrm == 0.0:
        raise ConfigurationError("rayleigh_quotient of a zero function")
    if potential.kind == "sphere_constant":
        mus = []
        ell = 0
        while len(mus) < len(psi):
            mus += [ell * (ell + N - 2) - potential.a_const] * harmonic_dimension(N, ell)
            ell += 1
        return float(np.sum(np.abs(psi) ** 2 * np.array(mus[: len(psi)])) / nrm)
    L = (len(psi) - 1) // 2
    M = fourier_matrix(potential, L)
    return float(np.real(np.vdot(psi, M @ psi)) / nrm)


def check_hardy_condition(eigenpairs, N: int) -> HardyCheck:
    if not eigenpairs:
        raise ConfigurationError("empty eigenpair list")
    margin = min(p.mu for p in eigenpairs) + ((N - 2) / 2) ** 2
    return HardyCheck(margin > 0.0, float(margin))


def _unit_angles(points):
    x = np.asarray(points, dtype=float)
    polar = np.arccos(np.clip(x[..., 2], -1.0, 1.0))
    azim = np.arctan2(x[..., 1], x[..., 0])
    return polar, azim


def psi_values(pair: AngularEigenpair, points):
    """Pointwise values of an angular eigenfunction."""
    if pair.basis == "fourier":
        theta = np.asarray(points, dtype=float)
        if pair.is_pure_fourier:
            return np.exp(1j * pair.label * theta) / math.sqrt(2 * math.pi)
        n = pair.wavenumbers
        return np.exp(1j * theta[..., None] * n) @ pair.psi / math.sqrt(2 * math.pi)
    x = np.asarray(points, dtype=float)
    if pair.N == 3:
        polar, azim = _unit_angles(x)
        return sph_harm_y(pair.label, pair.sub - pair.label, polar, azim)
    omega = sphere_area(pair.N)
    if pair.label == 0:
        return np.full(x.shape[:-1], 1.0 / math.sqrt(omega), dtype=complex)
    if pair.label == 1:
        return math.sqrt(pair.N / omega) * x[..., pair.sub].astype(complex)
    raise NotImplementedError("pointwise harmonics for N >= 4 are available for degree <= 1 only")


def psi_gradient(pair: AngularEigenpair, points):
    """Tangential derivatives of ``psi``.

    N=2: ``d psi / d theta``. N=3: ``(d/d polar, d/d azimuth / sin(polar))``
    stacked on the last axis.
    """
    if pair.basis == "fourier":
        theta = np.asarray(points, dtype=float)
        n = pair.wavenumbers
        return np.exp(1j * theta[..., None] * n) @ (1j * n * pair.psi) / math.sqrt(2 * math.pi)
    if pair.N != 3:
        raise NotImplementedError("tangential gradients are implemented for N = 3")
    polar, azim = _unit_angles(points)
    _, d = sph_harm_y(pair.label, pair.sub - pair.label, polar, azim, diff_n=1)
    return np.stack([d[..., 0], d[..., 1] / np.sin(polar)], axis=-1)


def write_eigenpairs_csv(pairs, path, header_lines=()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["k", "label", "mu", "coefficients"])
        for p in pairs:
            nz = np.flatnonzero(np.abs(p.psi) > 1e-14)
            if p.basis == "fourier":
                L = (len(p.psi) - 1) // 2
                coeffs = ";".join(f"{i - L}:{p.psi[i].real:.16g}{p.psi[i].imag:+.16g}j" for i in nz)
            else:
                coeffs = f"Y(l={p.label},j={p.sub})"
            w.writerow([p.k, p.label, f"{p.mu:.16g}", coeffs])
