"""Frequency-function observables ``H``, ``D``, ``N = tD/H`` and blow-up coefficients.

Fields are sampled in backward time: ``field.at(t)`` is ``u(., t0 - t)`` for
``t > 0``, so ``t -> 0+`` approaches the singular time ``t0``. Self-similar
eigen-solutions in this variable are ``t^gamma Vt(x/sqrt t)``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad as scalar_quad

from .fields import ModalField, ScaledField, SelfSimilarField, _terms_integral, _vt_term, compute_D_modal, compute_H_modal, mode_norms
from .ou import SpectralMode, eigenspace_basis
from .problem import ConfigurationError, NumericalError, ProblemSpec
from .quadrature import DEFAULT_QUAD, RadialQuadrature


def ladder(t0: float = 1.0, rungs: int = 10, ratio: float = 2.0) -> np.ndarray:
    """Geometric ladder ``t0 * ratio^-j``, ``j = 0..rungs-1`` (decreasing)."""
    return t0 * ratio ** -np.arange(rungs, dtype=float)


def compute_H(field, t: float, quad: RadialQuadrature = DEFAULT_QUAD) -> float:
    """``int |u(x,t)|^2 G(x,t) dx``."""
    if t <= 0:
        raise ConfigurationError("H is defined for t > 0")
    return compute_H_modal(field.at(t), t, quad)


def compute_D(field, t: float, problem: ProblemSpec | None = None, quad: RadialQuadrature = DEFAULT_QUAD) -> float:
    """``int (|grad_A u|^2 - a |u|^2/|x|^2 - h |u|^2) G(x,t) dx``."""
    if t <= 0:
        raise ConfigurationError("D is defined for t > 0")
    h = None if problem is None else problem.h
    return compute_D_modal(field.at(t), t, quad, h)


@dataclass
class FrequencyTrace:
    samples: np.ndarray  # columns t, H, D, N
    gamma_fit: float
    matched_modes: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def t(self):
        return self.samples[:, 0]

    @property
    def H(self):
        return self.samples[:, 1]

    @property
    def D(self):
        return self.samples[:, 2]

    @property
    def N(self):
        return self.samples[:, 3]


def richardson_limit(t, values, tiny: float = 1e-15):
    """Extrapolate ``values(t)`` to ``t -> 0`` from the three smallest ladder points.

    Assumes ``v(t) = L + c t^delta + ...`` on a geometric ladder and fits
    ``delta``. Returns ``(limit, delta)``; ``delta`` is ``nan`` when the data
    are already constant.
    """
    order = np.argsort(t)
    t = np.asarray(t, dtype=float)[order]
    v = np.asarray(values, dtype=float)[order]
    if len(t) < 3:
        raise NumericalError("extrapolation needs at least three samples")
    r = t[1] / t[0]
    if abs(t[2] / t[1] - r) > 1e-9 * r:
        raise NumericalError("extrapolation needs a geometric ladder")
    d0, d1 = v[1] - v[0], v[2] - v[1]
    scale = max(np.max(np.abs(v)), 1.0)
    if abs(d0) <= tiny * scale:
        return float(v[0]), float("nan")
    if d1 / d0 <= 1.0:
        raise NumericalError("samples do not approach a limit monotonically")
    delta = math.log(d1 / d0) / math.log(r)
    return float(v[0] - d0 / (r**delta - 1.0)), float(delta)


def _fit_with_spread(t, values):
    order = np.argsort(t)
    t, values = np.asarray(t)[order], np.asarray(values)[order]
    lim, delta = richardson_limit(t[:3], values[:3])
    spread = 0.0
    if len(t) >= 4:
        lim2, _ = richardson_limit(t[1:4], values[1:4])
        spread = abs(lim2 - lim)
    return lim, delta, spread


def frequency(field, t_grid, problem: ProblemSpec | None = None, m_max: int = 8, quad: RadialQuadrature = DEFAULT_QUAD,
              fit_tol: float = 1e-3, jobs_map=map) -> FrequencyTrace:
    """Sample ``(t, H, D, N)`` and extrapolate ``N(t)`` as ``t -> 0+``."""
    ts = np.asarray(t_grid, dtype=float)
    if ts.size == 0:
        raise ConfigurationError("empty time grid")

    def sample(t):
        return compute_H(field, t, quad), compute_D(field, t, problem, quad)

    HD = list(jobs_map(sample, ts))
    H = np.array([v[0] for v in HD])
    D = np.array([v[1] for v in HD])
    if np.any(H <= 0):
        raise NumericalError("H vanishes on the grid: the field is trivial")
    Nt = ts * D / H
    samples = np.column_stack([ts, H, D, Nt])
    diag: dict = {}
    srt = np.sort(ts)
    geometric = len(ts) >= 3 and np.allclose(srt[1:] / srt[:-1], srt[1] / srt[0], rtol=1e-9)
    if geometric:
        gamma_fit, delta, spread = _fit_with_spread(ts, Nt)
    else:
        gamma_fit, delta, spread = float(Nt[np.argmin(ts)]), float("nan"), 0.0
    diag.update(delta=delta, spread=spread, extrapolated=bool(geometric))
    if spread > fit_tol:
        raise NumericalError(f"frequency extrapolation unstable (spread {spread:.3g})")
    pairs = getattr(field, "pairs", None)
    matched = []
    if pairs is not None:
        N = field.N
        tau = 1e-9 if all(p.is_pure_fourier or p.basis == "sphere" for p in pairs) else 1e-6
        try:
            matched = eigenspace_basis(gamma_fit, pairs, N, m_max, tol=max(tau, 10 * (spread or 0.0)))
        except ConfigurationError:
            diag["unmatched"] = True
    return FrequencyTrace(samples, float(gamma_fit), matched, diag)


def h_vanishing_rate(field, t_grid, gamma: float, quad: RadialQuadrature = DEFAULT_QUAD, tol: float = 1e-6):
    """``sup t^{-2 gamma} H(t)`` over the grid and its extrapolated ``t -> 0+`` limit."""
    ts = np.asarray(t_grid, dtype=float)
    vals = np.array([t ** (-2 * gamma) * compute_H(field, t, quad) for t in ts])
    lim, delta, spread = _fit_with_spread(ts, vals)
    if spread > tol * max(1.0, abs(lim)):
        raise NumericalError(f"limit of t^(-2 gamma) H unstable under refinement (spread {spread:.3g})")
    return {"sup": float(np.max(vals)), "limit": float(lim), "delta": delta, "spread": float(spread),
            "values": vals}


def _mode_projection(u: ModalField, mode: SpectralMode, quad, extra_power=0.0, weight=None) -> complex:
    """``int u conj(Vt_mode) r^extra w(r) G(x,1) dx``."""
    terms = u.modes.get(mode.k - 1, ())
    if not terms:
        return 0j
    return _terms_integral(terms, (_vt_term(mode, 1.0, 1.0),), u.N, 1.0, quad, extra_power, weight)


@dataclass
class BetaResult:
    betas: dict
    per_lambda: np.ndarray  # (n_lambda, n_modes)
    lambdas: np.ndarray
    spread: float
    gamma: float


def beta_coefficients(field, modes, Lambda_grid, problem: ProblemSpec | None = None, quad: RadialQuadrature = DEFAULT_QUAD,
                      tol: float = 1e-6) -> BetaResult:
    """Blow-up coefficients on the eigenspace ``modes`` for every ``Lambda`` in the grid.

    ``beta = Lambda^{-2g} <u(Lambda x, Lambda^2), Vt> + 2 int_0^Lambda s^{1-2g} <h(s x) u(s x, s^2), Vt> ds``
    with all inner products against ``G(x,1)``.
    """
    modes = list(modes)
    if not modes:
        raise ConfigurationError("empty eigenspace")
    gamma = modes[0].gamma
    if any(abs(m.gamma - gamma) > 1e-6 for m in modes):
        raise ConfigurationError("modes must share one eigenvalue")
    lams = np.asarray(Lambda_grid, dtype=float)
    h = None if problem is None or problem.unperturbed else problem.h
    out = np.zeros((len(lams), len(modes)), complex)

    def h_term(s, md):
        u = ScaledField(field, s).at(1.0)
        val = 0j
        if h.c0:
            val += h.c0 * _mode_projection(u, md, quad)
        if h.c1:
            val += h.c1 * s ** (h.eps - 2.0) * _mode_projection(u, md, quad, extra_power=h.eps - 2.0)
        return s ** (1.0 - 2.0 * gamma) * val

    for i, lam in enumerate(lams):
        u = ScaledField(field, lam).at(1.0)
        for j, md in enumerate(modes):
            b = lam ** (-2.0 * gamma) * _mode_projection(u, md, quad)
            if h is not None:
                re = scalar_quad(lambda s: h_term(s, md).real, 0.0, lam, epsabs=1e-13, epsrel=1e-10, limit=200)[0]
                im = scalar_quad(lambda s: h_term(s, md).imag, 0.0, lam, epsabs=1e-13, epsrel=1e-10, limit=200)[0]
                b += 2.0 * (re + 1j * im)
            out[i, j] = b
    scale = max(np.max(np.abs(out)), 1e-300)
    spread = float(np.max(np.abs(out - out[0][None, :])) / scale) if len(lams) > 1 else 0.0
    if spread > tol:
        raise NumericalError(f"beta coefficients depend on Lambda (relative spread {spread:.3g})")
    betas = {(md.m, md.k): complex(out[-1, j] if len(lams) else 0) for j, md in enumerate(modes)}
    return BetaResult(betas, out, lams, spread, gamma)


def _hilbert_norm2(u: ModalField, t: float, quad) -> float:
    """``int (t |grad_A u|^2 + |u|^2 + t |u|^2/|x|^2) G(x,t) dx`` with per-mode angular energies."""
    nm = mode_norms(u, t, quad)
    mag = np.array([u.pairs[k].magnetic for k in nm["keys"]])
    return float(np.sum(t * (nm["grad_r"] + mag * nm["inv_r2"]) + nm["mass"] + t * nm["inv_r2"]))


def _mass_pointwise(u: ModalField, t: float, quad) -> float:
    """``int |u|^2 G(x,t)`` summing each mode's terms before squaring, so differences cancel pointwise."""
    # same polynomial-times-Gaussian integrands as compute_H, but the values may be pure rounding noise
    quad = RadialQuadrature(quad.order, check=False)
    total = 0.0
    for terms in u.modes.values():
        p0 = min(tm.p for tm in terms)
        fun = lambda r, terms=terms, p0=p0: np.abs(sum(tm(r) for tm in terms) * r ** (-p0)) ** 2  # noqa: E731
        total += float(quad.integrate(fun, u.N, t, power=2 * p0).real)
    return total


def blowup_distance(field, gamma: float, betas: dict, lambda_ladder, tau: float = 0.25, n_t: int = 8,
                    quad: RadialQuadrature = DEFAULT_QUAD):
    """Distance between ``lam^{-2g} u(lam x, lam^2 t)`` and ``t^g sum beta Vt(x/sqrt t)`` for each ``lam``.

    Returns rows ``(lam, sup_t L_t distance, int_tau^1 H_t distance^2 dt)``.
    """
    if not 0 < tau < 1:
        raise ConfigurationError("tau must lie in (0, 1)")
    ref = SelfSimilarField(field.N, field.pairs, betas, "backward")
    nodes, weights = np.polynomial.legendre.leggauss(n_t)
    ts = tau + (1 - tau) * (nodes + 1) / 2
    wts = weights * (1 - tau) / 2
    grid = np.linspace(tau, 1.0, n_t)
    rows = []
    for lam in lambda_ladder:
        scaled = ScaledField(field, lam, lam ** (-2.0 * gamma))
        sup = max(math.sqrt(max(_mass_pointwise(scaled.at(t) - ref.at(t), t, quad), 0.0)) for t in grid)
        integ = sum(w * _hilbert_norm2(scaled.at(t) - ref.at(t), t, quad) for t, w in zip(ts, wts))
        rows.append((float(lam), float(sup), float(integ)))
    return np.array(rows)


@dataclass
class MonotoneResult:
    ok: bool
    step: int | None = None
    quantity: str | None = None

    def __bool__(self):
        return self.ok


def _first_drop(values, tol):
    v = np.asarray(values, dtype=float)
    drops = np.flatnonzero(np.diff(v) < -tol * np.maximum(1.0, np.abs(v[:-1])))
    return int(drops[0]) if drops.size else None


def monotone_H_check(field, t_grid, exponent: float, problem: ProblemSpec | None = None,
                     quad: RadialQuadrature = DEFAULT_QUAD, tol: float = 1e-10, n_tol: float = 1e-8) -> MonotoneResult:
    """Check that ``t^exponent H(t)`` (and, for ``h = 0``, ``N(t)``) is nondecreasing.

    ``field`` may also be an ``(n, 2)`` array of precomputed ``(t, H)`` rows.
    """
    if isinstance(field, np.ndarray):
        ts, H = field[:, 0], field[:, 1]
        D = None
    else:
        ts = np.asarray(t_grid, dtype=float)
        H = np.array([compute_H(field, t, quad) for t in ts])
        D = np.array([compute_D(field, t, problem, quad) for t in ts])
    if np.any(np.diff(ts) <= 0):
        raise ConfigurationError("t_grid must be increasing")
    step = _first_drop(ts**exponent * H, tol)
    if step is not None:
        return MonotoneResult(False, step, "t^e H")
    if D is not None and (problem is None or problem.unperturbed):
        step = _first_drop(ts * D / H, n_tol)
        if step is not None:
            return MonotoneResult(False, step, "N")
    return MonotoneResult(True)


def derivative_identity(field, t: float, problem: ProblemSpec | None = None, rel_step: float = 1e-3,
                        quad: RadialQuadrature = DEFAULT_QUAD) -> float:
    """Relative mismatch between a central difference of ``H`` and ``2 D`` at ``t``."""
    dt = rel_step * t
    dH = (compute_H(field, t + dt, quad) - compute_H(field, t - dt, quad)) / (2 * dt)
    twoD = 2.0 * compute_D(field, t, problem, quad)
    return abs(dH - twoD) / max(abs(twoD), 1e-300)


def write_trace_csv(trace: FrequencyTrace, path, header_lines=()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["t", "H", "D", "N"])
        for row in trace.samples:
            w.writerow([f"{v:.16g}" for v in row])


def blowup_report(trace: FrequencyTrace, betas: BetaResult | None, lambda_rows=None, extra=None) -> dict:
    rep = {
        "gamma_fit": trace.gamma_fit,
        "matched_modes": [{"m": md.m, "k": md.k, "label": md.label, "gamma": md.gamma} for md in trace.matched_modes],
        "betas": {} if betas is None else {f"{m},{k}": [v.real, v.imag] for (m, k), v in betas.betas.items()},
        "beta_spread": None if betas is None else betas.spread,
        "lambda_errors": [] if lambda_rows is None else [list(map(float, r)) for r in lambda_rows],
    }
    if extra:
        rep.update(extra)
    return rep


def write_report_json(report: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
