"""Crank-Nicolson oracle for the forward equation, one angular mode at a time.

Each angular mode ``u_k(r, t)`` solves

    u_t = u_rr + (N-1)/r u_r - mu_k u / r^2 + h(r) u

on ``[r_min, r_max]``. The spatial operator is a conservative finite-volume
discretization on a grid that is geometric near the origin and uniform
outside. At ``r_min`` the flux matches the leading behaviour
``u ~ c r^{-alpha_k}`` (``u_r = -alpha_k u / r``); ``u = 0`` at ``r_max``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline

from .angular import angular_spectrum, psi_values
from .fields import ModalField, angular_rule, reduce_to_modes as _reduce_pointwise
from .heat_kernel import KernelConfig, evaluate_solution_kernel, expand_datum, solution_field
from .kernels import theta_march
from .ou import exponents, gamma_eigenvalue
from .problem import ConfigurationError, NumericalError, ProblemSpec, StaticPerturbation
from .quadrature import RadialQuadrature


@dataclass(frozen=True)
class RadialGrid:
    """Geometric nodes ``r_min * ratio^j`` up to spacing ``dr``, then uniform nodes to ``r_max``."""

    r_min: float
    r_max: float
    ratio: float = 1.05
    dr: float = 0.01
    r: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 < self.r_min < self.r_max:
            raise ConfigurationError("need 0 < r_min < r_max")
        if not 1.0 < self.ratio <= 1.2:
            raise ConfigurationError("geometric ratio must lie in (1, 1.2]")
        J = max(int(math.ceil(math.log(self.dr / (self.r_min * (self.ratio - 1.0))) / math.log(self.ratio))), 0)
        geo = self.r_min * self.ratio ** np.arange(J + 1)
        if geo[-1] >= self.r_max:
            raise ConfigurationError("r_max too small for the requested spacing")
        n_u = max(int(round((self.r_max - geo[-1]) / self.dr)), 1)
        uni = np.linspace(geo[-1], self.r_max, n_u + 1)[1:]
        object.__setattr__(self, "r", np.concatenate([geo, uni]))
        object.__setattr__(self, "_n_geo", J)
        object.__setattr__(self, "_n_uni", n_u)

    @classmethod
    def default(cls, t_final: float, r_min_factor: float = 1e-6, ratio: float = 1.05, dr: float = 0.01):
        r_max = 12.0 * math.sqrt(t_final + 1.0)
        return cls(r_min_factor * r_max, r_max, ratio, dr)

    def refined(self) -> "RadialGrid":
        """Nested refinement: every cell split in two."""
        g = object.__new__(RadialGrid)
        object.__setattr__(g, "r_min", self.r_min)
        object.__setattr__(g, "r_max", self.r_max)
        object.__setattr__(g, "ratio", math.sqrt(self.ratio))
        object.__setattr__(g, "dr", self.dr / 2)
        geo = self.r_min * g.ratio ** np.arange(2 * self._n_geo + 1)
        uni = np.linspace(geo[-1], self.r_max, 2 * self._n_uni + 1)[1:]
        object.__setattr__(g, "r", np.concatenate([geo, uni]))
        object.__setattr__(g, "_n_geo", 2 * self._n_geo)
        object.__setattr__(g, "_n_uni", 2 * self._n_uni)
        return g

    @property
    def n_points(self) -> int:
        return len(self.r)

    def faces(self):
        r = self.r
        mid = 0.5 * (r[1:] + r[:-1])
        return np.concatenate([[r[0]], mid, [r[-1]]])

    def volumes(self, N: int) -> np.ndarray:
        f = self.faces()
        return (f[1:] ** N - f[:-1] ** N) / N


def _operator(grid: RadialGrid, N: int, mu: float, alpha: float, h: StaticPerturbation | None, bc: str):
    """Tridiagonal ``(lo, di, up)`` of ``L`` on the interior unknowns (all nodes but ``r_max``)."""
    r = grid.r
    f = grid.faces()
    V = (f[1:] ** N - f[:-1] ** N) / N
    if N == 2:
        W = np.log(f[1:] / f[:-1])
    else:
        W = (f[1:] ** (N - 2) - f[:-1] ** (N - 2)) / (N - 2)
    c = f[1:-1] ** (N - 1) / np.diff(r)  # face coefficients between nodes i, i+1
    n = len(r) - 1  # unknowns 0..n-1, node n is the Dirichlet boundary
    lo = np.zeros(n)
    up = np.zeros(n)
    di = np.zeros(n)
    lo[1:] = c[: n - 1]
    up[: n] = c[:n]
    di[:] = -(c[:n] + np.concatenate([[0.0], c[: n - 1]]))
    if bc == "robin":
        di[0] += alpha * r[0] ** (N - 2)
    elif bc != "dirichlet":
        raise ConfigurationError(f"unknown boundary condition {bc!r}")
    di -= mu * W[:n]
    if h is not None and not h.is_zero:
        di += h(r[:n]) * V[:n]
    lo /= V[:n]
    di /= V[:n]
    up /= V[:n]
    if bc == "dirichlet":
        # zero row keeps u(r_min) = 0 for all time
        lo[0] = up[0] = di[0] = 0.0
    return lo, di, up


@dataclass
class ModeEvolution:
    """State of one angular mode on a radial grid."""

    grid: RadialGrid
    N: int
    k: int  # 1-based angular index
    mu: float
    alpha: float
    dt: float
    t: float
    u: np.ndarray
    h: StaticPerturbation | None = None
    bc: str = "robin"
    steps_taken: int = 0
    startup: int = 4
    snapshots: dict = field(default_factory=dict)

    def operator(self):
        return _operator(self.grid, self.N, self.mu, self.alpha, self.h, self.bc)


def make_mode(grid: RadialGrid, N: int, pair_index: int, pairs, profile, dt: float,
              h: StaticPerturbation | None = None, bc: str = "robin") -> ModeEvolution:
    mu = pairs[pair_index - 1].mu
    alpha, _ = exponents(mu, N)
    u = np.asarray(profile, dtype=complex).copy()
    u[-1] = 0.0
    if bc == "dirichlet":
        u[0] = 0.0
    return ModeEvolution(grid, N, pair_index, mu, alpha, dt, 0.0, u, h, bc)


def step_cn(mode: ModeEvolution, n_steps: int) -> ModeEvolution:
    """Advance ``n_steps`` Crank-Nicolson steps (the first steps of a run use backward-Euler half steps)."""
    if n_steps < 0:
        raise ConfigurationError("n_steps must be >= 0")
    lo, di, up = mode.operator()
    U = np.vstack([mode.u.real[:-1], mode.u.imag[:-1]])
    done = 0
    # Rannacher start-up: replace the first CN steps by pairs of implicit half steps
    n_start = max(0, min(mode.startup - mode.steps_taken, n_steps))
    if n_start:
        U = theta_march(lo, di, up, U, mode.dt / 2, 1.0, 2 * n_start)
        done = n_start
    if n_steps - done:
        U = theta_march(lo, di, up, U, mode.dt, 0.5, n_steps - done)
    if not np.all(np.isfinite(U)):
        raise NumericalError("non-finite values in Crank-Nicolson march")
    u = np.zeros_like(mode.u)
    u[:-1] = U[0] + 1j * U[1]
    return replace(mode, u=u, t=mode.t + n_steps * mode.dt, steps_taken=mode.steps_taken + n_steps,
                   snapshots=dict(mode.snapshots))


def evolve_to(mode: ModeEvolution, t: float) -> ModeEvolution:
    n = int(round((t - mode.t) / mode.dt))
    if n < 0 or abs(mode.t + n * mode.dt - t) > 1e-9 * max(1.0, t):
        raise ConfigurationError(f"time {t} is not on the step lattice of dt={mode.dt}")
    return step_cn(mode, n)


def reduce_to_modes(u0, pairs, N: int, r, n_angle: int = 64, tol: float = 1e-12) -> dict:
    """Radial profiles ``u_{0,k}(r) = int u0(r theta) conj(psi_k(theta)) dS`` at radii ``r``.

    Returns ``{k (1-based): complex array}`` for modes with nonzero projection.
    """
    r = np.asarray(r, dtype=float)
    if isinstance(u0, ModalField):
        return {idx + 1: u0.profile(idx, r) for idx in u0.modes}
    red = _reduce_pointwise(u0, pairs, N, n_angle, tol=tol)
    return {idx + 1: red.profile(idx, r) for idx in red.modes}


def grid_field(grid: RadialGrid, N: int, pairs, profiles: dict) -> "GridField":
    return GridField(grid, N, tuple(pairs), profiles)


@dataclass
class GridField:
    """Per-mode samples on a radial grid with spline interpolation of ``r^{alpha} u``."""

    grid: RadialGrid
    N: int
    pairs: tuple
    profiles: dict

    def profile(self, k: int, r):
        alpha, _ = exponents(self.pairs[k - 1].mu, self.N)
        rg = self.grid.r
        smooth = self.profiles[k] * rg**alpha
        re = CubicSpline(rg, smooth.real)(r)
        im = CubicSpline(rg, smooth.imag)(r)
        return (re + 1j * im) * np.asarray(r) ** (-alpha)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        rr = np.sqrt(np.sum(x * x, axis=-1))
        ang = np.arctan2(x[..., 1], x[..., 0]) if self.N == 2 else x / np.where(rr > 0, rr, 1)[..., None]
        out = np.zeros(rr.shape, complex)
        inside = rr <= self.grid.r[-1]
        for k in self.profiles:
            vals = np.zeros(rr.shape, complex)
            vals[inside] = self.profile(k, rr[inside])
            out += vals * psi_values(self.pairs[k - 1], ang)
        return out


def evolve(problem: ProblemSpec, u0, t_eval, pairs=None, k_max: int = 4, grid: RadialGrid | None = None,
           dt: float = 2.5e-3, bc: str = "robin", n_angle: int = 64, richardson: bool = False,
           jobs_map=map) -> dict:
    """Evolve every nonzero angular mode of ``u0``; returns ``{t: GridField}``.

    With ``richardson=True`` each mode is also run on the nested refinement
    with ``dt/2`` and the two are combined as ``(4 fine - coarse) / 3`` on
    the coarse nodes, cancelling the second-order error term.
    """
    t_eval = sorted(float(t) for t in np.atleast_1d(t_eval))
    pairs = pairs or angular_spectrum(problem, k_max)
    grid = grid or RadialGrid.default(t_eval[-1])
    fine = grid.refined() if richardson else None
    prof = reduce_to_modes(u0, pairs, problem.N, (fine or grid).r, n_angle)

    def march(g, k, profile, step):
        md = make_mode(g, problem.N, k, pairs, profile, step, problem.h, bc)
        out = {}
        for t in t_eval:
            md = evolve_to(md, t)
            out[t] = md.u.copy()
        return out

    def run(k):
        if fine is None:
            return k, march(grid, k, prof[k], dt)
        coarse = march(grid, k, prof[k][::2], dt)
        ref = march(fine, k, prof[k], dt / 2)
        return k, {t: (4 * ref[t][::2] - coarse[t]) / 3 for t in t_eval}

    results = dict(jobs_map(run, sorted(prof)))
    return {t: GridField(grid, problem.N, tuple(pairs), {k: results[k][t] for k in results}) for t in t_eval}


def l_weighted_distance(a, b, N: int, pairs, power: float, quad: RadialQuadrature | None = None, n_angle: int = 64):
    """``(||a-b||, ||b||)`` in ``L^2(exp(-|x|^2/4))`` via Gauss-Laguerre radii times an angular rule."""
    quad = quad or RadialQuadrature(96, check=False)
    r, w = quad.nodes(N, 1.0, power=power)
    ang, wa = angular_rule(N, n_angle)
    if N == 2:
        pts = np.stack([r[:, None] * np.cos(ang)[None, :], r[:, None] * np.sin(ang)[None, :]], axis=-1)
    else:
        pts = r[:, None, None] * ang[None, :, :]
    scale = r ** (-power / 2)
    va = a(pts) * scale[:, None]
    vb = b(pts) * scale[:, None]
    d2 = np.sum(w[:, None] * wa[None, :] * np.abs(va - vb) ** 2)
    n2 = np.sum(w[:, None] * wa[None, :] * np.abs(vb) ** 2)
    return math.sqrt(d2), math.sqrt(n2)


@dataclass
class CompareReport:
    t: list
    rel_error: list
    tolerance: float
    method: str
    passed: bool
    details: dict = field(default_factory=dict)


def compare_with_spectral(problem: ProblemSpec, u0, t_eval, tolerance: float = 1e-3, method: str = "spectral",
                          k_max: int = 4, m_max: int = 12, grid: RadialGrid | None = None, dt: float = 2.5e-3,
                          kernel_config: KernelConfig | None = None, pairs=None, richardson: bool = True,
                          jobs_map=map) -> CompareReport:
    """Relative weighted distance between the CN oracle and the spectral (or kernel) solution."""
    if not problem.unperturbed:
        raise ConfigurationError("the representation formula is for h = 0")
    if method not in ("spectral", "kernel"):
        raise ConfigurationError("method must be 'spectral' or 'kernel'")
    N = problem.N
    pairs = pairs or angular_spectrum(problem, k_max)
    t_eval = sorted(float(t) for t in np.atleast_1d(t_eval))
    cn = evolve(problem, u0, t_eval, pairs, k_max, grid, dt, richardson=richardson, jobs_map=jobs_map)
    power = 2 * max(0.0, -min(exponents(p.mu, N)[0] for p in pairs[:1]))
    if method == "spectral":
        state = expand_datum(u0, pairs, N, m_max)
        sol = solution_field(state)
    errs = []
    for t in t_eval:
        if method == "spectral":
            ref = sol.at(t)
        else:
            cfg = kernel_config or KernelConfig(k_max=len(pairs))
            ref = _KernelSolution(u0, t, pairs, N, cfg)
        d, n = l_weighted_distance(cn[t], ref, N, pairs, power)
        errs.append(d / n if n > 0 else d)
    passed = all(e <= tolerance for e in errs)
    flag = min(exponents(p.mu, N)[1] for p in pairs) < 0.05
    return CompareReport(t_eval, errs, tolerance, method, passed, {"low_confidence": flag})


class _KernelSolution:
    def __init__(self, u0, t, pairs, N, cfg):
        self.u0, self.t, self.pairs, self.N, self.cfg = u0, t, pairs, N, cfg

    def __call__(self, pts):
        flat = pts.reshape(-1, self.N)
        vals = evaluate_solution_kernel(self.u0, flat, self.t, self.pairs, self.N, self.cfg)
        return vals.reshape(pts.shape[:-1])


def project_on_mode(field_t: GridField, t: float, m: int, k: int, pairs, N: int) -> complex:
    """Coefficient of ``phi(., t)`` on ``Ut_{m,k}``: ``(1+t)^{-N/2} int u(x,t) conj(Vt(x/sqrt(1+t))) dx``."""
    md = gamma_eigenvalue(m, k, pairs, N)
    g = field_t.grid
    V = g.volumes(N)
    s = math.sqrt(1.0 + t)
    prof = field_t.profiles.get(k)
    if prof is None:
        return 0j
    vt = md.radial(g.r / s) / math.sqrt(md.norm2)
    return complex((1.0 + t) ** (-N / 2) * np.sum(V * prof * vt))


def coefficient_decay(problem: ProblemSpec, m: int, k: int, t_samples, pairs=None, k_max: int = 4,
                      grid: RadialGrid | None = None, dt: float = 2.5e-3) -> dict:
    """Evolve ``Ut_{m,k}`` with CN and fit the decay exponent of its own coefficient."""
    from .fields import ut_field

    pairs = pairs or angular_spectrum(problem, k_max)
    md = gamma_eigenvalue(m, k, pairs, problem.N)
    ts = sorted(float(t) for t in t_samples)
    cn = evolve(problem, ut_field(md, pairs), ts, pairs, k_max, grid, dt)
    c = np.array([abs(project_on_mode(cn[t], t, m, k, pairs, problem.N)) for t in ts])
    slope = np.polyfit(np.log1p(ts), np.log(c), 1)[0]
    return {"t": ts, "coeff": c, "fitted_exponent": float(-slope), "gamma_tilde": md.gamma_tilde}


def convergence_study(N: int, mu: float, u_init, u_exact, t: float, grid: RadialGrid, dt: float, levels: int = 3,
                      bc: str = "robin") -> dict:
    """Errors against an exact profile on nested grids with ``dt`` halved alongside ``dr``."""
    from .angular import AngularEigenpair

    pair = AngularEigenpair(1, mu, np.ones(1), 0, N=N)
    errs = []
    g = grid
    for _ in range(levels):
        md = make_mode(g, N, 1, [pair], u_init(g.r), dt, None, bc)
        md = evolve_to(md, t)
        V = g.volumes(N)
        diff = md.u - u_exact(g.r, t)
        errs.append(math.sqrt(np.sum(V * np.exp(-g.r**2 / 4) * np.abs(diff) ** 2)))
        g = g.refined()
        dt /= 2
    errs = np.array(errs)
    return {"errors": errs, "orders": np.log2(errs[:-1] / errs[1:])}


def write_snapshot_csv(path, field_t: GridField, t: float, header_lines=()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["t", "k", "r", "re_u", "im_u"])
        for k, prof in sorted(field_t.profiles.items()):
            for rr, v in zip(field_t.grid.r, prof):
                w.writerow([f"{t:.16g}", k, f"{rr:.16g}", f"{v.real:.16g}", f"{v.imag:.16g}"])
