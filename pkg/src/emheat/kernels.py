"""Hot numerical kernels with a numba path and a pure-numpy path.

Two kernels dominate runtime:

* ``ive`` -- exponentially scaled modified Bessel function ``exp(-z) I_nu(z)``,
  evaluated millions of times by the representation kernel.
* ``theta_march`` -- repeated tridiagonal theta-scheme steps used by the
  Crank-Nicolson reference solver.

Both variants of each kernel are importable (``*_numba`` / ``*_numpy``) so they
can be benchmarked side by side; the public names dispatch on
:func:`emheat._accel.backend`.
"""

import math

import numpy as np
from scipy.linalg import solve_banded
from scipy.special import gammaln

from ._accel import HAVE_NUMBA, njit

#: Argument above which the large-argument expansion may replace the series.
SERIES_SWITCH = 30.0

_LOG_TINY = -700.0


# ---------------------------------------------------------------------------
# exp(-z) I_nu(z)
# ---------------------------------------------------------------------------


def _ive_scalar(nu, z):
    if z <= 0.0:
        return 1.0 if nu == 0.0 else 0.0
    if z > SERIES_SWITCH and 4.0 * nu * nu < z:
        # large-argument expansion; terms shrink monotonically under 4 nu^2 < z
        mu4 = 4.0 * nu * nu
        total = 1.0
        term = 1.0
        for k in range(1, 200):
            nxt = -term * (mu4 - (2.0 * k - 1.0) ** 2) / (8.0 * k * z)
            if abs(nxt) > abs(term):
                break
            term = nxt
            total += term
            if abs(term) < 1e-17 * abs(total):
                break
        return total / math.sqrt(2.0 * math.pi * z)
    half = 0.5 * z
    lhalf = math.log(half)
    lt = nu * lhalf - math.lgamma(nu + 1.0) - z
    total = 0.0
    linear = lt > _LOG_TINY
    t = math.exp(lt) if linear else 0.0
    m = 0
    while m < 100000:
        if linear:
            total += t
            t *= half * half / ((m + 1.0) * (m + nu + 1.0))
            if t < 1e-17 * total and m > half:
                break
        else:
            lt += 2.0 * lhalf - math.log(m + 1.0) - math.log(m + nu + 1.0)
            if lt > _LOG_TINY:
                linear = True
                t = math.exp(lt)
            elif m > half + 50.0:
                break
        m += 1
    return total


def _ive_flat(nu, z, out):
    for i in range(z.shape[0]):
        out[i] = _ive_scalar(nu[i], z[i])


if HAVE_NUMBA:
    _ive_scalar_nb = njit(_ive_scalar)

    @njit
    def _ive_flat_nb(nu, z, out):
        for i in range(z.shape[0]):
            out[i] = _ive_scalar_nb(nu[i], z[i])


def ive_numba(nu, z):
    """Compiled ``exp(-z) I_nu(z)`` for ``nu >= 0``, ``z >= 0`` (broadcasting)."""
    nu_b, z_b = np.broadcast_arrays(np.asarray(nu, dtype=float), np.asarray(z, dtype=float))
    shape = z_b.shape
    nu_f = np.ascontiguousarray(nu_b).ravel()
    z_f = np.ascontiguousarray(z_b).ravel()
    out = np.empty_like(z_f)
    if HAVE_NUMBA:
        _ive_flat_nb(nu_f, z_f, out)
    else:
        _ive_flat(nu_f, z_f, out)
    return out.reshape(shape)


def ive_numpy(nu, z):
    """Vectorized numpy ``exp(-z) I_nu(z)``; same algorithm as :func:`ive_numba`."""
    nu_b, z_b = np.broadcast_arrays(np.asarray(nu, dtype=float), np.asarray(z, dtype=float))
    nu_f = nu_b.ravel().copy()
    z_f = z_b.ravel().copy()
    out = np.zeros_like(z_f)

    zero = z_f <= 0.0
    out[zero] = (nu_f[zero] == 0.0).astype(float)

    hank = (~zero) & (z_f > SERIES_SWITCH) & (4.0 * nu_f**2 < z_f)
    if np.any(hank):
        zh, mu4 = z_f[hank], 4.0 * nu_f[hank] ** 2
        total = np.ones_like(zh)
        term = np.ones_like(zh)
        live = np.ones(zh.shape, dtype=bool)
        for k in range(1, 200):
            nxt = -term * (mu4 - (2.0 * k - 1.0) ** 2) / (8.0 * k * zh)
            live &= np.abs(nxt) <= np.abs(term)
            term = np.where(live, nxt, term)
            total = total + np.where(live, term, 0.0)
            live &= np.abs(term) >= 1e-17 * np.abs(total)
            if not live.any():
                break
        out[hank] = total / np.sqrt(2.0 * np.pi * zh)

    ser = (~zero) & (~hank)
    if np.any(ser):
        zs, ns = z_f[ser], nu_f[ser]
        lhalf = np.log(0.5 * zs)
        total = np.zeros_like(zs)
        m_stop = int(np.max(0.5 * zs + 12.0 * np.sqrt(zs + 1.0) + 40.0))
        for m in range(m_stop + 1):
            lt = (2 * m + ns) * lhalf - gammaln(m + 1.0) - gammaln(m + ns + 1.0) - zs
            total += np.exp(np.maximum(lt, -745.0)) * (lt > -745.0)
        out[ser] = total
    return out.reshape(z_b.shape)


def ive(nu, z):
    """``exp(-z) I_nu(z)`` on the active backend."""
    return ive_numba(nu, z) if HAVE_NUMBA else ive_numpy(nu, z)


# ---------------------------------------------------------------------------
# theta-scheme march for u_t = L u with tridiagonal L
# ---------------------------------------------------------------------------


def _march_loop(lo, di, up, u, dt, theta, n_steps):
    n = di.shape[0]
    a = -theta * dt * lo
    b = 1.0 - theta * dt * di
    c = -theta * dt * up
    ex = (1.0 - theta) * dt
    cp = np.empty(n)
    den = np.empty(n)
    den[0] = b[0]
    cp[0] = c[0] / den[0]
    for i in range(1, n):
        den[i] = b[i] - a[i] * cp[i - 1]
        cp[i] = c[i] / den[i]
    rhs = np.empty(n)
    for _ in range(n_steps):
        for v in range(u.shape[0]):
            row = u[v]
            for i in range(n):
                acc = di[i] * row[i]
                if i > 0:
                    acc += lo[i] * row[i - 1]
                if i < n - 1:
                    acc += up[i] * row[i + 1]
                rhs[i] = row[i] + ex * acc
            rhs[0] = rhs[0] / den[0]
            for i in range(1, n):
                rhs[i] = (rhs[i] - a[i] * rhs[i - 1]) / den[i]
            row[n - 1] = rhs[n - 1]
            for i in range(n - 2, -1, -1):
                row[i] = rhs[i] - cp[i] * row[i + 1]
    return u


if HAVE_NUMBA:
    _march_loop_nb = njit(_march_loop)


def theta_march_numba(lo, di, up, u, dt, theta, n_steps):
    """Advance each row of ``u`` by ``n_steps`` theta-scheme steps (compiled Thomas sweeps).

    ``(L v)_i = lo[i] v[i-1] + di[i] v[i] + up[i] v[i+1]``; ``lo[0]`` and ``up[-1]`` are ignored.
    """
    u = np.array(u, dtype=float, order="C", ndmin=2)
    args = (np.ascontiguousarray(lo, float), np.ascontiguousarray(di, float),
            np.ascontiguousarray(up, float), u, float(dt), float(theta), int(n_steps))
    if HAVE_NUMBA:
        return _march_loop_nb(*args)
    return _march_loop(*args)


def theta_march_numpy(lo, di, up, u, dt, theta, n_steps):
    """Same contract as :func:`theta_march_numba`, using ``scipy.linalg.solve_banded``."""
    u = np.array(u, dtype=float, ndmin=2)
    n = di.shape[0]
    ab = np.zeros((3, n))
    ab[0, 1:] = -theta * dt * up[:-1]
    ab[1] = 1.0 - theta * dt * di
    ab[2, :-1] = -theta * dt * lo[1:]
    ex = (1.0 - theta) * dt
    x = u.T.copy()
    for _ in range(n_steps):
        lx = di[:, None] * x
        lx[1:] += lo[1:, None] * x[:-1]
        lx[:-1] += up[:-1, None] * x[1:]
        x = solve_banded((1, 1), ab, x + ex * lx, check_finite=False)
    return np.ascontiguousarray(x.T)


def theta_march(lo, di, up, u, dt, theta, n_steps):
    if HAVE_NUMBA:
        return theta_march_numba(lo, di, up, u, dt, theta, n_steps)
    return theta_march_numpy(lo, di, up, u, dt, theta, n_steps)
