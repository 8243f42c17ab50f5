"""Radial Gauss-Laguerre quadrature against Gaussian weights.

Every weighted integral in the package reduces to

    t^{-N/2} int_0^inf F(r) r^{P} r^{N-1} exp(-rate r^2 / (4t)) dr

with ``F`` smooth in ``r^2``. The substitution ``s = rate r^2/(4t)`` turns it
into a generalized Gauss-Laguerre integral with weight ``s^a e^{-s}``,
``a = (P+N)/2 - 1``, which is exact when ``F`` is a polynomial in ``r^2``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_genlaguerre

from .problem import QuadratureError


@lru_cache(maxsize=512)
def _gl_rule(order: int, a: float):
    s, w = roots_genlaguerre(order, a)
    return s, w


def gauss_laguerre(order: int, a: float):
    """Nodes and weights of the ``order``-point rule for weight ``s^a e^{-s}``."""
    if a <= -1.0:
        raise QuadratureError(f"non-integrable endpoint power (a={a:.6g} <= -1)")
    return _gl_rule(int(order), round(float(a), 13))


class RadialQuadrature:
    """Order-doubling checked radial quadrature.

    Parameters
    ----------
    order : int
        Base rule size; the check compares against ``2*order``.
    check : bool
        Disable to skip the doubled rule (the base result is then returned).
    tol : float
        Relative disagreement that triggers :class:`QuadratureError`.
    """

    def __init__(self, order: int = 48, check: bool = True, tol: float = 1e-7):
        self.order = int(order)
        self.check = check
        self.tol = tol

    def _once(self, fun, N, t, power, rate, order):
        a = (power + N) / 2.0 - 1.0
        s, w = gauss_laguerre(order, a)
        r = np.sqrt(4.0 * t * s / rate)
        vals = np.asarray(fun(r))
        scale = 0.5 * (4.0 * t / rate) ** ((power + N) / 2.0) * t ** (-N / 2.0)
        total = scale * np.tensordot(w, vals, axes=(0, 0))
        mag = scale * np.tensordot(w, np.abs(vals), axes=(0, 0))
        return total, mag

    def integrate(self, fun, N: int, t: float = 1.0, power: float = 0.0, rate: float = 1.0):
        """``t^{-N/2} int F(r) r^{power+N-1} exp(-rate r^2/4t) dr``.

        ``fun`` maps node radii of shape ``(n,)`` to values of shape ``(n, ...)``.
        """
        if t <= 0 or rate <= 0:
            raise QuadratureError("t and rate must be positive")
        lo, mag = self._once(fun, N, t, power, rate, self.order)
        if not self.check:
            return lo
        hi, mag = self._once(fun, N, t, power, rate, 2 * self.order)
        err = np.max(np.abs(hi - lo) - self.tol * np.maximum(np.abs(hi), mag), initial=-1.0)
        if err > 0 or not np.all(np.isfinite(hi)):
            raise QuadratureError(
                f"radial quadrature did not converge (order {self.order} vs {2 * self.order}: "
                f"difference {np.max(np.abs(hi - lo)):.3g})"
            )
        return hi

    def nodes(self, N: int, t: float = 1.0, power: float = 0.0, rate: float = 1.0, order: int | None = None):
        """Radii and weights so that ``sum(w * F(r))`` equals :meth:`integrate` without the check."""
        order = order or self.order
        a = (power + N) / 2.0 - 1.0
        s, w = gauss_laguerre(order, a)
        scale = 0.5 * (4.0 * t / rate) ** ((power + N) / 2.0) * t ** (-N / 2.0)
        return np.sqrt(4.0 * t * s / rate), scale * w


DEFAULT_QUAD = RadialQuadrature()


def gaussian_weight(x, t: float):
    """``G(x,t) = t^{-N/2} exp(-|x|^2/(4t))`` for points ``x`` of shape ``(..., N)``."""
    x = np.asarray(x, dtype=float)
    N = x.shape[-1]
    return t ** (-N / 2.0) * np.exp(-np.sum(x * x, axis=-1) / (4.0 * t))


def gaussian_weight_gradient(x, t: float):
    """``grad G = -(x / 2t) G``."""
    x = np.asarray(x, dtype=float)
    return -(x / (2.0 * t)) * gaussian_weight(x, t)[..., None]
