"""Exponentially scaled modified Bessel function of the first kind."""

import math

import numpy as np
from scipy.special import gammaln

from . import kernels
from .problem import ConfigurationError


def bessel_I_scaled(nu, z):
    """``exp(-z) I_nu(z)`` for ``nu >= 0`` and ``z >= 0``.

    Power series up to ``z = 30`` (and beyond it while ``4 nu^2 >= z``),
    large-argument expansion otherwise. Scalars in, scalar out.
    """
    nu_a = np.asarray(nu, dtype=float)
    z_a = np.asarray(z, dtype=float)
    if np.any(nu_a < 0) or np.any(z_a < 0) or not (np.all(np.isfinite(nu_a)) and np.all(np.isfinite(z_a))):
        raise ConfigurationError("bessel_I_scaled needs finite nu >= 0 and z >= 0")
    out = kernels.ive(nu_a, z_a)
    return float(out) if out.ndim == 0 else out


def series_reference(nu: float, z: float, terms: int = 400) -> float:
    """Direct evaluation of ``exp(-z) sum (z/2)^{2m+nu} / (m! Gamma(m+nu+1))`` (slow oracle)."""
    total = math.fsum(
        math.exp((2 * m + nu) * math.log(z / 2) - math.lgamma(m + 1) - math.lgamma(m + nu + 1) - z)
        for m in range(terms)
    )
    return total


def tail_bound(nu, z):
    """Upper bound for ``exp(-z) I_nu(z)``.

    From the series, ``I_nu(z) <= (z/2)^nu / Gamma(nu+1) * min(exp(z), exp(z^2/(4(nu+1))))``;
    the bound is capped at 1.
    """
    nu = np.asarray(nu, dtype=float)
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore"):
        logb = nu * np.log(np.maximum(z, 1e-300) / 2) - gammaln(nu + 1)
    logb = logb + np.minimum(0.0, z * z / (4 * (nu + 1)) - z)
    return np.minimum(1.0, np.exp(np.minimum(logb, 0.0)))
