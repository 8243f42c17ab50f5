"""Problem description and error types shared by all modules."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class EmheatError(Exception):
    """Base class for library errors."""


class ConfigurationError(EmheatError, ValueError):
    pass


class HardyConditionError(ConfigurationError):
    def __init__(self, margin: float):
        super().__init__(f"Hardy condition violated: mu_1 + ((N-2)/2)^2 = {margin:.6g} <= 0")
        self.margin = margin


class NumericalError(EmheatError, ArithmeticError):
    pass


class QuadratureError(NumericalError):
    pass


class TruncationError(NumericalError):
    def __init__(self, message: str, bound: float = float("nan")):
        super().__init__(message)
        self.bound = bound


@dataclass(frozen=True)
class AngularPotential:
    """Angular data ``(A, a)`` of the Hamiltonian.

    ``kind`` is one of ``"aharonov_bohm"`` (N=2, circulation ``phi``),
    ``"fourier"`` (N=2, Fourier coefficients of ``a`` and of the tangential
    component of ``A``; index ``j`` of an array of length ``2L+1`` holds the
    coefficient of ``exp(i (j-L) theta)``) or ``"sphere_constant"`` (N>=3,
    ``A = 0`` and ``a = a_const``).
    """

    kind: str
    phi: float = 0.0
    a_coeffs: np.ndarray | None = None
    A_coeffs: np.ndarray | None = None
    a_const: float = 0.0

    def __post_init__(self):
        if self.kind not in ("aharonov_bohm", "fourier", "sphere_constant"):
            raise ConfigurationError(f"unknown potential kind {self.kind!r}")
        if self.kind == "fourier":
            for name in ("a_coeffs", "A_coeffs"):
                c = getattr(self, name)
                c = np.zeros(1, complex) if c is None else np.asarray(c, dtype=complex)
                if c.ndim != 1 or c.size % 2 == 0:
                    raise ConfigurationError(f"{name} must have odd length 2L+1")
                if np.max(np.abs(c - np.conj(c[::-1])), initial=0.0) > 1e-12:
                    raise ConfigurationError(f"{name} is not Hermitian-symmetric (c_-n != conj c_n)")
                object.__setattr__(self, name, c)

    @classmethod
    def aharonov_bohm(cls, phi: float) -> "AngularPotential":
        return cls("aharonov_bohm", phi=float(phi))

    @classmethod
    def fourier(cls, a_coeffs=None, A_coeffs=None) -> "AngularPotential":
        return cls("fourier", a_coeffs=a_coeffs, A_coeffs=A_coeffs)

    @classmethod
    def constant_fourier(cls, A: float = 0.0, a: float = 0.0) -> "AngularPotential":
        return cls("fourier", a_coeffs=np.array([a], complex), A_coeffs=np.array([A], complex))

    @classmethod
    def sphere_constant(cls, a_const: float = 0.0) -> "AngularPotential":
        return cls("sphere_constant", a_const=float(a_const))

    @property
    def dimension_two(self) -> bool:
        return self.kind != "sphere_constant"


@dataclass(frozen=True)
class StaticPerturbation:
    """Radial perturbation ``h(x) = c0 + c1 |x|^(-2+eps)`` with ``eps`` in (0, 2)."""

    c0: float = 0.0
    c1: float = 0.0
    eps: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.eps < 2.0:
            raise ConfigurationError(f"perturbation exponent eps={self.eps} must lie in (0, 2)")

    @property
    def is_zero(self) -> bool:
        return self.c0 == 0.0 and self.c1 == 0.0

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return self.c0 + self.c1 * r ** (self.eps - 2.0)


@dataclass(frozen=True)
class ProblemSpec:
    """Dimension, angular potentials, optional static perturbation and time horizon."""

    N: int
    potential: AngularPotential
    h: StaticPerturbation | None = None
    T: float = 1.0
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.N < 2:
            raise ConfigurationError("dimension N must be >= 2")
        if self.potential.dimension_two and self.N != 2:
            raise ConfigurationError(f"{self.potential.kind} potentials require N = 2")
        if not self.potential.dimension_two and self.N < 3:
            raise ConfigurationError("sphere_constant potentials require N >= 3")
        if self.T <= 0:
            raise ConfigurationError("time horizon T must be positive")

    @property
    def unperturbed(self) -> bool:
        return self.h is None or self.h.is_zero
