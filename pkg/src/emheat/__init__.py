"""Heat equations with singular electromagnetic potentials.

Angular spectra, Ornstein-Uhlenbeck eigenbases, the Bessel-series heat
kernel, Almgren-Poon frequency traces, a Crank-Nicolson reference solver and
weighted functional inequalities.
"""

from ._accel import backend
from .angular import AngularEigenpair, angular_spectrum, solve_ab, solve_fourier, solve_sphere_constant
from .problem import (
    AngularPotential,
    ConfigurationError,
    EmheatError,
    HardyConditionError,
    NumericalError,
    ProblemSpec,
    QuadratureError,
    StaticPerturbation,
    TruncationError,
)

__version__ = "0.1.0"

__all__ = [
    "AngularEigenpair",
    "AngularPotential",
    "ConfigurationError",
    "EmheatError",
    "HardyConditionError",
    "NumericalError",
    "ProblemSpec",
    "QuadratureError",
    "StaticPerturbation",
    "TruncationError",
    "angular_spectrum",
    "backend",
    "solve_ab",
    "solve_fourier",
    "solve_sphere_constant",
]
