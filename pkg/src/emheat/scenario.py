"""JSON scenario schema and conversion into library objects."""

from __future__ import annotations

import csv
import hashlib
import math
from pathlib import Path
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.interpolate import CubicSpline

from .angular import angular_spectrum, psi_values
from .fields import GaussianField, ut_field
from .ou import gamma_eigenvalue
from .problem import AngularPotential, ConfigurationError, ProblemSpec, StaticPerturbation

TASK_ORDER = ("spectrum", "kernel", "evolve", "frequency", "inequalities", "crosscheck")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PotentialCfg(_Strict):
    kind: Literal["aharonov_bohm", "fourier", "sphere_constant"]
    phi: float = 0.0
    a_coeffs: list[tuple[float, float]] | None = None  # (re, im) per wavenumber -L..L
    A_coeffs: list[tuple[float, float]] | None = None
    a_const: float = 0.0

    def build(self) -> AngularPotential:
        if self.kind == "aharonov_bohm":
            return AngularPotential.aharonov_bohm(self.phi)
        if self.kind == "sphere_constant":
            return AngularPotential.sphere_constant(self.a_const)
        cplx = lambda c: None if c is None else np.array([complex(*v) for v in c])  # noqa: E731
        return AngularPotential.fourier(cplx(self.a_coeffs), cplx(self.A_coeffs))


class PerturbationCfg(_Strict):
    c0: float = 0.0
    c1: float = 0.0
    eps: float = Field(1.0, gt=0.0, lt=2.0)


class ProblemCfg(_Strict):
    N: int = Field(ge=2)
    potential: PotentialCfg
    h: PerturbationCfg | None = None
    T: float = Field(1.0, gt=0.0)

    def build(self) -> ProblemSpec:
        h = None if self.h is None else StaticPerturbation(self.h.c0, self.h.c1, self.h.eps)
        return ProblemSpec(self.N, self.potential.build(), h, self.T)


class EigenmodeDatum(_Strict):
    kind: Literal["eigenmode"]
    m: int = Field(0, ge=0)
    k: int = Field(1, ge=1)


class GaussianDatum(_Strict):
    """``exp(-|x - center|^2 / (4 width))``."""

    kind: Literal["gaussian"]
    center: list[float] | None = None
    width: float = Field(1.0, gt=0.0)


class TableDatum(_Strict):
    """Per-mode radial samples read from a CSV with columns ``k, r, re, im``."""

    kind: Literal["table"]
    path: str


DatumCfg = Annotated[Union[EigenmodeDatum, GaussianDatum, TableDatum], Field(discriminator="kind")]


class TruncationCfg(_Strict):
    m_max: int = Field(8, ge=0)
    k_max: int = Field(4, ge=1)
    kernel_k_max: int = Field(40, ge=1)
    quad_order: int = Field(48, ge=8)


class KernelTaskCfg(_Strict):
    y: list[float] | None = None
    distances: list[float] = Field(default_factory=lambda: [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0])
    tail_tol: float = Field(1e-10, gt=0.0)


class EvolveTaskCfg(_Strict):
    t_eval: list[float] = Field(default_factory=lambda: [0.25, 0.5, 1.0])
    radii: list[float] = Field(default_factory=lambda: [0.25, 0.5, 1.0, 2.0, 3.0])
    dt: float = Field(2.5e-3, gt=0.0)


class FrequencyTaskCfg(_Strict):
    t0: float = Field(1.0, gt=0.0)
    rungs: int = Field(8, ge=3)
    ratio: float = Field(0.5, gt=0.0)
    lambdas: list[float] = Field(default_factory=lambda: [0.1, 0.2, 0.3, 0.4, 0.5])


class InequalityTaskCfg(_Strict):
    n_fields: int = Field(200, ge=1)
    t_values: list[float] = Field(default_factory=lambda: [0.25, 1.0, 4.0])


class CrosscheckTaskCfg(_Strict):
    t_eval: list[float] = Field(default_factory=lambda: [0.25, 0.5, 1.0])
    method: Literal["spectral", "kernel"] = "spectral"
    tolerance: float = Field(1e-3, gt=0.0)
    dt: float = Field(2.5e-3, gt=0.0)


class TaskOptions(_Strict):
    kernel: KernelTaskCfg = KernelTaskCfg()
    evolve: EvolveTaskCfg = EvolveTaskCfg()
    frequency: FrequencyTaskCfg = FrequencyTaskCfg()
    inequalities: InequalityTaskCfg = InequalityTaskCfg()
    crosscheck: CrosscheckTaskCfg = CrosscheckTaskCfg()


class Scenario(_Strict):
    name: str = "scenario"
    problem: ProblemCfg
    datum: DatumCfg | None = None
    truncation: TruncationCfg = TruncationCfg()
    tasks: list[Literal["spectrum", "kernel", "evolve", "frequency", "inequalities", "crosscheck"]]
    options: TaskOptions = TaskOptions()

    @field_validator("tasks")
    @classmethod
    def _nonempty(cls, v):
        if not v:
            raise ValueError("at least one task is required")
        return v

    @model_validator(mode="after")
    def _needs_datum(self):
        if self.datum is None and {"evolve", "frequency", "crosscheck"} & set(self.tasks):
            raise ValueError("tasks evolve/frequency/crosscheck need a datum")
        if isinstance(self.datum, GaussianDatum) and self.datum.center is not None \
                and len(self.datum.center) != self.problem.N:
            raise ValueError("gaussian center must have N coordinates")
        return self

    def ordered_tasks(self) -> list[str]:
        return [t for t in TASK_ORDER if t in self.tasks]


def scenario_hash(raw: bytes) -> str:
    return hashlib.sha256(raw).hexdigest()


def load_scenario(path) -> tuple[Scenario, str]:
    raw = Path(path).read_bytes()
    return Scenario.model_validate_json(raw), scenario_hash(raw)


class _TableField:
    def __init__(self, N, pairs, splines, r_max):
        self.N, self.pairs, self.splines, self.r_max = N, tuple(pairs), splines, r_max

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        r = np.sqrt(np.sum(x * x, axis=-1))
        ang = np.arctan2(x[..., 1], x[..., 0]) if self.N == 2 else x / np.where(r > 0, r, 1.0)[..., None]
        out = np.zeros(r.shape, complex)
        inside = r <= self.r_max
        for k, (re, im) in self.splines.items():
            vals = np.where(inside, re(np.minimum(r, self.r_max)) + 1j * im(np.minimum(r, self.r_max)), 0.0)
            out += vals * psi_values(self.pairs[k - 1], ang)
        return out


def read_table(path, N, pairs):
    rows: dict = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        for row in reader:
            rows.setdefault(int(row["k"]), []).append((float(row["r"]), float(row["re"]), float(row["im"])))
    if not rows:
        raise ConfigurationError(f"empty datum table {path}")
    splines, r_max = {}, math.inf
    for k, vals in rows.items():
        if not 1 <= k <= len(pairs):
            raise ConfigurationError(f"table mode k={k} outside the computed spectrum")
        a = np.array(sorted(vals))
        splines[k] = (CubicSpline(a[:, 0], a[:, 1]), CubicSpline(a[:, 0], a[:, 2]))
        r_max = min(r_max, a[-1, 0])
    return _TableField(N, pairs, splines, r_max)


def build_datum(cfg, problem: ProblemSpec, pairs, base_dir="."):
    """Datum at ``t = 0`` as a :class:`ModalField` (eigenmode, centered Gaussian) or a callable."""
    N = problem.N
    if isinstance(cfg, EigenmodeDatum):
        return ut_field(gamma_eigenvalue(cfg.m, cfg.k, pairs, N), pairs)
    if isinstance(cfg, GaussianDatum):
        c = np.zeros(N) if cfg.center is None else np.asarray(cfg.center, float)
        if not np.any(c):
            return GaussianField(N, pairs, cfg.width, amp=cfg.width ** (N / 2)).at(0.0)
        return lambda x: np.exp(-np.sum((np.asarray(x) - c) ** 2, axis=-1) / (4 * cfg.width)).astype(complex)
    path = Path(cfg.path)
    return read_table(path if path.is_absolute() else Path(base_dir) / path, N, pairs)


def default_pairs(problem: ProblemSpec, k_max: int):
    return angular_spectrum(problem, k_max)
