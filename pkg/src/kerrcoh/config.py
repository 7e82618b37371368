"""Strict TOML run configurations for the command-line front end.

Every table rejects unknown keys.  Rates, detunings and Rabi frequencies are
in units of the first excited-state decay rate unless noted.  Complex Rabi
frequencies may be written as a number or as ``[re, im]``.
"""
from __future__ import annotations

import sys
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .rubidium import D1_WAVELENGTH_CM

ComplexLike = Union[float, tuple[float, float]]


class ConfigError(ValueError):
    pass


def as_complex(value: ComplexLike) -> complex:
    if isinstance(value, tuple):
        return complex(value[0], value[1])
    return complex(value)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Sweep(_Strict):
    variable: str
    min: float
    max: float
    points: int = Field(ge=2)
    spacing: Literal["linear", "log"] = "linear"

    @model_validator(mode="after")
    def _check(self):
        if not self.min < self.max:
            raise ValueError("sweep needs min < max")
        if self.spacing == "log" and self.min <= 0:
            raise ValueError("log sweep needs min > 0")
        return self

    def values(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.min, self.max, self.points)
        return np.linspace(self.min, self.max, self.points)


# -- dark-state ------------------------------------------------------------------


class MSchemeParams(_Strict):
    gamma1: float = Field(1.0, gt=0)
    gamma2: float = Field(1.0, gt=0)
    delta: float = 0.0


class MFields(_Strict):
    alpha1: ComplexLike
    alpha2: ComplexLike
    omega1: ComplexLike
    omega2: ComplexLike


class DarkStateChecks(_Strict):
    max_probe_ratio: float = Field(0.2, gt=0)
    max_detuning_fraction: float = Field(0.1, gt=0)


class DarkStateConfig(_Strict):
    scheme: MSchemeParams = MSchemeParams()
    fields: MFields
    checks: DarkStateChecks = DarkStateChecks()


# -- susceptibility ---------------------------------------------------------------


class MediumSection(_Strict):
    density: float = Field(gt=0)
    wavelength: float = Field(gt=0)
    doppler_width: float = Field(gt=0)
    gamma0: float = Field(0.0, ge=0)
    gamma1: float = Field(1.0, gt=0)
    gamma2: float = Field(1.0, gt=0)


class SusceptibilityFields(_Strict):
    alpha1: ComplexLike
    omega1: ComplexLike
    omega2: ComplexLike


class SusceptibilityPoint(_Strict):
    delta: float = 0.0
    Delta: float = 0.0


SUSCEPTIBILITY_SWEEP_VARIABLES = ("delta", "Delta", "omega1", "omega2", "alpha1", "gamma0", "doppler_width")


class EITSection(_Strict):
    safety_factor: float = Field(3.0, gt=0)


class SusceptibilityConfig(_Strict):
    medium: MediumSection
    fields: SusceptibilityFields
    point: SusceptibilityPoint = SusceptibilityPoint()
    sweep: Sweep
    eit: EITSection = EITSection()

    @model_validator(mode="after")
    def _check_variable(self):
        if self.sweep.variable not in SUSCEPTIBILITY_SWEEP_VARIABLES:
            raise ValueError(
                f"sweep.variable must be one of {list(SUSCEPTIBILITY_SWEEP_VARIABLES)}, got {self.sweep.variable!r}"
            )
        return self


# -- rotation ---------------------------------------------------------------------


class AtomSection(_Strict):
    gamma: float = Field(1.0, gt=0)
    gamma0: float = Field(1e-4, ge=0)
    zeeman_rate: float = 1.0
    excited_zeeman_rate: float = 0.0
    ground_relaxation: Literal["isotropic", "dephasing"] = "isotropic"


class LightSection(_Strict):
    rabi: float = Field(0.1, gt=0)


class CellSection(_Strict):
    density: float = Field(1e9, gt=0)
    length: float = Field(1.0, gt=0)
    wavelength: float = Field(D1_WAVELENGTH_CM, gt=0)


class DopplerSection(_Strict):
    enabled: bool = False
    width: float = Field(10.0, gt=0)
    points: Optional[int] = Field(None, ge=1)
    grid: Literal["uniform", "gauss-hermite"] = "uniform"


class ScanSection(_Strict):
    q: Optional[list[float]] = None
    min: Optional[float] = None
    max: Optional[float] = None
    points: Optional[int] = Field(None, ge=2)

    @model_validator(mode="after")
    def _check(self):
        explicit = self.q is not None
        ranged = any(v is not None for v in (self.min, self.max, self.points))
        if explicit == ranged:
            raise ValueError("scan needs either q = [...] or all of min, max, points")
        if ranged and (self.min is None or self.max is None or self.points is None):
            raise ValueError("scan range needs min, max and points")
        if ranged and not self.min < self.max:
            raise ValueError("scan needs min < max")
        return self

    def values(self) -> list[float]:
        if self.q is not None:
            return list(self.q)
        return [float(x) for x in np.linspace(self.min, self.max, self.points)]


class DerivativeSection(_Strict):
    b_step: Optional[float] = Field(None, gt=0)


class ModelSection(_Strict):
    subsystem: Literal["full", "lambda", "m"] = "full"


class RotationRunConfig(_Strict):
    atom: AtomSection = AtomSection()
    light: LightSection = LightSection()
    cell: CellSection = CellSection()
    doppler: DopplerSection = DopplerSection()
    scan: ScanSection
    derivative: DerivativeSection = DerivativeSection()
    model: ModelSection = ModelSection()


# -- phase-gate -------------------------------------------------------------------


class GateSection(_Strict):
    eta: float


class PhysicalGate(_Strict):
    delta: float
    xi1: float
    xi2: float
    omega1: ComplexLike
    omega2: ComplexLike
    t: float


class PhaseGateConfig(_Strict):
    gate: Optional[GateSection] = None
    physical: Optional[PhysicalGate] = None
    cutoff: int = Field(8, ge=1)

    @model_validator(mode="after")
    def _one_source(self):
        if (self.gate is None) == (self.physical is None):
            raise ValueError("give exactly one of [gate] (eta) or [physical]")
        return self


MODELS = {
    "dark-state": DarkStateConfig,
    "susceptibility": SusceptibilityConfig,
    "rotation": RotationRunConfig,
    "phase-gate": PhaseGateConfig,
}


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        key = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{key}: {err['msg']}")
    return "; ".join(lines)


def parse_config(command: str, text: str, source: str = "<config>") -> BaseModel:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    try:
        return MODELS[command].model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"{source}: {_format_validation(exc)}") from exc


def load_config(command: str, path: str | Path) -> BaseModel:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(command, text, str(path))


def flatten(model: BaseModel) -> list[tuple[str, object]]:
    """Fully-resolved config as sorted-by-section (dotted key, value) pairs."""
    out = []

    def walk(prefix, value):
        if isinstance(value, dict):
            for k, v in value.items():
                walk(f"{prefix}.{k}" if prefix else k, v)
        else:
            out.append((prefix, value))

    walk("", model.model_dump())
    return out
