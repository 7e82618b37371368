"""Doppler-broadened third-order susceptibilities of the M and N schemes.

Sign convention: absorption appears as a negative imaginary part, so for
``gamma0 > 0`` and ``delta = 0`` the M-scheme value has ``Im(chi) < 0``.
Values are dimensionless (Gaussian units).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Literal, Mapping

from .scheme_model import SchemeError


@dataclass(frozen=True)
class MediumParams:
    """Atomic vapor parameters.

    density is atoms per volume and wavelength (of the second probe) in the
    matching length unit; ``doppler_width`` and the rates share one angular
    frequency unit.
    """

    density: float
    wavelength: float
    doppler_width: float
    gamma2: float = 1.0
    gamma0: float = 0.0
    gamma1: float = 1.0

    def __post_init__(self):
        for name in ("density", "wavelength", "doppler_width", "gamma2", "gamma1"):
            if not getattr(self, name) > 0:
                raise SchemeError(f"{name} must be positive")
        if not self.gamma0 >= 0:
            raise SchemeError("gamma0 must be >= 0")

    @property
    def prefactor(self) -> float:
        """3 N lambda^3 / (8 pi^2)."""
        return 3.0 / (8 * math.pi**2) * self.density * self.wavelength**3

    def validity_warnings(self, doppler_ratio: float = 10.0) -> tuple[str, ...]:
        if self.doppler_width < doppler_ratio * self.gamma1:
            return (
                f"Doppler width {self.doppler_width:.4g} is not >> gamma1 "
                f"(ratio {self.doppler_width / self.gamma1:.3g} < {doppler_ratio})",
            )
        return ()


@dataclass(frozen=True)
class Susceptibility:
    value: complex
    scheme_kind: Literal["M", "N"]
    params: MediumParams
    inputs: Mapping[str, complex] = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "inputs", MappingProxyType(dict(self.inputs)))


@dataclass(frozen=True)
class EITCheck:
    passed: bool
    margin: float
    threshold: float
    safety_factor: float


def probe_b2_population(alpha1: complex, omega1: complex) -> float:
    """Weak-probe population |alpha1|^2/|omega1|^2 pumped into b2."""
    if omega1 == 0:
        raise SchemeError("omega1 must be nonzero")
    return abs(alpha1) ** 2 / abs(omega1) ** 2


def check_eit(
    omega1: complex, doppler_width: float, gamma0: float, gamma1: float, safety_factor: float = 3.0
) -> EITCheck:
    """EIT in a Doppler-broadened medium: |omega1| >= c * W_d * sqrt(gamma0/gamma1).

    ``margin`` is |omega1| over the safety-scaled threshold; the check passes
    when it is at least 1.
    """
    threshold = doppler_width * math.sqrt(gamma0 / gamma1)
    if threshold == 0:
        return EITCheck(True, math.inf, 0.0, safety_factor)
    margin = abs(omega1) / (safety_factor * threshold)
    return EITCheck(margin >= 1.0, margin, threshold, safety_factor)


def _warnings(params: MediumParams, omega1: complex, alpha1: complex, eit_safety: float) -> tuple[str, ...]:
    notes = list(params.validity_warnings())
    eit = check_eit(omega1, params.doppler_width, params.gamma0, params.gamma1, eit_safety)
    if not eit.passed:
        notes.append(f"EIT condition fails: margin {eit.margin:.3g} < 1")
    if abs(alpha1) > 0.2 * abs(omega1):
        notes.append(f"weak-probe condition violated: |alpha1/omega1| = {abs(alpha1 / omega1):.3g}")
    return tuple(notes)


def chi_m(
    params: MediumParams,
    alpha1: complex,
    omega1: complex,
    omega2: complex,
    delta: float,
    *,
    eit_safety: float = 3.0,
) -> Susceptibility:
    """Susceptibility of the second M-scheme probe."""
    if omega1 == 0:
        raise SchemeError("omega1 must be nonzero")
    g = complex(params.gamma0, delta)
    denom = g * params.doppler_width + abs(omega2) ** 2
    if denom == 0:
        raise SchemeError("chi_m denominator vanishes (gamma0 = delta = 0 and omega2 = 0)")
    value = -1j * params.prefactor * params.gamma2 * g / denom * probe_b2_population(alpha1, omega1)
    return Susceptibility(
        value=complex(value),
        scheme_kind="M",
        params=params,
        inputs={"alpha1": alpha1, "omega1": omega1, "omega2": omega2, "delta": delta},
        warnings=_warnings(params, omega1, alpha1, eit_safety),
    )


def chi_n(
    params: MediumParams, alpha1: complex, omega1: complex, Delta: float, *, eit_safety: float = 3.0
) -> Susceptibility:
    """Susceptibility of the second N-scheme probe, one-photon detuned by Delta."""
    if omega1 == 0:
        raise SchemeError("omega1 must be nonzero")
    value = (-1j * params.prefactor * params.gamma2 / complex(params.doppler_width, Delta)
             * probe_b2_population(alpha1, omega1))
    return Susceptibility(
        value=complex(value),
        scheme_kind="N",
        params=params,
        inputs={"alpha1": alpha1, "omega1": omega1, "Delta": Delta},
        warnings=_warnings(params, omega1, alpha1, eit_safety),
    )


@dataclass(frozen=True)
class InterchangeReport:
    """chi_M at delta against chi_N at the mapped one-photon detuning.

    ``mapped_Delta`` is |omega2|^2/delta; ``literal_Delta`` is the
    dimensionally inconsistent delta/|omega2|^2 reading, evaluated for
    comparison only.
    """

    chi_m: complex
    chi_n: complex
    mapped_Delta: float
    magnitude_discrepancy: float
    phase_discrepancy: float
    literal_Delta: float
    chi_n_literal: complex


def interchange_check(
    params: MediumParams, alpha1: complex, omega1: complex, omega2: complex, delta: float
) -> InterchangeReport:
    if params.gamma0 != 0:
        raise SchemeError("interchange check requires gamma0 = 0")
    if delta == 0:
        raise SchemeError("interchange check requires delta != 0")
    if omega2 == 0:
        raise SchemeError("interchange check requires omega2 != 0")
    p2 = abs(omega2) ** 2
    m = chi_m(params, alpha1, omega1, omega2, delta).value
    mapped = p2 / delta
    n = chi_n(params, alpha1, omega1, mapped).value
    scale = max(abs(m), abs(n))
    mag = abs(abs(m) - abs(n)) / scale if scale else 0.0
    phase = math.remainder(math.atan2(n.imag, n.real) - math.atan2(m.imag, m.real), 2 * math.pi) if scale else 0.0
    literal = delta / p2
    return InterchangeReport(
        chi_m=m,
        chi_n=n,
        mapped_Delta=mapped,
        magnitude_discrepancy=mag,
        phase_discrepancy=phase,
        literal_Delta=literal,
        chi_n_literal=chi_n(params, alpha1, omega1, literal).value,
    )
