"""87Rb D1 F=2 -> F'=1 Zeeman model and nonlinear magneto-optical rotation.

Elliptically polarized light is split into sigma+ and sigma- components with
|E+-|^2 = (1 +- q)|E0|^2 / 2.  Selection rules leave two independent chains:
a Lambda (g-1 - e0 - g+1) and an M (g-2 - e-1 - g0 - e+1 - g+2); spontaneous
decay (including pi branches) and ground relaxation tie them together.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal, Sequence

import numpy as np
from sympy import Rational
from sympy.physics.wigner import clebsch_gordan

from ._validity import ValidityWarning
from .lindblad import (
    DensityMatrix,
    GroundRelaxation,
    SteadyStateProblem,
    VelocityGrid,
    velocity_class_states,
)
from .scheme_model import Coupling, FieldMode, Level, LevelScheme

F_GROUND = 2
F_EXCITED = 1
D1_WAVELENGTH_CM = 794.978851e-7

Subsystem = Literal["full", "lambda", "m"]

# Couplings of the M chain; removing all of them leaves the isolated Lambda.
M_CHAIN = {("sigma+", -2), ("sigma+", 0), ("sigma-", 0), ("sigma-", 2)}
LAMBDA_CHAIN = {("sigma+", -1), ("sigma-", 1)}


class ConvergenceError(RuntimeError):
    pass


def ground_label(m: int) -> str:
    return f"g{m:+d}" if m else "g0"


def excited_label(m: int) -> str:
    return f"e{m:+d}" if m else "e0"


@lru_cache(maxsize=None)
def clebsch(f: int, m: int, q: int, fp: int) -> float:
    """<f m; 1 q | fp m+q>, proportional to the dipole element for polarization q."""
    return float(clebsch_gordan(Rational(f), Rational(1), Rational(fp), Rational(m), Rational(q), Rational(m + q)))


@dataclass(frozen=True)
class ZeemanScheme:
    scheme: LevelScheme
    gamma: float
    gamma0: float
    zeeman_rate: float
    excited_zeeman_rate: float = 0.0
    subsystem: Subsystem = "full"

    @property
    def sigma_couplings(self) -> tuple[Coupling, ...]:
        return self.scheme.couplings

    def zeeman_shifts(self, B: float) -> dict[str, float]:
        """Linear Zeeman energies m * rate * B of every sublevel."""
        shifts = {ground_label(m): m * self.zeeman_rate * B for m in range(-F_GROUND, F_GROUND + 1)}
        for m in range(-F_EXCITED, F_EXCITED + 1):
            shifts[excited_label(m)] = m * self.excited_zeeman_rate * B
        return shifts


def build_rb_scheme(
    gamma: float = 1.0,
    gamma0: float = 1e-4,
    zeeman_rate: float = 1.0,
    *,
    excited_zeeman_rate: float = 0.0,
    subsystem: Subsystem = "full",
) -> ZeemanScheme:
    """Eight-level F=2 -> F'=1 scheme with Clebsch-Gordan weighted sigma+- couplings.

    Spontaneous decay branches follow the squared Clebsch-Gordan
    coefficients over all three polarizations.  ``subsystem="lambda"`` keeps
    only the m=+-1 Lambda couplings (the isolated-Lambda comparator) and
    ``"m"`` only the M chain; decay channels are unchanged.
    """
    levels = [Level(ground_label(m), "ground") for m in range(-F_GROUND, F_GROUND + 1)]
    levels += [Level(excited_label(m), "excited") for m in range(-F_EXCITED, F_EXCITED + 1)]

    couplings = []
    for m in range(-F_GROUND, F_GROUND + 1):
        for name, q in (("sigma+", 1), ("sigma-", -1)):
            if abs(m + q) > F_EXCITED:
                continue
            if subsystem == "lambda" and (name, m) not in LAMBDA_CHAIN:
                continue
            if subsystem == "m" and (name, m) not in M_CHAIN:
                continue
            couplings.append(Coupling(name, excited_label(m + q), ground_label(m), clebsch(F_GROUND, m, q, F_EXCITED)))

    branching = {}
    for me in range(-F_EXCITED, F_EXCITED + 1):
        targets = {}
        for q in (-1, 0, 1):
            m = me - q
            if abs(m) <= F_GROUND:
                c = clebsch(F_GROUND, m, q, F_EXCITED)
                if c:
                    targets[ground_label(m)] = c * c
        total = sum(targets.values())
        branching[excited_label(me)] = {g: f / total for g, f in targets.items()}

    scheme = LevelScheme(
        levels=tuple(levels),
        decays={excited_label(m): gamma for m in range(-F_EXCITED, F_EXCITED + 1)},
        couplings=tuple(couplings),
        ground_coherence_decay=gamma0,
        branching=branching,
        kind="rb87-d1-f2-f1",
    )
    return ZeemanScheme(scheme, gamma, gamma0, zeeman_rate, excited_zeeman_rate, subsystem)


@dataclass(frozen=True)
class EllipticalField:
    """Elliptically polarized light as sigma+- Rabi frequencies.

    ``rabi_scale`` is the Rabi frequency per unit field amplitude, so the
    total (peak) Rabi frequency is rabi_scale * sqrt(intensity).
    """

    ellipticity: float
    intensity: float = 1.0
    rabi_scale: float = 0.1

    def __post_init__(self):
        if not -1 < self.ellipticity < 1:
            raise ValueError(f"ellipticity must lie in (-1, 1), got {self.ellipticity}")
        if not self.intensity > 0:
            raise ValueError("intensity must be positive")

    @property
    def intensity_plus(self) -> float:
        return (1 + self.ellipticity) * self.intensity / 2

    @property
    def intensity_minus(self) -> float:
        return (1 - self.ellipticity) * self.intensity / 2

    @property
    def rabi_plus(self) -> float:
        return self.rabi_scale * math.sqrt(self.intensity_plus)

    @property
    def rabi_minus(self) -> float:
        return self.rabi_scale * math.sqrt(self.intensity_minus)

    @property
    def peak_rabi(self) -> float:
        return self.rabi_scale * math.sqrt(self.intensity)

    def modes(self) -> list[FieldMode]:
        return [
            FieldMode("sigma+", self.rabi_plus, "drive", wavelength=D1_WAVELENGTH_CM),
            FieldMode("sigma-", self.rabi_minus, "drive", wavelength=D1_WAVELENGTH_CM),
        ]


@dataclass(frozen=True)
class Cell:
    """Vapor cell: atomic density (cm^-3), length (cm) and wavelength (cm)."""

    density: float = 1e9
    length: float = 1.0
    wavelength: float = D1_WAVELENGTH_CM


def circular_susceptibilities(
    zs: ZeemanScheme, rho: DensityMatrix, field: EllipticalField, cell: Cell
) -> tuple[complex, complex]:
    """chi+ and chi- from the optical coherences on the sigma+- transitions.

    chi = (3 N lambda^3 / 8 pi^2) (gamma / 2) sum_c w_c rho[e, g] / Omega,
    which for a resonant weak-field two-level atom reduces to -i times the
    prefactor (absorption as negative imaginary part).
    """
    scale = 3.0 / (8 * math.pi**2) * cell.density * cell.wavelength**3 * zs.gamma / 2
    sums = {"sigma+": 0j, "sigma-": 0j}
    for c in zs.scheme.couplings:
        sums[c.field] += c.weight * rho.element(c.upper, c.lower)
    return scale * sums["sigma+"] / field.rabi_plus, scale * sums["sigma-"] / field.rabi_minus


def rotation_angle(chi_plus: complex, chi_minus: complex, length: float, wavelength: float) -> float:
    """Polarization rotation (pi L / lambda) Re(chi+ - chi-) in radians."""
    if not (np.isfinite(chi_plus) and np.isfinite(chi_minus)):
        raise ValueError("susceptibilities must be finite")
    depth = max(abs(chi_plus.imag), abs(chi_minus.imag)) * 2 * math.pi * length / wavelength
    if depth > 0.1:
        warnings.warn(
            f"weak-absorption condition violated: |Im chi| 2 pi L / lambda = {depth:.3g}",
            ValidityWarning, stacklevel=2,
        )
    return float(math.pi * length / wavelength * (chi_plus - chi_minus).real)


def rot1_formula(q: float) -> float:
    """Analytic rotation enhancement over the isolated Lambda, 1/2 + (2+q^2)/(2-q^2)^2."""
    if not abs(q) <= 1:
        raise ValueError(f"ellipticity must satisfy |q| <= 1, got {q}")
    return 0.5 + (2 + q * q) / (2 - q * q) ** 2


@dataclass
class _Stats:
    points: int = 0
    max_hermiticity_error: float = 0.0
    max_trace_error: float = 0.0
    min_eigenvalue: float = math.inf

    def add(self, rho: DensityMatrix) -> None:
        m = rho.matrix
        self.points += 1
        self.max_hermiticity_error = max(self.max_hermiticity_error, rho.hermiticity_residual)
        self.max_trace_error = max(self.max_trace_error, float(abs(np.trace(m) - 1)))
        self.min_eigenvalue = min(self.min_eigenvalue, rho.min_eigenvalue)

    def merge(self, other: "_Stats") -> None:
        self.points += other.points
        self.max_hermiticity_error = max(self.max_hermiticity_error, other.max_hermiticity_error)
        self.max_trace_error = max(self.max_trace_error, other.max_trace_error)
        self.min_eigenvalue = min(self.min_eigenvalue, other.min_eigenvalue)

    def as_dict(self) -> dict[str, float]:
        return {
            "points": self.points,
            "max_hermiticity_error": self.max_hermiticity_error,
            "max_trace_error": self.max_trace_error,
            "min_eigenvalue": self.min_eigenvalue,
        }


def _rotation_at(
    zs: ZeemanScheme,
    field: EllipticalField,
    B: float,
    cell: Cell,
    grid: VelocityGrid,
    ground_relaxation: GroundRelaxation,
    threads: int | None,
    stats: _Stats | None,
) -> float:
    problem = SteadyStateProblem(zs.scheme, field.modes(), zs.zeeman_shifts(B), ground_relaxation)
    states = velocity_class_states(problem, grid, threads)
    chi_p = chi_m = 0j
    for weight, rho in zip(grid.weights, states):
        p, m = circular_susceptibilities(zs, rho, field, cell)
        chi_p += weight * p
        chi_m += weight * m
        if stats is not None:
            stats.add(rho)
    return rotation_angle(chi_p, chi_m, cell.length, cell.wavelength)


def rotation_vs_field(
    zs: ZeemanScheme,
    field: EllipticalField,
    B: float,
    *,
    cell: Cell = Cell(),
    grid: VelocityGrid | None = None,
    ground_relaxation: GroundRelaxation = "isotropic",
    threads: int | None = None,
) -> float:
    """Rotation angle phi(B) in radians, Doppler-averaged over ``grid`` if given."""
    return _rotation_at(zs, field, B, cell, grid or VelocityGrid.single(), ground_relaxation, threads, None)


def default_b_step(zs: ZeemanScheme) -> float:
    """One percent of the gamma0-equivalent splitting (1e-6 gamma when gamma0 = 0)."""
    rate = abs(zs.zeeman_rate) or 1.0
    splitting = 0.01 * zs.gamma0 if zs.gamma0 > 0 else 1e-6 * zs.gamma
    return splitting / rate


def rotation_slope(
    zs: ZeemanScheme,
    field: EllipticalField,
    *,
    cell: Cell = Cell(),
    grid: VelocityGrid | None = None,
    b_step: float | None = None,
    richardson_tol: float = 5e-3,
    ground_relaxation: GroundRelaxation = "isotropic",
    threads: int | None = None,
    stats: _Stats | None = None,
) -> float:
    """d(phi)/dB at B = 0 by central differences at b_step and b_step/2.

    Raises :class:`ConvergenceError` when the two estimates differ by more
    than ``richardson_tol`` (relative); returns the finer one.
    """
    grid = grid or VelocityGrid.single()
    h = b_step if b_step is not None else default_b_step(zs)
    if not h > 0:
        raise ValueError("b_step must be positive")

    def phi(B):
        return _rotation_at(zs, field, B, cell, grid, ground_relaxation, threads, stats)

    coarse = (phi(h) - phi(-h)) / (2 * h)
    fine = (phi(h / 2) - phi(-h / 2)) / h
    if not (math.isfinite(coarse) and math.isfinite(fine)):
        raise ConvergenceError("rotation slope is not finite")
    if abs(fine - coarse) > richardson_tol * abs(fine):
        raise ConvergenceError(
            f"slope changed by {abs(fine - coarse) / abs(fine):.3g} (relative) when halving "
            f"b_step={h:g}; reduce b_step"
        )
    return fine


@dataclass(frozen=True)
class RotationConfig:
    """Everything needed for an ellipticity scan of the rotation slope.

    ``doppler_width`` of 0 means natural broadening only.  When
    ``doppler_points`` is None the uniform velocity grid is sized to resolve
    the natural linewidth.
    """

    gamma: float = 1.0
    gamma0: float = 1e-4
    zeeman_rate: float = 1.0
    excited_zeeman_rate: float = 0.0
    rabi: float = 0.1
    cell: Cell = field(default_factory=Cell)
    doppler_width: float = 0.0
    doppler_points: int | None = None
    doppler_grid: Literal["uniform", "gauss-hermite"] = "uniform"
    b_step: float | None = None
    ground_relaxation: GroundRelaxation = "isotropic"
    subsystem: Subsystem = "full"
    threads: int | None = None

    def scheme(self) -> ZeemanScheme:
        return build_rb_scheme(
            self.gamma, self.gamma0, self.zeeman_rate,
            excited_zeeman_rate=self.excited_zeeman_rate, subsystem=self.subsystem,
        )

    def grid(self) -> VelocityGrid:
        if self.doppler_width == 0:
            return VelocityGrid.single()
        if self.doppler_grid == "gauss-hermite":
            return VelocityGrid.gauss_hermite(self.doppler_width, self.doppler_points or 33)
        if self.doppler_points is None:
            return VelocityGrid.resolving(self.doppler_width, self.gamma)
        return VelocityGrid.uniform(self.doppler_width, self.doppler_points)


@dataclass(frozen=True)
class RotationPoint:
    q: float
    slope: float
    normalized_slope: float
    rot1: float


@dataclass(frozen=True)
class RotationScan:
    points: tuple[RotationPoint, ...]
    metadata: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def q(self) -> np.ndarray:
        return np.array([p.q for p in self.points])

    @property
    def normalized(self) -> np.ndarray:
        return np.array([p.normalized_slope for p in self.points])

    @property
    def rot1(self) -> np.ndarray:
        return np.array([p.rot1 for p in self.points])


def scan_ellipticity(config: RotationConfig, qs: Sequence[float]) -> RotationScan:
    """Rotation slope versus ellipticity, normalized to linear polarization.

    The q values must be strictly increasing within (-0.95, 0.95); q = 0 is
    computed for the normalization even when absent from ``qs``.
    """
    qs = [float(q) for q in qs]
    if not qs:
        raise ValueError("ellipticity grid is empty")
    if any(b <= a for a, b in zip(qs, qs[1:])):
        raise ValueError("ellipticity values must be strictly increasing")
    if any(not -0.95 <= q <= 0.95 for q in qs):
        raise ValueError("ellipticity values must lie within [-0.95, 0.95]")

    zs = config.scheme()
    grid = config.grid()
    needed = qs if 0.0 in qs else [0.0] + qs

    def one(q: float) -> tuple[float, _Stats]:
        stats = _Stats()
        value = rotation_slope(
            zs, EllipticalField(q, 1.0, config.rabi),
            cell=config.cell, grid=grid, b_step=config.b_step,
            ground_relaxation=config.ground_relaxation, threads=None, stats=stats,
        )
        return value, stats

    if config.threads and config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(one, needed))
    else:
        results = [one(q) for q in needed]

    slopes = {q: r[0] for q, r in zip(needed, results)}
    stats = _Stats()
    for _, s in results:
        stats.merge(s)
    reference = slopes[0.0]
    if reference == 0:
        raise ConvergenceError("rotation slope vanishes at q = 0; cannot normalize")
    points = tuple(RotationPoint(q, float(slopes[q]), float(slopes[q] / reference), rot1_formula(q)) for q in qs)
    metadata = {
        "gamma": config.gamma,
        "gamma0": config.gamma0,
        "zeeman_rate": config.zeeman_rate,
        "rabi": config.rabi,
        "density": config.cell.density,
        "length": config.cell.length,
        "wavelength": config.cell.wavelength,
        "doppler": config.doppler_width > 0,
        "doppler_width": config.doppler_width,
        "doppler_grid": config.doppler_grid if config.doppler_width > 0 else "none",
        "velocity_classes": len(grid),
        "b_step": config.b_step if config.b_step is not None else default_b_step(zs),
        "ground_relaxation": config.ground_relaxation,
        "subsystem": config.subsystem,
    }
    return RotationScan(points, metadata, stats.as_dict())

