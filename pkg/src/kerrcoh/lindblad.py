"""Lindblad steady states of level schemes, with Doppler velocity-class averaging.

Density matrices are vectorized row-major, ``vec(rho)[i*n + j] = rho[i, j]``,
so that ``vec(A rho B) = kron(A, B.T) @ vec(rho)``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Literal, Mapping, Sequence

import numpy as np

from .scheme_model import FieldMode, LevelScheme, SchemeError, build_hamiltonian

MAX_LEVELS = 32

GroundRelaxation = Literal["isotropic", "dephasing"]


class SteadyStateError(RuntimeError):
    """No unique, well-conditioned steady state could be found."""

    def __init__(self, message: str, dimension: int | None = None):
        super().__init__(message)
        self.dimension = dimension


class InvariantError(ValueError):
    """A density matrix violates Hermiticity, unit trace or positivity."""


@dataclass(frozen=True)
class DensityMatrix:
    matrix: np.ndarray
    labels: tuple[str, ...] = ()
    hermiticity_tol: float = 1e-10
    trace_tol: float = 1e-10
    positivity_tol: float = 1e-8
    hermiticity_residual: float = field(default=0.0, init=False, compare=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvariantError(f"density matrix must be square, got shape {m.shape}")
        if self.hermiticity_error(m) > self.hermiticity_tol:
            raise InvariantError(f"density matrix not Hermitian (error {self.hermiticity_error(m):.3g})")
        if abs(np.trace(m) - 1) > self.trace_tol:
            raise InvariantError(f"density matrix trace {np.trace(m)} != 1")
        object.__setattr__(self, "hermiticity_residual", self.hermiticity_error(m))
        m = 0.5 * (m + m.conj().T)
        if np.linalg.eigvalsh(m).min() < -self.positivity_tol:
            raise InvariantError(f"density matrix not positive (min eigenvalue {np.linalg.eigvalsh(m).min():.3g})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "labels", tuple(self.labels))

    @staticmethod
    def hermiticity_error(m: np.ndarray) -> float:
        return float(np.abs(m - m.conj().T).max())

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix).min())

    def population(self, label: str) -> float:
        i = self.labels.index(label)
        return float(self.matrix[i, i].real)

    def element(self, row: str, col: str) -> complex:
        return complex(self.matrix[self.labels.index(row), self.labels.index(col)])


@dataclass(frozen=True)
class Liouvillian:
    generator: np.ndarray
    scheme: LevelScheme

    @property
    def dim(self) -> int:
        return self.scheme.dim

    def apply(self, rho: np.ndarray) -> np.ndarray:
        n = self.dim
        return (self.generator @ np.asarray(rho, dtype=complex).reshape(n * n)).reshape(n, n)


# -- superoperator pieces ---------------------------------------------------------


def hamiltonian_superoperator(H: np.ndarray) -> np.ndarray:
    """-i[H, .] as a matrix on row-major vectorized operators."""
    n = H.shape[0]
    eye = np.eye(n)
    return -1j * (np.kron(H, eye) - np.kron(eye, H.T))


def dissipator(L: np.ndarray) -> np.ndarray:
    """L . L^dag - {L^dag L, .}/2 as a matrix on row-major vectorized operators."""
    n = L.shape[0]
    eye = np.eye(n)
    LdL = L.conj().T @ L
    return np.kron(L, L.conj()) - 0.5 * np.kron(LdL, eye) - 0.5 * np.kron(eye, LdL.T)


def jump_operators(scheme: LevelScheme, ground_relaxation: GroundRelaxation = "isotropic") -> list[np.ndarray]:
    """Collapse operators for spontaneous decay and ground-state relaxation.

    Each excited level |e> with rate gamma decays to ground |g> through
    sqrt(gamma * branch) |g><e|.  Ground relaxation at rate gamma0 is either
    ``"isotropic"`` (operators sqrt(gamma0/n_g) |g_i><g_k|, which damp
    ground coherences at gamma0 and relax ground populations toward the
    unpolarized mixture) or ``"dephasing"`` (sqrt(gamma0) |g><g|, coherences
    only).
    """
    n = scheme.dim
    index = {label: i for i, label in enumerate(scheme.labels)}
    ops = []
    for upper, targets in scheme.decay_branches().items():
        gamma = scheme.decays[upper]
        for lower, fraction in targets.items():
            if fraction > 0:
                op = np.zeros((n, n))
                op[index[lower], index[upper]] = np.sqrt(gamma * fraction)
                ops.append(op)
    gamma0 = scheme.ground_coherence_decay
    if gamma0 > 0:
        grounds = [index[g] for g in scheme.ground_labels]
        if ground_relaxation == "isotropic":
            rate = np.sqrt(gamma0 / len(grounds))
            for i in grounds:
                for k in grounds:
                    op = np.zeros((n, n))
                    op[i, k] = rate
                    ops.append(op)
        elif ground_relaxation == "dephasing":
            for i in grounds:
                op = np.zeros((n, n))
                op[i, i] = np.sqrt(gamma0)
                ops.append(op)
        else:
            raise SchemeError(f"unknown ground relaxation model {ground_relaxation!r}")
    return ops


def dissipator_superoperator(scheme: LevelScheme, ground_relaxation: GroundRelaxation = "isotropic") -> np.ndarray:
    n = scheme.dim
    D = np.zeros((n * n, n * n), dtype=complex)
    for op in jump_operators(scheme, ground_relaxation):
        D += dissipator(op)
    return D


def _shift_vector(scheme: LevelScheme, shifts) -> np.ndarray:
    if shifts is None:
        return np.zeros(scheme.dim)
    if isinstance(shifts, Mapping):
        out = np.zeros(scheme.dim)
        for label, value in shifts.items():
            out[scheme.index(label)] = value
        return out
    out = np.asarray(shifts, dtype=float)
    if out.shape != (scheme.dim,):
        raise SchemeError(f"expected {scheme.dim} level shifts, got shape {out.shape}")
    return out


def _excited_projector(scheme: LevelScheme) -> np.ndarray:
    return np.array([lv.kind == "excited" for lv in scheme.levels], dtype=float)


def total_hamiltonian(
    scheme: LevelScheme,
    fields: Sequence[FieldMode],
    zeeman_shifts: Mapping[str, float] | Sequence[float] | None = None,
    excited_shift: float = 0.0,
) -> np.ndarray:
    H = build_hamiltonian(scheme, fields)
    diag = _shift_vector(scheme, zeeman_shifts) + excited_shift * _excited_projector(scheme)
    return H + np.diag(diag)


def build_liouvillian(
    scheme: LevelScheme,
    fields: Sequence[FieldMode],
    zeeman_shifts: Mapping[str, float] | Sequence[float] | None = None,
    *,
    excited_shift: float = 0.0,
    ground_relaxation: GroundRelaxation = "isotropic",
) -> Liouvillian:
    """Lindblad generator for ``scheme`` driven by ``fields``.

    ``zeeman_shifts`` adds per-level energies (by label or as a full vector)
    and ``excited_shift`` detunes every optical transition equally, as a
    velocity class does.
    """
    if scheme.dim > MAX_LEVELS:
        raise SchemeError(f"{scheme.dim} levels exceeds the supported maximum of {MAX_LEVELS}")
    H = total_hamiltonian(scheme, fields, zeeman_shifts, excited_shift)
    generator = hamiltonian_superoperator(H) + dissipator_superoperator(scheme, ground_relaxation)
    if not np.isfinite(generator).all():
        raise SchemeError("Liouvillian has non-finite entries")
    return Liouvillian(generator, scheme)


def _solve_steady(generator: np.ndarray, n: int, check_unique: bool, rtol: float) -> np.ndarray:
    norm = np.linalg.norm(generator)
    if check_unique:
        s = np.linalg.svd(generator, compute_uv=False)
        null_dim = int(np.sum(s <= 1e-13 * n * n * s[0]))
        if null_dim != 1:
            raise SteadyStateError(
                f"steady-state manifold has dimension {null_dim}, expected 1", dimension=null_dim
            )
    A = generator.copy()
    b = np.zeros(n * n, dtype=complex)
    # The population equations are linearly dependent; trade one for normalization.
    A[0, :] = 0
    A[0, :: n + 1] = 1
    b[0] = 1
    try:
        x = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SteadyStateError(f"steady-state linear solve failed: {exc}") from exc
    residual = np.linalg.norm(generator @ x)
    if not np.isfinite(x).all() or residual > rtol * norm:
        raise SteadyStateError(f"steady-state residual {residual:.3g} exceeds {rtol:g} * ||L|| = {rtol * norm:.3g}")
    rho = x.reshape(n, n)
    return rho


def steady_state(liouvillian: Liouvillian, *, check_unique: bool = True, rtol: float = 1e-10) -> DensityMatrix:
    """Unique trace-one null vector of the generator.

    Uses a dense solve with the first population equation replaced by the
    trace condition.  ``check_unique`` counts the generator's null space by
    SVD first and raises :class:`SteadyStateError` if it is not
    one-dimensional.
    """
    n = liouvillian.dim
    rho = _solve_steady(liouvillian.generator, n, check_unique, rtol)
    return DensityMatrix(rho, liouvillian.scheme.labels)


# -- Doppler averaging ------------------------------------------------------------


@dataclass(frozen=True)
class VelocityGrid:
    """Velocity classes as (one-photon detuning shift, weight) pairs.

    ``width`` is the standard deviation W_d of the Gaussian distribution of
    shifts.
    """

    shifts: np.ndarray
    weights: np.ndarray
    width: float

    def __post_init__(self):
        shifts = np.asarray(self.shifts, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if shifts.shape != weights.shape or shifts.ndim != 1 or len(shifts) == 0:
            raise ValueError("shifts and weights must be equal-length 1-D arrays")
        if not (weights > 0).all():
            raise ValueError("velocity-class weights must be positive")
        if abs(weights.sum() - 1) > 1e-12:
            raise ValueError(f"weights sum to {weights.sum()!r}, not 1")
        scale = max(self.width, 1.0)
        if np.abs(shifts + shifts[::-1]).max() > 1e-12 * scale or np.abs(weights - weights[::-1]).max() > 1e-12:
            raise ValueError("velocity grid must be symmetric about zero shift")
        shifts.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "shifts", shifts)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return len(self.shifts)

    @classmethod
    def single(cls) -> "VelocityGrid":
        """The zero-width limit: one class at rest."""
        return cls(np.zeros(1), np.ones(1), 0.0)

    @classmethod
    def gauss_hermite(cls, width: float, points: int = 33) -> "VelocityGrid":
        x, w = np.polynomial.hermite_e.hermegauss(points)
        x = 0.5 * (x - x[::-1])
        w = 0.5 * (w + w[::-1])
        return cls(width * x, w / w.sum(), width)

    @classmethod
    def uniform(cls, width: float, points: int, span: float = 4.5) -> "VelocityGrid":
        """Equally spaced classes over +-span*width with Gaussian weights.

        Converges much faster than Gauss-Hermite when the integrand has
        features (natural linewidth) far narrower than ``width``.
        """
        if points % 2 == 0:
            raise ValueError("uniform velocity grid needs an odd number of points")
        x = np.linspace(-span, span, points)
        x = 0.5 * (x - x[::-1])
        w = np.exp(-0.5 * x**2)
        return cls(width * x, w / w.sum(), width)

    @classmethod
    def resolving(cls, width: float, linewidth: float, per_linewidth: float = 2.0, span: float = 4.5) -> "VelocityGrid":
        """Uniform grid with at least ``per_linewidth`` classes per ``linewidth``."""
        if width == 0:
            return cls.single()
        half = int(np.ceil(span * width * per_linewidth / linewidth))
        return cls.uniform(width, 2 * half + 1, span)


@dataclass(frozen=True)
class SteadyStateProblem:
    scheme: LevelScheme
    fields: tuple[FieldMode, ...]
    zeeman_shifts: Mapping[str, float] | None = None
    ground_relaxation: GroundRelaxation = "isotropic"
    check_unique: bool = True

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(self.fields))

    def solve(self, excited_shift: float = 0.0) -> DensityMatrix:
        L = build_liouvillian(
            self.scheme, self.fields, self.zeeman_shifts,
            excited_shift=excited_shift, ground_relaxation=self.ground_relaxation,
        )
        return steady_state(L, check_unique=self.check_unique)


def velocity_class_states(
    problem: SteadyStateProblem, grid: VelocityGrid, threads: int | None = None
) -> list[DensityMatrix]:
    """Steady state of every velocity class, in grid order."""
    scheme = problem.scheme
    n = scheme.dim
    D = dissipator_superoperator(scheme, problem.ground_relaxation)
    H0 = total_hamiltonian(scheme, problem.fields, problem.zeeman_shifts)
    P = np.diag(_excited_projector(scheme))

    def solve(shift: float) -> DensityMatrix:
        generator = D + hamiltonian_superoperator(H0 + shift * P)
        rho = _solve_steady(generator, n, problem.check_unique, 1e-10)
        return DensityMatrix(rho, scheme.labels)

    if threads and threads > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(solve, grid.shifts))
    return [solve(v) for v in grid.shifts]


def doppler_average(
    problem: SteadyStateProblem,
    grid: VelocityGrid,
    observable: Callable[[DensityMatrix], complex | float | np.ndarray],
    *,
    threads: int | None = None,
):
    """Weighted sum of ``observable`` over the velocity classes of ``grid``.

    Summation runs in grid order regardless of ``threads``.
    """
    states = velocity_class_states(problem, grid, threads)
    total = None
    for shift, weight, rho in zip(grid.shifts, grid.weights, states):
        value = observable(rho)
        if not np.all(np.isfinite(value)):
            raise ValueError(f"observable is not finite in the velocity class at shift {shift:g}")
        total = weight * value if total is None else total + weight * value
    return total
