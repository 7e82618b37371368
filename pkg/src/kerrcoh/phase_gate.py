"""Two-mode Fock-space phase gate generated by the cross-Kerr Hamiltonian."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np
from scipy.constants import hbar as HBAR_SI

DEFAULT_CUTOFF = 8


class FockError(ValueError):
    pass


@dataclass(frozen=True)
class FockState:
    """Amplitudes over |n1, n2> with 0 <= n1, n2 <= cutoff, stored as a (cutoff+1)^2 array."""

    amplitudes: np.ndarray
    norm_tol: float = 1e-12

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise FockError(f"amplitudes must be a square 2-D array, got shape {a.shape}")
        if abs(np.linalg.norm(a) - 1) > self.norm_tol:
            raise FockError(f"state is not normalized (norm {np.linalg.norm(a)!r})")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @property
    def cutoff(self) -> int:
        return self.amplitudes.shape[0] - 1

    @classmethod
    def basis(cls, n1: int, n2: int, cutoff: int = DEFAULT_CUTOFF) -> "FockState":
        if min(n1, n2) < 0:
            raise FockError("occupations must be non-negative")
        if max(n1, n2) > cutoff:
            raise FockError(f"occupation ({n1}, {n2}) exceeds cutoff {cutoff}")
        a = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
        a[n1, n2] = 1
        return cls(a)

    @classmethod
    def random(cls, rng: np.random.Generator, cutoff: int = DEFAULT_CUTOFF) -> "FockState":
        shape = (cutoff + 1, cutoff + 1)
        a = rng.normal(size=shape) + 1j * rng.normal(size=shape)
        return cls(a / np.linalg.norm(a))

    def amplitude(self, n1: int, n2: int) -> complex:
        return complex(self.amplitudes[n1, n2])


@dataclass(frozen=True)
class GateSpec:
    eta: float
    provenance: Mapping[str, float] = field(default_factory=lambda: {"source": "direct"})

    def __post_init__(self):
        if not math.isfinite(self.eta):
            raise FockError("gate phase must be finite")
        object.__setattr__(self, "provenance", MappingProxyType(dict(self.provenance)))


def gate_phase(delta: float, xi1: float, xi2: float, omega1: complex, omega2: complex, t: float) -> float:
    """Conditional phase delta xi1^2 xi2^2 t / (|omega1|^2 |omega2|^2) acquired by |1,1>."""
    if omega1 == 0 or omega2 == 0:
        raise FockError("gate_phase needs nonzero omega1 and omega2")
    return delta * xi1**2 * xi2**2 * t / (abs(omega1) ** 2 * abs(omega2) ** 2)


def gate_phase_with_hbar(
    delta: float, xi1: float, xi2: float, omega1: complex, omega2: complex, t: float, hbar: float = HBAR_SI
) -> float:
    """The same expression multiplied by hbar, for comparison with conventions that keep it."""
    return hbar * gate_phase(delta, xi1, xi2, omega1, omega2, t)


def gate_from_physical(delta: float, xi1: float, xi2: float, omega1: complex, omega2: complex, t: float) -> GateSpec:
    eta = gate_phase(delta, xi1, xi2, omega1, omega2, t)
    return GateSpec(eta, {"source": "physical", "delta": delta, "xi1": xi1, "xi2": xi2,
                          "omega1": abs(omega1), "omega2": abs(omega2), "t": t})


def gate_diagonal(eta: float, cutoff: int = DEFAULT_CUTOFF) -> np.ndarray:
    """exp(i eta n1 n2) on the (cutoff+1)^2 grid of occupations."""
    n = np.arange(cutoff + 1)
    return np.exp(1j * eta * np.outer(n, n))


def gate_matrix(eta: float, cutoff: int = DEFAULT_CUTOFF) -> np.ndarray:
    """Q_eta as a dense matrix on the flattened |n1, n2> basis (index n1*(cutoff+1) + n2)."""
    return np.diag(gate_diagonal(eta, cutoff).ravel())


def apply_gate(state: FockState, spec: GateSpec) -> FockState:
    return FockState(state.amplitudes * gate_diagonal(spec.eta, state.cutoff))


def truth_table(spec: GateSpec) -> dict[tuple[int, int], complex]:
    """Output amplitude on each computational input |n1, n2>, n1, n2 in {0, 1}."""
    out = {}
    for n1 in (0, 1):
        for n2 in (0, 1):
            result = apply_gate(FockState.basis(n1, n2, cutoff=1), spec)
            out[(n1, n2)] = result.amplitude(n1, n2)
    return out
