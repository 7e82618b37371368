"""Level schemes, interaction Hamiltonians, dark states and effective Kerr couplings.

All rates, detunings and Rabi frequencies are angular frequencies in one
user-chosen unit (by convention units of the first excited-state decay rate),
and Hamiltonians are returned in units of hbar times that unit.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Literal, Mapping, Sequence

import numpy as np

from ._validity import ValidityWarning

# Gaussian units (erg s); the field-coupling constant is written in Gaussian form.
HBAR_CGS = 1.054571817e-27

LevelKind = Literal["ground", "excited"]
FieldRole = Literal["probe", "drive"]


class SchemeError(ValueError):
    """Raised for malformed level schemes or field sets."""


@dataclass(frozen=True)
class Level:
    label: str
    kind: LevelKind


@dataclass(frozen=True)
class Coupling:
    """Dipole coupling of ``upper`` (excited) to ``lower`` (ground) by field ``field``.

    ``weight`` scales the field's Rabi frequency on this transition, e.g. a
    Clebsch-Gordan coefficient.
    """

    field: str
    upper: str
    lower: str
    weight: float = 1.0


@dataclass(frozen=True)
class LevelScheme:
    """Blueprint for a multilevel atom interacting with classical fields.

    ``detunings`` maps a level label to its diagonal entry in the
    rotating-frame Hamiltonian; for the M scheme the two-photon detuning
    enters as ``{"b3": -delta}``.  ``branching`` gives, per excited level, the
    fraction of its decay going to each ground level; when omitted each
    excited level decays equally to the ground levels it is coupled to.
    """

    levels: tuple[Level, ...]
    decays: Mapping[str, float]
    couplings: tuple[Coupling, ...]
    detunings: Mapping[str, float] = field(default_factory=dict)
    ground_coherence_decay: float = 0.0
    branching: Mapping[str, Mapping[str, float]] | None = None
    kind: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        object.__setattr__(self, "couplings", tuple(self.couplings))
        labels = [lv.label for lv in self.levels]
        if len(set(labels)) != len(labels):
            raise SchemeError(f"level labels must be unique, got {labels}")
        kinds = {lv.label: lv.kind for lv in self.levels}
        for lv in self.levels:
            if lv.kind not in ("ground", "excited"):
                raise SchemeError(f"level {lv.label!r} has unknown kind {lv.kind!r}")
        for c in self.couplings:
            if kinds.get(c.upper) != "excited" or kinds.get(c.lower) != "ground":
                raise SchemeError(
                    f"coupling {c.field!r} must connect an excited level to a ground level "
                    f"(got {c.upper!r} -> {c.lower!r})"
                )
        for lv in self.levels:
            if lv.kind == "excited":
                rate = self.decays.get(lv.label)
                if rate is None or not rate > 0:
                    raise SchemeError(f"excited level {lv.label!r} needs a positive decay rate")
        unknown = set(self.decays) - {lv.label for lv in self.levels if lv.kind == "excited"}
        if unknown:
            raise SchemeError(f"decay rates given for non-excited levels: {sorted(unknown)}")
        if not self.ground_coherence_decay >= 0:
            raise SchemeError("ground coherence decay must be >= 0")
        unknown = set(self.detunings) - set(labels)
        if unknown:
            raise SchemeError(f"detunings given for unknown levels: {sorted(unknown)}")
        object.__setattr__(self, "decays", MappingProxyType(dict(self.decays)))
        object.__setattr__(self, "detunings", MappingProxyType(dict(self.detunings)))
        if self.branching is not None:
            frozen = {}
            for upper, targets in self.branching.items():
                if kinds.get(upper) != "excited":
                    raise SchemeError(f"branching given for non-excited level {upper!r}")
                if any(kinds.get(g) != "ground" for g in targets):
                    raise SchemeError(f"branching of {upper!r} must target ground levels")
                if any(f < 0 for f in targets.values()):
                    raise SchemeError(f"negative branching fraction for {upper!r}")
                if abs(sum(targets.values()) - 1.0) > 1e-12:
                    raise SchemeError(f"branching fractions of {upper!r} must sum to 1")
                frozen[upper] = MappingProxyType(dict(targets))
            object.__setattr__(self, "branching", MappingProxyType(frozen))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lv.label for lv in self.levels)

    @property
    def dim(self) -> int:
        return len(self.levels)

    def index(self, label: str) -> int:
        return self.labels.index(label)

    @property
    def ground_labels(self) -> tuple[str, ...]:
        return tuple(lv.label for lv in self.levels if lv.kind == "ground")

    @property
    def excited_labels(self) -> tuple[str, ...]:
        return tuple(lv.label for lv in self.levels if lv.kind == "excited")

    @property
    def field_names(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(c.field for c in self.couplings))

    def decay_branches(self) -> dict[str, dict[str, float]]:
        """Per excited level, the fraction of spontaneous decay into each ground level."""
        if self.branching is not None:
            out = {e: dict(self.branching.get(e, {})) for e in self.excited_labels}
        else:
            out = {}
            for e in self.excited_labels:
                targets = list(dict.fromkeys(c.lower for c in self.couplings if c.upper == e))
                out[e] = {g: 1.0 / len(targets) for g in targets}
        for e, targets in out.items():
            if not targets:
                raise SchemeError(f"excited level {e!r} has no decay channel")
        return out

    def with_detunings(self, **detunings: float) -> "LevelScheme":
        merged = dict(self.detunings)
        merged.update(detunings)
        return LevelScheme(
            self.levels, self.decays, self.couplings, merged,
            self.ground_coherence_decay, self.branching, self.kind,
        )


@dataclass(frozen=True)
class FieldMode:
    """A classical field (probe or drive) addressing one or more couplings.

    The quantization constants are only needed to form the per-photon
    coupling with :func:`xi_coupling`.
    """

    name: str
    rabi: complex
    role: FieldRole = "probe"
    wavelength: float | None = None
    dipole_moment: float | None = None
    frequency: float | None = None
    quantization_volume: float | None = None

    def __post_init__(self):
        if self.role not in ("probe", "drive"):
            raise SchemeError(f"field role must be 'probe' or 'drive', got {self.role!r}")
        if self.wavelength is not None and not self.wavelength > 0:
            raise SchemeError("wavelength must be positive")
        for name in ("dipole_moment", "frequency", "quantization_volume"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise SchemeError(f"{name} must be non-negative")
        if self.quantization_volume is not None and self.quantization_volume == 0:
            raise SchemeError("quantization_volume must be positive")
        object.__setattr__(self, "rabi", complex(self.rabi))


@dataclass(frozen=True)
class DarkStateResult:
    amplitudes: np.ndarray
    eigenvalue: complex
    normalization: float
    is_exact: bool
    labels: tuple[str, ...] = ()
    multiplicity: int = 1
    basis: np.ndarray | None = None

    def amplitude(self, label: str) -> complex:
        return complex(self.amplitudes[self.labels.index(label)])


# -- scheme constructors ----------------------------------------------------------


def lambda_scheme(gamma: float = 1.0, gamma0: float = 0.0, delta: float = 0.0) -> LevelScheme:
    """Three-level Lambda: probe ``alpha1`` on a-b1, drive ``omega1`` on a-b2."""
    return LevelScheme(
        levels=(Level("a", "excited"), Level("b1", "ground"), Level("b2", "ground")),
        decays={"a": gamma},
        couplings=(Coupling("alpha1", "a", "b1"), Coupling("omega1", "a", "b2")),
        detunings={"b2": -delta} if delta else {},
        ground_coherence_decay=gamma0,
        kind="lambda",
    )


def n_scheme(
    gamma1: float = 1.0, gamma2: float = 1.0, Delta: float = 0.0, gamma0: float = 0.0
) -> LevelScheme:
    """Lambda (a1; b1, b2) plus a second probe ``alpha2`` from b2 to a2, detuned by Delta."""
    return LevelScheme(
        levels=(
            Level("a1", "excited"), Level("a2", "excited"),
            Level("b1", "ground"), Level("b2", "ground"),
        ),
        decays={"a1": gamma1, "a2": gamma2},
        couplings=(
            Coupling("alpha1", "a1", "b1"),
            Coupling("omega1", "a1", "b2"),
            Coupling("alpha2", "a2", "b2"),
        ),
        detunings={"a2": -Delta} if Delta else {},
        ground_coherence_decay=gamma0,
        kind="N",
    )


def m_scheme(
    gamma1: float = 1.0, gamma2: float = 1.0, delta: float = 0.0, gamma0: float = 0.0
) -> LevelScheme:
    """Five-level M scheme ordered (a1, a2, b1, b2, b3).

    Probes ``alpha1`` (a1-b1) and ``alpha2`` (a2-b2), drives ``omega1``
    (a1-b2) and ``omega2`` (a2-b3); the drive ``omega2`` carries the
    two-photon detuning ``delta`` on b3.
    """
    return LevelScheme(
        levels=(
            Level("a1", "excited"), Level("a2", "excited"),
            Level("b1", "ground"), Level("b2", "ground"), Level("b3", "ground"),
        ),
        decays={"a1": gamma1, "a2": gamma2},
        couplings=(
            Coupling("alpha1", "a1", "b1"),
            Coupling("omega1", "a1", "b2"),
            Coupling("alpha2", "a2", "b2"),
            Coupling("omega2", "a2", "b3"),
        ),
        detunings={"b3": -delta} if delta else {},
        ground_coherence_decay=gamma0,
        kind="M",
    )


def m_fields(alpha1: complex, alpha2: complex, omega1: complex, omega2: complex) -> list[FieldMode]:
    return [
        FieldMode("alpha1", alpha1, "probe"),
        FieldMode("alpha2", alpha2, "probe"),
        FieldMode("omega1", omega1, "drive"),
        FieldMode("omega2", omega2, "drive"),
    ]


def n_fields(alpha1: complex, alpha2: complex, omega1: complex) -> list[FieldMode]:
    return [
        FieldMode("alpha1", alpha1, "probe"),
        FieldMode("alpha2", alpha2, "probe"),
        FieldMode("omega1", omega1, "drive"),
    ]


# -- Hamiltonian and dark states --------------------------------------------------


def _rabi_by_name(scheme: LevelScheme, fields: Sequence[FieldMode]) -> dict[str, complex]:
    rabi = {f.name: f.rabi for f in fields}
    missing = [name for name in scheme.field_names if name not in rabi]
    if missing:
        raise SchemeError(f"no field supplied for coupling(s) {missing}")
    return rabi


def build_hamiltonian(scheme: LevelScheme, fields: Sequence[FieldMode]) -> np.ndarray:
    """Rotating-frame interaction Hamiltonian in units of hbar.

    Each coupling contributes ``weight * rabi * |upper><lower| + H.c.``; the
    diagonal holds ``scheme.detunings``.
    """
    rabi = _rabi_by_name(scheme, fields)
    n = scheme.dim
    index = {label: i for i, label in enumerate(scheme.labels)}
    H = np.zeros((n, n), dtype=complex)
    for label, offset in scheme.detunings.items():
        H[index[label], index[label]] += offset
    for c in scheme.couplings:
        value = c.weight * rabi[c.field]
        u, l = index[c.upper], index[c.lower]
        H[u, l] += value
        H[l, u] += np.conj(value)
    if not np.allclose(H, H.conj().T, rtol=0, atol=1e-14 * max(1.0, np.abs(H).max())):
        raise SchemeError("internal error: Hamiltonian is not Hermitian")
    return H


def fix_phase(vector: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Rotate ``vector`` so its largest-magnitude entry (within ``mask``) is real positive."""
    v = np.asarray(vector, dtype=complex)
    mags = np.abs(v) if mask is None else np.where(mask, np.abs(v), -1.0)
    k = int(np.argmax(mags))
    if v[k] == 0:
        return v.copy()
    return v * (abs(v[k]) / v[k])


def _ground_mask(scheme: LevelScheme) -> np.ndarray:
    return np.array([lv.kind == "ground" for lv in scheme.levels])


def dark_state(scheme: LevelScheme, fields: Sequence[FieldMode], *, rtol: float = 1e-10) -> DarkStateResult:
    """Null vector of the resonant Hamiltonian, found by SVD.

    A degenerate null space is reported through ``multiplicity`` and
    ``basis``; ``amplitudes`` then holds the first basis vector.
    """
    if any(offset != 0 for offset in scheme.detunings.values()):
        raise SchemeError("dark_state needs zero detunings; use perturbed_dark_state for delta != 0")
    H = build_hamiltonian(scheme, fields)
    n = scheme.dim
    _, s, vh = np.linalg.svd(H)
    scale = s[0] if s[0] > 0 else 1.0
    null = s <= rtol * scale
    basis = vh[null].conj()
    mask = _ground_mask(scheme)
    if len(basis) == 0:
        raise SchemeError("Hamiltonian has no null space")
    vectors = np.array([fix_phase(b, mask) for b in basis])
    return DarkStateResult(
        amplitudes=vectors[0],
        eigenvalue=0.0,
        normalization=1.0,
        is_exact=True,
        labels=scheme.labels,
        multiplicity=len(vectors),
        basis=vectors,
    )


def m_dark_state_vector(
    alpha1: complex, alpha2: complex, omega1: complex, omega2: complex
) -> np.ndarray:
    """Closed-form normalized M-scheme dark state over (a1, a2, b1, b2, b3)."""
    b1 = omega1 * omega2
    b2 = -omega2 * alpha1
    b3 = alpha1 * alpha2
    norm = math.sqrt(abs(alpha1) ** 2 * abs(alpha2) ** 2 + abs(omega2) ** 2 * abs(alpha1) ** 2
                     + abs(omega1) ** 2 * abs(omega2) ** 2)
    if norm == 0:
        raise SchemeError("dark state undefined: alpha1 and omega1*omega2 both vanish")
    return np.array([0, 0, b1, b2, b3], dtype=complex) / norm


def _m_field_values(scheme: LevelScheme, fields: Sequence[FieldMode]):
    if scheme.kind != "M":
        raise SchemeError(f"perturbative dark state is defined for the M scheme, got {scheme.kind!r}")
    rabi = _rabi_by_name(scheme, fields)
    return rabi["alpha1"], rabi["alpha2"], rabi["omega1"], rabi["omega2"]


def perturbed_dark_state(
    scheme: LevelScheme,
    fields: Sequence[FieldMode],
    delta: float | None = None,
    *,
    max_probe_ratio: float = 0.2,
    max_detuning_fraction: float = 0.1,
) -> DarkStateResult:
    """Leading-order dark state and eigenvalue of the M scheme at small two-photon detuning.

    ``delta`` defaults to the scheme's own two-photon detuning.  The
    weak-probe and small-detuning conditions are checked and reported as
    :class:`ValidityWarning`.
    """
    a1, a2, o1, o2 = _m_field_values(scheme, fields)
    if delta is None:
        delta = -scheme.detunings.get("b3", 0.0)
    if o1 == 0 or o2 == 0:
        raise SchemeError("perturbed dark state needs nonzero drives omega1 and omega2")

    for name, probe, drive in (("alpha1/omega1", a1, o1), ("alpha2/omega2", a2, o2)):
        ratio = abs(probe) / abs(drive)
        if ratio > max_probe_ratio:
            warnings.warn(
                f"weak-probe condition violated: |{name}| = {ratio:.3g} > {max_probe_ratio}",
                ValidityWarning, stacklevel=2,
            )
    gamma2 = scheme.decays["a2"]
    limit = max_detuning_fraction * min(gamma2, abs(o2) ** 2 / gamma2)
    if abs(delta) > limit:
        warnings.warn(
            f"small-detuning condition violated: |delta| = {abs(delta):.3g} > {limit:.3g} "
            f"(= {max_detuning_fraction} * min(gamma2, |omega2|^2/gamma2))",
            ValidityWarning, stacklevel=2,
        )

    dark = m_dark_state_vector(a1, a2, o1, o2)
    p1, p2 = abs(o1) ** 2, abs(o2) ** 2
    vec = dark.copy()
    vec[0] = -delta * np.conj(a1) * abs(a2) ** 2 / (p1 * p2)
    vec[1] = delta * a1 * a2 / (abs(o1) * p2)
    zeta = 1.0 / np.linalg.norm(vec)
    eigenvalue = -delta * abs(a1) ** 2 * abs(a2) ** 2 / (p1 * p2)
    return DarkStateResult(
        amplitudes=zeta * vec,
        eigenvalue=eigenvalue,
        normalization=float(zeta),
        is_exact=delta == 0,
        labels=scheme.labels,
    )


def exact_dark_eigenpair(scheme: LevelScheme, fields: Sequence[FieldMode]) -> DarkStateResult:
    """Dense-eigensolver eigenpair with the smallest |eigenvalue| (the exact disturbed dark state)."""
    H = build_hamiltonian(scheme, fields)
    w, v = np.linalg.eigh(H)
    k = int(np.argmin(np.abs(w)))
    return DarkStateResult(
        amplitudes=fix_phase(v[:, k], _ground_mask(scheme)),
        eigenvalue=float(w[k]),
        normalization=1.0,
        is_exact=True,
        labels=scheme.labels,
    )


# -- effective Kerr couplings -----------------------------------------------------


def xi_coupling(mode: FieldMode, hbar: float = HBAR_CGS) -> float:
    """Per-photon Rabi frequency sqrt(2 pi p^2 nu / (hbar V)) of a quantized mode."""
    p, nu, V = mode.dipole_moment, mode.frequency, mode.quantization_volume
    if p is None or nu is None or V is None:
        raise SchemeError(f"field {mode.name!r} lacks dipole_moment, frequency or quantization_volume")
    return math.sqrt(2 * math.pi * p**2 * nu / (hbar * V))


def kerr_coefficient_m(xi1: float, xi2: float, omega1: complex, omega2: complex, delta: float) -> float:
    """Cross-Kerr rate kappa_M of the M scheme, H_M = hbar kappa_M n1 n2."""
    if omega1 == 0 or omega2 == 0:
        raise SchemeError("kerr_coefficient_m needs nonzero omega1 and omega2")
    return -delta * xi1**2 * xi2**2 / (abs(omega1) ** 2 * abs(omega2) ** 2)


def kerr_coefficient_n(xi1: float, xi2: float, omega1: complex, Delta: float) -> float:
    """Cross-Kerr rate kappa_N of the N scheme, H_N = hbar kappa_N n1 n2."""
    if Delta == 0 or omega1 == 0:
        raise SchemeError("kerr_coefficient_n needs nonzero Delta and omega1")
    return xi1**2 * xi2**2 / (Delta * abs(omega1) ** 2)


def coupling_ratio(delta: float, Delta: float, omega2: complex) -> float:
    """Relative Kerr strength delta*Delta/|omega2|^2 of the M scheme over the N scheme."""
    if omega2 == 0:
        raise SchemeError("coupling_ratio needs nonzero omega2")
    return delta * Delta / abs(omega2) ** 2


def m_scheme_dominates(delta: float, Delta: float, omega2: complex) -> bool:
    return abs(coupling_ratio(delta, Delta, omega2)) > 1
