"""Command-line front end: TOML config in, CSV with a ``#`` metadata header out.

Validity warnings are written to stderr and never into the CSV.  Exit codes:
0 success, 1 computation error, 2 configuration or usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from ._validity import ValidityWarning
from .config import (
    ConfigError,
    DarkStateConfig,
    PhaseGateConfig,
    RotationRunConfig,
    SusceptibilityConfig,
    as_complex,
    flatten,
    load_config,
)
from .lindblad import InvariantError, SteadyStateError
from .phase_gate import (
    FockError,
    FockState,
    GateSpec,
    apply_gate,
    gate_from_physical,
    gate_phase_with_hbar,
    truth_table,
)
from .rubidium import Cell, ConvergenceError, RotationConfig, scan_ellipticity
from .scheme_model import (
    SchemeError,
    build_hamiltonian,
    dark_state,
    exact_dark_eigenpair,
    fix_phase,
    kerr_coefficient_m,
    m_dark_state_vector,
    m_fields,
    m_scheme,
    perturbed_dark_state,
)
from .susceptibility import MediumParams, check_eit, chi_m, chi_n, interchange_check

THREADS_ENV = "KERRCOH_THREADS"


@dataclass
class Report:
    columns: list[str]
    rows: list[list[object]]
    results: list[tuple[str, object]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def fmt(value) -> str:
    """12 significant digits for floats; empty string for missing values."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value) + 0.0  # drop the sign of zero
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".12g")
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(fmt(v) for v in value) + "]"
    return str(value)


# -- subcommands --------------------------------------------------------------------


def cmd_dark_state(cfg: DarkStateConfig, threads: int = 1, seed: int | None = None) -> Report:
    f = cfg.fields
    a1, a2, o1, o2 = (as_complex(v) for v in (f.alpha1, f.alpha2, f.omega1, f.omega2))
    scheme = m_scheme(cfg.scheme.gamma1, cfg.scheme.gamma2, cfg.scheme.delta)
    fields = m_fields(a1, a2, o1, o2)
    ground = np.array([lv.kind == "ground" for lv in scheme.levels])
    results: list[tuple[str, object]] = []

    if cfg.scheme.delta == 0:
        exact = dark_state(scheme, fields)
        results.append(("multiplicity", exact.multiplicity))
        H = build_hamiltonian(scheme, fields)
        formula = m_dark_state_vector(a1, a2, o1, o2)
        results.append(("formula_residual", float(np.linalg.norm(H @ formula) / np.linalg.norm(H))))
    else:
        exact = exact_dark_eigenpair(scheme, fields)
    pert = perturbed_dark_state(
        scheme, fields,
        max_probe_ratio=cfg.checks.max_probe_ratio,
        max_detuning_fraction=cfg.checks.max_detuning_fraction,
    )
    pert_vec = fix_phase(pert.amplitudes, ground)
    exact_value = float(np.real(exact.eigenvalue))
    pert_value = float(np.real(pert.eigenvalue))
    results += [
        ("eigenvalue_exact", exact_value),
        ("eigenvalue_perturbative", pert_value),
        ("eigenvalue_abs_error", abs(exact_value - pert_value)),
        ("eigenvalue_rel_error", abs(exact_value - pert_value) / abs(pert_value) if pert_value else None),
        ("normalization_zeta", pert.normalization),
    ]
    rows = []
    for i, lv in enumerate(scheme.levels):
        e, p = exact.amplitudes[i], pert_vec[i]
        rows.append([lv.label, lv.kind, e.real, e.imag, abs(e), p.real, p.imag])
    columns = ["level", "kind", "exact_re", "exact_im", "exact_abs", "perturbative_re", "perturbative_im"]
    return Report(columns, rows, results)


def _medium(cfg: SusceptibilityConfig, **overrides) -> MediumParams:
    values = cfg.medium.model_dump()
    values.update(overrides)
    return MediumParams(**values)


def cmd_susceptibility(cfg: SusceptibilityConfig, threads: int = 1, seed: int | None = None) -> Report:
    var = cfg.sweep.variable
    rows = []
    notes: list[str] = []
    for x in cfg.sweep.values():
        x = float(x)
        point = {
            "delta": cfg.point.delta,
            "Delta": cfg.point.Delta,
            "alpha1": as_complex(cfg.fields.alpha1),
            "omega1": as_complex(cfg.fields.omega1),
            "omega2": as_complex(cfg.fields.omega2),
        }
        medium_overrides = {}
        if var in ("gamma0", "doppler_width"):
            medium_overrides[var] = x
        else:
            point[var] = x
        params = _medium(cfg, **medium_overrides)
        m = chi_m(params, point["alpha1"], point["omega1"], point["omega2"], point["delta"],
                  eit_safety=cfg.eit.safety_factor)
        n = chi_n(params, point["alpha1"], point["omega1"], point["Delta"], eit_safety=cfg.eit.safety_factor)
        notes += [w for w in m.warnings + n.warnings if w not in notes]
        mapped = [None] * 5
        if params.gamma0 == 0 and point["delta"] != 0 and point["omega2"] != 0:
            rep = interchange_check(params, point["alpha1"], point["omega1"], point["omega2"], point["delta"])
            mapped = [rep.mapped_Delta, rep.chi_n.real, rep.chi_n.imag,
                      rep.magnitude_discrepancy, rep.phase_discrepancy]
        eit = check_eit(point["omega1"], params.doppler_width, params.gamma0, params.gamma1, cfg.eit.safety_factor)
        row = [x]
        row += [point[k] for k in ("delta", "Delta") if k != var]
        row += [m.value.real, m.value.imag, n.value.real, n.value.imag, *mapped, eit.margin, eit.passed]
        rows.append(row)
    columns = [var] + [k for k in ("delta", "Delta") if k != var] + [
        "chi_m_re", "chi_m_im", "chi_n_re", "chi_n_im",
        "mapped_Delta", "chi_n_mapped_re", "chi_n_mapped_im",
        "interchange_magnitude_discrepancy", "interchange_phase_discrepancy",
        "eit_margin", "eit_pass",
    ]
    return Report(columns, rows, [("prefactor", _medium(cfg).prefactor)], notes)


def rotation_config(cfg: RotationRunConfig, threads: int = 1) -> RotationConfig:
    return RotationConfig(
        gamma=cfg.atom.gamma,
        gamma0=cfg.atom.gamma0,
        zeeman_rate=cfg.atom.zeeman_rate,
        excited_zeeman_rate=cfg.atom.excited_zeeman_rate,
        rabi=cfg.light.rabi,
        cell=Cell(cfg.cell.density, cfg.cell.length, cfg.cell.wavelength),
        doppler_width=cfg.doppler.width if cfg.doppler.enabled else 0.0,
        doppler_points=cfg.doppler.points,
        doppler_grid=cfg.doppler.grid,
        b_step=cfg.derivative.b_step,
        ground_relaxation=cfg.atom.ground_relaxation,
        subsystem=cfg.model.subsystem,
        threads=threads,
    )


def cmd_rotation(cfg: RotationRunConfig, threads: int = 1, seed: int | None = None) -> Report:
    scan = scan_ellipticity(rotation_config(cfg, threads), cfg.scan.values())
    rows = [[p.q, p.slope, p.normalized_slope, p.rot1, p.normalized_slope / p.rot1 - 1] for p in scan.points]
    results = [(f"scan.{k}", v) for k, v in scan.metadata.items()]
    results += [(f"diagnostics.{k}", v) for k, v in scan.diagnostics.items()]
    return Report(["q", "slope", "normalized_slope", "rot1", "relative_deviation"], rows, results)


def cmd_phase_gate(cfg: PhaseGateConfig, threads: int = 1, seed: int | None = None) -> Report:
    results: list[tuple[str, object]] = []
    if cfg.physical is not None:
        p = cfg.physical
        o1, o2 = as_complex(p.omega1), as_complex(p.omega2)
        spec = gate_from_physical(p.delta, p.xi1, p.xi2, o1, o2, p.t)
        kappa = kerr_coefficient_m(p.xi1, p.xi2, o1, o2, p.delta)
        results += [
            ("kerr_coefficient_m", kappa),
            ("eta_plus_kappa_t", spec.eta + kappa * p.t),
            ("eta_with_hbar_si", gate_phase_with_hbar(p.delta, p.xi1, p.xi2, o1, o2, p.t)),
        ]
    else:
        spec = GateSpec(cfg.gate.eta)
    results.insert(0, ("eta", spec.eta))
    results.insert(1, ("source", spec.provenance["source"]))

    rng = np.random.default_rng(0 if seed is None else seed)
    worst = 0.0
    for _ in range(100):
        state = FockState.random(rng, cfg.cutoff)
        out = apply_gate(state, spec)
        back = apply_gate(out, GateSpec(-spec.eta))
        worst = max(worst, abs(np.linalg.norm(out.amplitudes) - 1),
                    float(np.abs(back.amplitudes - state.amplitudes).max()))
    results.append(("random_state_unitarity_error", worst))

    rows = []
    for (n1, n2), amp in truth_table(spec).items():
        rows.append([n1, n2, amp.real, amp.imag, math.atan2(amp.imag, amp.real)])
    return Report(["n1", "n2", "amplitude_re", "amplitude_im", "phase"], rows, results)


COMMANDS = {
    "dark-state": cmd_dark_state,
    "susceptibility": cmd_susceptibility,
    "rotation": cmd_rotation,
    "phase-gate": cmd_phase_gate,
}


# -- rendering and entry point ------------------------------------------------------


def render(command: str, cfg, report: Report, seed: int | None = None) -> str:
    buf = io.StringIO()
    buf.write(f"# kerrcoh {__version__}\n")
    buf.write(f"# command = {command}\n")
    if seed is not None:
        buf.write(f"# seed = {seed}\n")
    for key, value in flatten(cfg):
        buf.write(f"# config.{key} = {fmt(value)}\n")
    for key, value in report.results:
        buf.write(f"# result.{key} = {fmt(value)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(report.columns)
    for row in report.rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def resolve_threads(flag: int | None) -> int:
    if flag is not None:
        return flag
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        if value < 1:
            raise ConfigError(f"{THREADS_ENV} must be >= 1")
        return value
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kerrcoh", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"kerrcoh {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=["csv"], default="csv")
        p.add_argument("--threads", type=int, help=f"worker threads (default: ${THREADS_ENV} or 1)")
        p.add_argument("--seed", type=int, help="seed for the randomized self-checks")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        threads = resolve_threads(args.threads)
        if threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = load_config(args.command, args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ValidityWarning)
        try:
            report = COMMANDS[args.command](cfg, threads=threads, seed=args.seed)
        except (SchemeError, SteadyStateError, InvariantError, ConvergenceError, FockError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    notes = list(report.warnings)
    for w in caught:
        msg = str(w.message)
        if issubclass(w.category, ValidityWarning) and msg not in notes:
            notes.append(msg)
    for msg in notes:
        print(f"warning: {msg}", file=sys.stderr)

    text = render(args.command, cfg, report, args.seed)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
