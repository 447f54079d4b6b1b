"""Command-line driver: ``cvqt <experiment> [flags]``.

Exit codes: 0 success, 2 argument or I/O error, 3 a tolerance or truncation
check failed (the report is still written).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict
from typing import Any, Sequence

from . import __version__, protocol
from .fock import TRUNCATION_BUDGET, PureState, tensor_product
from .optics import BeamSplitterSpec, rho_bs_closed_form
from .report import ExperimentReport
from .sources import (
    coherent_cutoff,
    coherent_state,
    fock_state,
    laser_density,
    squeezed_cutoff,
    tmsv_phase_averaged,
    tmsv_pure,
)

DEFAULTS: dict[str, Any] = {
    "alpha": 1.0,
    "eta": 0.5,
    "gain": 1.0,
    "cutoff": None,
    "branches": None,
    "seed": 0,
    "grid_step": 0.1,
    "resource": "pure",
    "format": "json",
    "out": None,
    "phi": 0.0,
    "reflectivity": 0.5,
    "verify": "shared",
    "shots": 20000,
    "jobs": 1,
    "source": "laser",
    "n": 1,
}

SOURCES = ("coherent", "laser", "fock", "tmsv", "tmsv-averaged", "split-laser", "split-closed-form")

# Tolerances checked before a run is reported as successful.
WEIGHT_TOLERANCE = 1e-6
EXACT_TOLERANCE = 1e-10


class ArgumentError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of flat key/value settings")
    common.add_argument("--alpha", help="coherent amplitude (sweep: start:stop:step)")
    common.add_argument("--eta", help="squeezing parameter tanh(r) (sweep: start:stop:step)")
    common.add_argument("--phi", type=float)
    common.add_argument("--gain", type=float)
    common.add_argument("--cutoff", type=int)
    common.add_argument("--branches", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--grid-step", dest="grid_step", type=float)
    common.add_argument("--resource", choices=protocol.RESOURCES)
    common.add_argument("--out")
    common.add_argument("--format", choices=("json", "csv"))

    parser = argparse.ArgumentParser(prog="cvqt", description="Continuous-variable teleportation experiments.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ideal", parents=[common], help="teleport a coherent state through a two-mode squeezed pair")
    shared = sub.add_parser("shared-laser", parents=[common], help="every field derived from one laser")
    shared.add_argument("--verify", choices=("shared", "independent", "none"))
    shared.add_argument("--shots", type=int)
    crit = sub.add_parser("criteria", parents=[common], help="coherence criteria checks")
    crit.add_argument("--reflectivity", type=float, help="beam-splitter intensity reflectivity")
    sub.add_parser("pef", parents=[common], help="coherent vs number-state decompositions under a POVM battery")
    sweep = sub.add_parser("sweep", parents=[common], help="average fidelity over a range of eta or alpha")
    sweep.add_argument("--jobs", type=int)
    states = sub.add_parser("states", parents=[common], help="dump a source density matrix")
    states.add_argument("--source", choices=SOURCES)
    states.add_argument("--n", type=int, help="photon number for --source fock")
    return parser


def _parse_range(text: str) -> list[float]:
    start, stop, step = (float(p) for p in text.split(":"))
    if step <= 0 or stop < start:
        raise ArgumentError(f"bad range {text!r}")
    count = int(math.floor((stop - start) / step + 1e-9))
    return [float(f"{start + k * step:.12g}") for k in range(count + 1)]


def _scalar(name: str, value: Any) -> float:
    if isinstance(value, str):
        if ":" in value:
            raise ArgumentError(f"--{name} takes a single value for this command")
        try:
            return float(value)
        except ValueError:
            raise ArgumentError(f"--{name}: not a number: {value!r}") from None
    return float(value)


def resolve_settings(args: argparse.Namespace) -> dict[str, Any]:
    """Merge defaults, the optional config file and explicit flags (in rising priority)."""
    settings = dict(DEFAULTS)
    if args.config:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ArgumentError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(loaded, dict) or any(isinstance(v, (dict, list)) for v in loaded.values()):
            raise ArgumentError("config file must be a flat JSON object")
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise ArgumentError(f"unknown config keys: {sorted(unknown)}")
        settings.update(loaded)
    for key, value in vars(args).items():
        if key in settings and value is not None:
            settings[key] = value
    return settings


def _config(settings: dict) -> protocol.ProtocolConfig:
    return protocol.ProtocolConfig(
        alpha=_scalar("alpha", settings["alpha"]),
        phi=float(settings["phi"]),
        eta=_scalar("eta", settings["eta"]),
        resource=settings["resource"],
        gain=float(settings["gain"]),
        cutoff=settings["cutoff"],
        grid_step=float(settings["grid_step"]),
        branches=settings["branches"],
        seed=int(settings["seed"]),
    )


def _config_echo(config: protocol.ProtocolConfig) -> dict:
    echo = asdict(config)
    echo.pop("input_state")
    echo["cutoff"] = config.resolved_cutoff()
    return echo


def _provenance(settings: dict, **extra) -> dict:
    return {
        "version": __version__,
        "seed": int(settings["seed"]),
        "truncation_budget": TRUNCATION_BUDGET,
        "weight_tolerance": WEIGHT_TOLERANCE,
        "exact_tolerance": EXACT_TOLERANCE,
        **extra,
    }


def _finish(report: ExperimentReport, failures: list[str]) -> ExperimentReport:
    report.metrics["failures"] = len(failures)
    report.provenance["failure_reasons"] = failures
    return report


def cmd_ideal(settings: dict) -> tuple[ExperimentReport, list[str]]:
    config = _config(settings)
    result = protocol.run(config)
    metrics = {
        "average_fidelity": result.average_fidelity,
        "total_weight": result.total_weight,
        "bob_coherence": result.bob_coherence,
        "output_max_offdiagonal": result.average_output.max_offdiagonal(),
    }
    if config.resource == "pure":
        metrics["oracle_fidelity"] = protocol.gaussian.teleport_fidelity(
            config.alpha, config.phi, config.eta, config.resource_phase, result.lo_angle, config.gain
        )
    failures = list(result.warnings)
    if abs(result.total_weight - 1) > WEIGHT_TOLERANCE:
        failures.append(f"outcome weights sum to {result.total_weight:.12g}")
    report = ExperimentReport(
        "ideal" if config.resource == "pure" else "phase-averaged",
        _config_echo(config),
        metrics,
        {},
        _provenance(settings, grid_points=int(result.outcomes.size), lo_angle=result.lo_angle),
    )
    return report, failures


def cmd_shared_laser(settings: dict) -> tuple[ExperimentReport, list[str]]:
    config = _config(settings).replace(resource="pure")
    result = protocol.shared_laser_cvqt_run(config)
    ideal = result.branches[0].average_fidelity
    spread = max(abs(r.fidelity - ideal) for r in result.records)
    metrics = {
        "branch_fidelity": result.conditional_fidelity,
        "branch_fidelity_spread": spread,
        "fixed_coherent_fidelity": result.fixed_coherent_fidelity,
        "laser_state_fidelity": result.laser_fidelity,
        "averaged_output_max_offdiagonal": result.averaged_offdiagonal,
        "branches": len(result.branches),
    }
    tables = {
        "branches": [
            {"phase": r.branch_phase, "fidelity": r.fidelity, "weight": r.weight} for r in result.records
        ]
    }
    if settings["verify"] != "none":
        check = protocol.victor_verification(result, config, settings["verify"], shots=int(settings["shots"]))
        metrics["verifier_fidelity_estimate"] = check.fidelity_estimate
        metrics["verifier_exact_fidelity"] = check.exact_fidelity
        tables["verification"] = [asdict(q) for q in check.quadratures]
    failures = list(result.warnings)
    if spread > EXACT_TOLERANCE:
        failures.append(f"branch fidelities differ by {spread:.3g}")
    if result.averaged_offdiagonal > EXACT_TOLERANCE:
        failures.append(f"averaged output off-diagonal {result.averaged_offdiagonal:.3g}")
    report = ExperimentReport("shared-laser", _config_echo(config), metrics, tables, _provenance(settings))
    return report, failures


def cmd_criteria(settings: dict) -> tuple[ExperimentReport, list[str]]:
    alpha = _scalar("alpha", settings["alpha"])
    eta = _scalar("eta", settings["eta"])
    refl = float(settings["reflectivity"])
    if not 0 <= refl <= 1:
        raise ArgumentError("--reflectivity must lie in [0, 1]")
    r, t = math.sqrt(refl), math.sqrt(1 - refl)
    cutoff = settings["cutoff"]
    a = protocol.criterion_a_check(alpha, r, t, cutoff)
    b = protocol.criterion_b_check(alpha, r, t, cutoff)
    c = protocol.criterion_c_check(eta, cutoff)
    metrics = {
        "a_product_distance": a.product_distance,
        "a_mutual_information_bits": a.mutual_information,
        "a_closed_form_gap": a.closed_form_gap,
        "b_classical_residual": b.classical_residual,
        "b_joint_dephasing_residual": b.joint_dephasing_residual,
        "b_witness_magnitude": abs(b.witness),
        "b_witness_expected": b.witness_expected,
        "c_averaged_log_negativity": c.averaged_negativity,
        "c_pure_log_negativity": c.pure_negativity,
        "c_averaged_max_offdiagonal": c.averaged_offdiagonal,
        "c_ensemble_gap": c.ensemble_gap,
    }
    failures = []
    if a.closed_form_gap > 1e-12:
        failures.append(f"split-laser closed form gap {a.closed_form_gap:.3g}")
    if c.averaged_negativity > EXACT_TOLERANCE:
        failures.append(f"averaged pair log-negativity {c.averaged_negativity:.3g}")
    if c.ensemble_gap > 1e-12:
        failures.append(f"pump-phase ensemble gap {c.ensemble_gap:.3g}")
    config = {"alpha": alpha, "eta": eta, "reflectivity": refl, "cutoff": cutoff}
    report = ExperimentReport("criteria", config, metrics, {}, _provenance(settings))
    return report, failures


def cmd_pef(settings: dict) -> tuple[ExperimentReport, list[str]]:
    alpha = _scalar("alpha", settings["alpha"])
    seed = int(settings["seed"])
    flag = protocol.pef_flagship(alpha, settings["cutoff"], seed=seed)
    metrics = {
        "laser_max_discrepancy": flag.laser.max_discrepancy,
        "laser_povm_count": flag.laser.povm_count,
        "laser_state_distance": flag.laser.state_distance,
        "split_max_discrepancy": flag.split.max_discrepancy,
        "split_povm_count": flag.split.povm_count,
        "split_state_distance": flag.split.state_distance,
        "coherent_member_entropy_bits": flag.coherent_member_entropy,
        "number_member_entropy_bits": flag.number_member_entropy,
    }
    tables = {
        "laser": [{"povm": n, "discrepancy": d} for n, d in flag.laser.discrepancies],
        "split": [{"povm": n, "discrepancy": d} for n, d in flag.split.discrepancies],
    }
    failures = [
        f"{name} discrepancy {rep.max_discrepancy:.3g}"
        for name, rep in (("laser", flag.laser), ("split", flag.split))
        if rep.max_discrepancy >= EXACT_TOLERANCE
    ]
    config = {"alpha": alpha, "cutoff": settings["cutoff"] or coherent_cutoff(alpha)}
    return ExperimentReport("pef", config, metrics, tables, _provenance(settings)), failures


def cmd_sweep(settings: dict) -> tuple[ExperimentReport, list[str]]:
    ranged = [k for k in ("eta", "alpha") if isinstance(settings[k], str) and ":" in settings[k]]
    if len(ranged) != 1:
        raise ArgumentError("sweep needs exactly one of --eta/--alpha as start:stop:step")
    name = ranged[0]
    values = _parse_range(settings[name])
    base = _config({**settings, name: values[0]})
    if name == "eta" and values[-1] >= 1:
        raise ArgumentError("eta must stay below 1")
    rows = protocol.fidelity_sweep(base, name, values, jobs=int(settings["jobs"]))
    failures = [
        f"{name}={row[name]}: weights sum to {row['total_weight']:.12g}"
        for row in rows
        if abs(row["total_weight"] - 1) > WEIGHT_TOLERANCE
    ]
    fid = [row["fidelity"] for row in rows]
    metrics = {
        "points": len(rows),
        "min_fidelity": min(fid),
        "max_fidelity": max(fid),
        "monotone_increasing": all(b > a for a, b in zip(fid, fid[1:])),
    }
    config = _config_echo(base)
    config[name] = settings[name]
    report = ExperimentReport("sweep", config, metrics, {"sweep": rows}, _provenance(settings, swept=name))
    return report, failures


def _source_state(settings: dict):
    source = settings["source"]
    alpha = _scalar("alpha", settings["alpha"])
    eta = _scalar("eta", settings["eta"])
    phi = float(settings["phi"])
    cutoff = settings["cutoff"]
    if source == "coherent":
        return coherent_state(alpha, phi, cutoff)
    if source == "laser":
        return laser_density(alpha, cutoff)
    if source == "fock":
        return fock_state(int(settings["n"]), cutoff or max(1, int(settings["n"])))
    if source == "tmsv":
        return tmsv_pure(eta, phi, cutoff)
    if source == "tmsv-averaged":
        return tmsv_phase_averaged(eta, cutoff)
    refl = float(settings["reflectivity"])
    r, t = math.sqrt(refl), math.sqrt(1 - refl)
    cutoff = cutoff or coherent_cutoff(alpha)
    if source == "split-laser":
        return protocol.split_laser(alpha, BeamSplitterSpec(r, t), cutoff)
    return rho_bs_closed_form(alpha, r, t, (cutoff, cutoff))


def cmd_states(settings: dict) -> tuple[ExperimentReport, list[str]]:
    import warnings

    from .fock import TruncationWarning

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TruncationWarning)
        state = _source_state(settings)
    rho = state.density() if isinstance(state, PureState) else state
    system = rho.system
    rows = []
    for i in range(system.dim):
        for j in range(system.dim):
            value = rho.matrix[i, j]
            if abs(value) > 1e-15:
                rows.append(
                    {
                        "row": "|" + ",".join(map(str, system.occupation(i))) + ">",
                        "col": "|" + ",".join(map(str, system.occupation(j))) + ">",
                        "re": value.real,
                        "im": value.imag,
                    }
                )
    metrics = {"trace": rho.trace, "purity": rho.purity(), "max_offdiagonal": rho.max_offdiagonal()}
    config = {k: settings[k] for k in ("source", "alpha", "eta", "phi", "n", "reflectivity")}
    config["cutoffs"] = list(system.cutoffs)
    failures = [str(w.message) for w in caught if issubclass(w.category, TruncationWarning)]
    return ExperimentReport("states", config, metrics, {"matrix": rows}, _provenance(settings)), failures


COMMANDS = {
    "ideal": cmd_ideal,
    "shared-laser": cmd_shared_laser,
    "criteria": cmd_criteria,
    "pef": cmd_pef,
    "sweep": cmd_sweep,
    "states": cmd_states,
}

CSV_TABLES = {"sweep": "sweep", "states": "matrix", "shared-laser": "branches"}


def emit_report(report: ExperimentReport, fmt: str, out: str | None, command: str) -> None:
    text = report.to_json() if fmt == "json" else report.to_csv(CSV_TABLES.get(command))
    if out is None:
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ArgumentError(f"cannot write {out}: {exc}") from None
    for line in report.summary_lines():
        print(line)


def main(argv: Sequence[str] | None = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        settings = resolve_settings(args)
        report, failures = COMMANDS[args.command](settings)
        report = _finish(report, failures)
        emit_report(report, settings["format"], settings["out"], args.command)
    except (ArgumentError, ValueError) as exc:
        print(f"cvqt: error: {exc}", file=sys.stderr)
        return 2
    for reason in failures:
        print(f"cvqt: check failed: {reason}", file=sys.stderr)
    return 3 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
