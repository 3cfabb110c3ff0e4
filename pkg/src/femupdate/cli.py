"""Experiment runner and command-line interface.

Verbs: ``run`` (single experiment), ``compare`` (several optimizers on one
problem), ``validate-config``.  Experiment configs are versioned JSON; see
README for the schema.  Each run writes CSV tables plus one structured
summary document into the output directory.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .beam_fe import StructureModel, assemble, load_structure
from .modal import average_comac, comac, select_measured, solve_modes
from .optimizers import (
    GaConfig,
    OptimizerRun,
    PsoConfig,
    SaConfig,
    ga_minimize,
    pso_minimize,
    sa_minimize,
)
from .surrogate import SurrogateLoopConfig, surrogate_optimize
from .updating import (
    N_RIGID_FREE_FREE,
    UpdatingProblem,
    default_weights,
    evaluate_cost,
    load_targets,
    make_objective,
    model_frequencies,
    relative_errors_pct,
    synthetic_targets,
)

EXPERIMENT_SCHEMA_VERSION = 1

ALGORITHMS = ("pso", "sa", "ga", "surrogate")
WEIGHT_MODES = ("paper-rule", "uniform")


class ConfigError(ValueError):
    """Experiment config failed validation; message lists field errors."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("invalid experiment config:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class ExperimentConfig:
    structure: str
    targets: dict
    optimizer: dict
    bounds: dict
    weights: str = "paper-rule"
    n_modes: int = 5
    seed: int | None = None
    seed_initial_point: bool = True
    output_dir: str = "runs"
    name: str = "experiment"
    base_dir: Path = Path(".")


def _validate_config_dict(data: dict, base_dir: Path) -> tuple[ExperimentConfig, list[str]]:
    errors: list[str] = []
    if data.get("schema_version") != EXPERIMENT_SCHEMA_VERSION:
        errors.append(
            f"schema_version: expected {EXPERIMENT_SCHEMA_VERSION}, got {data.get('schema_version')!r}"
        )
    structure = data.get("structure")
    if not isinstance(structure, str) or not structure:
        errors.append("structure: must be a config path or bundled config name")

    targets = data.get("targets")
    if not isinstance(targets, dict) or len(targets) != 1 or next(iter(targets), None) not in (
        "file",
        "synthetic",
    ):
        errors.append('targets: must be {"file": ...} or {"synthetic": {...}}')
    elif "synthetic" in targets:
        block = targets["synthetic"]
        if not isinstance(block, dict) or "true_moduli" not in block:
            errors.append("targets.synthetic: needs a true_moduli list")
        else:
            moduli = block["true_moduli"]
            if not isinstance(moduli, list) or not all(
                isinstance(v, (int, float)) and v > 0 for v in moduli
            ):
                errors.append("targets.synthetic.true_moduli: must be positive numbers")
            if block.get("noise_pct", 0) and not isinstance(block.get("noise_pct"), (int, float)):
                errors.append("targets.synthetic.noise_pct: must be a number")

    weights = data.get("weights", "paper-rule")
    if weights not in WEIGHT_MODES:
        errors.append(f"weights: must be one of {WEIGHT_MODES}, got {weights!r}")

    bounds = data.get("bounds")
    if not isinstance(bounds, dict):
        errors.append('bounds: must be {"lo": pa, "hi": pa} or {"per_element": [[lo, hi], ...]}')
    elif "per_element" in bounds:
        rows = bounds["per_element"]
        if not isinstance(rows, list) or not all(
            isinstance(r, list) and len(r) == 2 and r[0] < r[1] for r in rows
        ):
            errors.append("bounds.per_element: must be [lo, hi] pairs with lo < hi")
    elif not ("lo" in bounds and "hi" in bounds and bounds["lo"] < bounds["hi"]):
        errors.append("bounds: lo and hi required with lo < hi")

    optimizer = data.get("optimizer")
    if not isinstance(optimizer, dict) or optimizer.get("algorithm") not in ALGORITHMS:
        errors.append(f"optimizer.algorithm: must be one of {ALGORITHMS}")

    n_modes = data.get("n_modes", 5)
    if not isinstance(n_modes, int) or n_modes < 1:
        errors.append("n_modes: must be a positive integer")

    seed = data.get("seed")
    if seed is not None and not isinstance(seed, int):
        errors.append("seed: must be an integer")

    config = ExperimentConfig(
        structure=str(structure),
        targets=targets if isinstance(targets, dict) else {},
        optimizer=optimizer if isinstance(optimizer, dict) else {},
        bounds=bounds if isinstance(bounds, dict) else {},
        weights=str(weights),
        n_modes=n_modes if isinstance(n_modes, int) else 5,
        seed=seed,
        seed_initial_point=bool(data.get("seed_initial_point", True)),
        output_dir=str(data.get("output_dir", "runs")),
        name=str(data.get("name", "experiment")),
        base_dir=base_dir,
    )
    return config, errors


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    """Load and validate an experiment config; raises ConfigError."""
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"config file not found: {path}"])
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: not valid JSON ({exc})"]) from exc
    config, errors = _validate_config_dict(data, path.parent)
    if not errors:
        errors.extend(_check_referenced_files(config))
    if errors:
        raise ConfigError(errors)
    return config


def _check_referenced_files(config: ExperimentConfig) -> list[str]:
    errors = []
    try:
        _resolve_structure(config)
    except (OSError, ValueError) as exc:
        errors.append(f"structure: {exc}")
    if "file" in config.targets:
        try:
            _load_target_file(config, config.targets["file"])
        except (OSError, ValueError) as exc:
            errors.append(f"targets.file: {exc}")
    return errors


def _resolve_source(config: ExperimentConfig, source: str) -> str:
    relative = config.base_dir / source
    return str(relative) if relative.exists() else source


def _resolve_structure(config: ExperimentConfig) -> StructureModel:
    return load_structure(_resolve_source(config, config.structure))


def _load_target_file(config: ExperimentConfig, source: str) -> np.ndarray:
    return load_targets(_resolve_source(config, source))


def _bounds_array(config: ExperimentConfig, n_params: int) -> np.ndarray:
    if "per_element" in config.bounds:
        bounds = np.asarray(config.bounds["per_element"], dtype=float)
        if bounds.shape != (n_params, 2):
            raise ConfigError(
                [f"bounds.per_element: expected {n_params} pairs, got {bounds.shape[0]}"]
            )
        return bounds
    lo, hi = float(config.bounds["lo"]), float(config.bounds["hi"])
    return np.tile([lo, hi], (n_params, 1))


def _optimizer_config(config: ExperimentConfig, seed_override: int | None):
    block = dict(config.optimizer)
    algorithm = block.pop("algorithm")
    classes = {
        "pso": PsoConfig,
        "sa": SaConfig,
        "ga": GaConfig,
        "surrogate": SurrogateLoopConfig,
    }
    cls = classes[algorithm]
    if algorithm == "surrogate" and "ga" in block:
        block["ga"] = GaConfig(**block["ga"])
    try:
        parsed = cls(**block)
    except TypeError as exc:
        raise ConfigError([f"optimizer: {exc}"]) from exc
    seed = seed_override if seed_override is not None else config.seed
    if seed is not None:
        parsed = replace(parsed, seed=seed)
    return algorithm, parsed


@dataclass(frozen=True)
class RunReport:
    """Everything one updating run produced, ready for emission."""

    name: str
    algorithm: str
    seed: int
    target_frequencies: np.ndarray
    initial_frequencies: np.ndarray
    updated_frequencies: np.ndarray
    initial_errors_pct: np.ndarray
    updated_errors_pct: np.ndarray
    initial_mean_error_pct: float
    updated_mean_error_pct: float
    initial_moduli: np.ndarray
    updated_moduli: np.ndarray
    best_cost: float
    evaluations: int
    history: np.ndarray
    wall_seconds: float
    config_echo: dict
    comac_initial: np.ndarray | None = None
    comac_updated: np.ndarray | None = None
    average_comac_initial: float | None = None
    average_comac_updated: float | None = None


def build_problem(
    config: ExperimentConfig,
) -> tuple[UpdatingProblem, np.ndarray, np.ndarray | None]:
    """Resolve structure, targets and weights into an UpdatingProblem.

    Returns the problem, the initial-model frequencies, and the target
    mode shapes at measured DOFs (synthetic mode only, else None).
    """
    model = _resolve_structure(config)
    initial = solve_modes(assemble(model), config.n_modes, expected_rigid=N_RIGID_FREE_FREE)

    target_shapes = None
    if "file" in config.targets:
        targets = _load_target_file(config, config.targets["file"])
        if targets.shape[0] < config.n_modes:
            raise ConfigError(
                [f"targets.file: has {targets.shape[0]} modes, need n_modes={config.n_modes}"]
            )
        targets = targets[: config.n_modes]
    else:
        block = config.targets["synthetic"]
        targets, target_shapes = synthetic_targets(
            model,
            np.asarray(block["true_moduli"], dtype=float),
            config.n_modes,
            noise_pct=float(block.get("noise_pct", 0.0)),
            seed=block.get("seed"),
        )

    if config.weights == "paper-rule":
        weights = default_weights(targets, initial.frequencies)
    else:
        weights = np.ones(config.n_modes)

    bounds = _bounds_array(config, len(model.elements))
    problem = UpdatingProblem(
        base_model=model, target_frequencies=targets, weights=weights, bounds=bounds
    )
    return problem, initial.frequencies, target_shapes


def _dispatch(
    algorithm: str,
    parsed_config,
    problem: UpdatingProblem,
    x0: np.ndarray | None,
) -> OptimizerRun:
    objective = make_objective(problem)
    if algorithm == "pso":
        return pso_minimize(objective, problem.bounds, parsed_config, x0=x0)
    if algorithm == "sa":
        return sa_minimize(objective, problem.bounds, parsed_config, x0=x0)
    if algorithm == "ga":
        return ga_minimize(objective, problem.bounds, parsed_config, x0=x0)
    return surrogate_optimize(problem, parsed_config)


def run_experiment(
    config: ExperimentConfig,
    seed_override: int | None = None,
) -> RunReport:
    """Execute one updating experiment end to end."""
    started = time.perf_counter()
    problem, initial_frequencies, target_shapes = build_problem(config)
    model = problem.base_model
    algorithm, parsed = _optimizer_config(config, seed_override)

    x0 = model.moduli() if config.seed_initial_point else None
    run = _dispatch(algorithm, parsed, problem, x0)

    updated_eval = evaluate_cost(problem, run.best_params)
    initial_errors, initial_mean = relative_errors_pct(
        problem.target_frequencies, initial_frequencies
    )
    updated_errors, updated_mean = relative_errors_pct(
        problem.target_frequencies, updated_eval.frequencies
    )

    comac_initial = comac_updated = None
    avg_initial = avg_updated = None
    if target_shapes is not None:
        initial_solution = solve_modes(assemble(model), config.n_modes, expected_rigid=3)
        updated_solution = model_frequencies(problem, run.best_params)
        comac_initial = comac(
            select_measured(initial_solution, model.measured_dofs), target_shapes
        )
        comac_updated = comac(
            select_measured(updated_solution, model.measured_dofs), target_shapes
        )
        avg_initial = average_comac(comac_initial)
        avg_updated = average_comac(comac_updated)

    echo = {
        "structure": config.structure,
        "targets": config.targets,
        "weights": config.weights,
        "bounds": config.bounds,
        "optimizer": config.optimizer,
        "n_modes": config.n_modes,
        "seed_initial_point": config.seed_initial_point,
    }
    return RunReport(
        name=config.name,
        algorithm=algorithm,
        seed=run.seed,
        target_frequencies=problem.target_frequencies,
        initial_frequencies=initial_frequencies,
        updated_frequencies=updated_eval.frequencies,
        initial_errors_pct=initial_errors,
        updated_errors_pct=updated_errors,
        initial_mean_error_pct=initial_mean,
        updated_mean_error_pct=updated_mean,
        initial_moduli=model.moduli(),
        updated_moduli=run.best_params,
        best_cost=run.best_cost,
        evaluations=run.evaluations,
        history=run.history,
        wall_seconds=time.perf_counter() - started,
        config_echo=echo,
        comac_initial=comac_initial,
        comac_updated=comac_updated,
        average_comac_initial=avg_initial,
        average_comac_updated=avg_updated,
    )


def _fmt(value: float) -> str:
    return f"{float(value):.17g}"


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, (float, np.floating)) else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def report_text(report: RunReport) -> str:
    """Human-readable result table."""
    lines = [
        f"run: {report.name}  algorithm: {report.algorithm}  seed: {report.seed}",
        "",
        f"{'mode':>4}  {'target (Hz)':>12}  {'initial (Hz)':>12}  {'updated (Hz)':>12}"
        f"  {'init err %':>10}  {'upd err %':>10}",
    ]
    for i in range(report.target_frequencies.shape[0]):
        lines.append(
            f"{i + 1:>4}  {report.target_frequencies[i]:>12.4f}  "
            f"{report.initial_frequencies[i]:>12.4f}  {report.updated_frequencies[i]:>12.4f}  "
            f"{report.initial_errors_pct[i]:>10.3f}  {report.updated_errors_pct[i]:>10.3f}"
        )
    lines.append(
        f"{'mean':>4}  {'':>12}  {'':>12}  {'':>12}  "
        f"{report.initial_mean_error_pct:>10.3f}  {report.updated_mean_error_pct:>10.3f}"
    )
    lines.append("")
    lines.append(f"{'element':>8}  {'initial E (Pa)':>16}  {'updated E (Pa)':>16}")
    for i in range(report.initial_moduli.shape[0]):
        lines.append(
            f"{i:>8}  {report.initial_moduli[i]:>16.6e}  {report.updated_moduli[i]:>16.6e}"
        )
    lines.append("")
    if report.average_comac_initial is not None:
        lines.append(
            f"average COMAC vs targets: initial {report.average_comac_initial:.4f}, "
            f"updated {report.average_comac_updated:.4f}"
        )
    lines.append(
        f"best cost {report.best_cost:.6e} after {report.evaluations} evaluations "
        f"({report.wall_seconds:.2f} s)"
    )
    return "\n".join(lines)


def emit_report(report: RunReport, out_dir: str | Path) -> dict[str, Path]:
    """Write CSV tables, a text table and a JSON summary; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    paths["frequencies"] = out / "frequencies.csv"
    _write_csv(
        paths["frequencies"],
        ["mode", "target_hz", "initial_hz", "updated_hz", "initial_error_pct", "updated_error_pct"],
        [
            (
                i + 1,
                report.target_frequencies[i],
                report.initial_frequencies[i],
                report.updated_frequencies[i],
                report.initial_errors_pct[i],
                report.updated_errors_pct[i],
            )
            for i in range(report.target_frequencies.shape[0])
        ],
    )
    paths["moduli"] = out / "moduli.csv"
    _write_csv(
        paths["moduli"],
        ["element", "initial_modulus_pa", "updated_modulus_pa"],
        [
            (i, report.initial_moduli[i], report.updated_moduli[i])
            for i in range(report.initial_moduli.shape[0])
        ],
    )
    paths["history"] = out / "history.csv"
    _write_csv(
        paths["history"],
        ["step", "best_cost"],
        [(i, c) for i, c in enumerate(report.history)],
    )
    if report.comac_initial is not None:
        paths["comac"] = out / "comac.csv"
        _write_csv(
            paths["comac"],
            ["measured_dof_row", "comac_initial", "comac_updated"],
            [
                (i, report.comac_initial[i], report.comac_updated[i])
                for i in range(report.comac_initial.shape[0])
            ],
        )

    summary = {
        "name": report.name,
        "algorithm": report.algorithm,
        "seed": report.seed,
        "best_cost": report.best_cost,
        "evaluations": report.evaluations,
        "wall_seconds": report.wall_seconds,
        "target_frequencies_hz": report.target_frequencies.tolist(),
        "initial_frequencies_hz": report.initial_frequencies.tolist(),
        "updated_frequencies_hz": report.updated_frequencies.tolist(),
        "initial_errors_pct": report.initial_errors_pct.tolist(),
        "updated_errors_pct": report.updated_errors_pct.tolist(),
        "initial_mean_error_pct": report.initial_mean_error_pct,
        "updated_mean_error_pct": report.updated_mean_error_pct,
        "initial_moduli_pa": report.initial_moduli.tolist(),
        "updated_moduli_pa": report.updated_moduli.tolist(),
        "average_comac_initial": report.average_comac_initial,
        "average_comac_updated": report.average_comac_updated,
        "config": report.config_echo,
    }
    paths["summary"] = out / "summary.json"
    paths["summary"].write_text(json.dumps(summary, indent=2) + "\n")
    paths["table"] = out / "report.txt"
    paths["table"].write_text(report_text(report) + "\n")
    return paths


def _problem_fingerprint(config: ExperimentConfig) -> dict:
    return {
        "structure": config.structure,
        "targets": config.targets,
        "weights": config.weights,
        "bounds": config.bounds,
        "n_modes": config.n_modes,
    }


def compare_optimizers(
    configs: Sequence[ExperimentConfig],
    seed_override: int | None = None,
) -> tuple[list[RunReport], list[dict]]:
    """Run several optimizer configs on one shared problem.

    All configs must agree on structure, targets, weights, bounds and
    n_modes; only the optimizer block (and seeds) may differ.
    """
    if len(configs) < 2:
        raise ValueError("compare needs at least two configs")
    reference = _problem_fingerprint(configs[0])
    for config in configs[1:]:
        if _problem_fingerprint(config) != reference:
            raise ValueError(
                "configs do not share the same problem: "
                f"{_problem_fingerprint(config)} != {reference}"
            )
    reports = [run_experiment(config, seed_override=seed_override) for config in configs]
    rows = [
        {
            "name": r.name,
            "algorithm": r.algorithm,
            "best_cost": r.best_cost,
            "updated_mean_error_pct": r.updated_mean_error_pct,
            "initial_mean_error_pct": r.initial_mean_error_pct,
            "average_comac_updated": r.average_comac_updated,
            "evaluations": r.evaluations,
            "wall_seconds": r.wall_seconds,
            "seed": r.seed,
        }
        for r in reports
    ]
    return reports, rows


def comparison_text(rows: Sequence[dict]) -> str:
    header = (
        f"{'algorithm':>10}  {'mean err %':>10}  {'avg COMAC':>10}  "
        f"{'evaluations':>12}  {'seconds':>8}"
    )
    lines = [header]
    for row in rows:
        comac_value = row["average_comac_updated"]
        comac_text = f"{comac_value:.4f}" if comac_value is not None else "-"
        lines.append(
            f"{row['algorithm']:>10}  {row['updated_mean_error_pct']:>10.3f}  "
            f"{comac_text:>10}  {row['evaluations']:>12}  {row['wall_seconds']:>8.2f}"
        )
    return "\n".join(lines)


def emit_comparison(rows: Sequence[dict], out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    paths["comparison"] = out / "comparison.csv"
    header = [
        "algorithm",
        "best_cost",
        "initial_mean_error_pct",
        "updated_mean_error_pct",
        "average_comac_updated",
        "evaluations",
        "seed",
    ]
    table_rows = []
    for row in rows:
        table_rows.append(
            [
                row["algorithm"],
                row["best_cost"],
                row["initial_mean_error_pct"],
                row["updated_mean_error_pct"],
                "" if row["average_comac_updated"] is None else row["average_comac_updated"],
                row["evaluations"],
                row["seed"],
            ]
        )
    _write_csv(paths["comparison"], header, table_rows)
    paths["summary"] = out / "comparison.json"
    paths["summary"].write_text(json.dumps(rows, indent=2) + "\n")
    return paths


def _cmd_run(args) -> int:
    config = load_experiment_config(args.config)
    report = run_experiment(config, seed_override=args.seed)
    out_dir = Path(args.output_dir) if args.output_dir else Path(config.output_dir) / config.name
    paths = emit_report(report, out_dir)
    print(report_text(report))
    print(f"\nwrote {', '.join(str(p) for p in paths.values())}")
    return 0


def _cmd_compare(args) -> int:
    configs = [load_experiment_config(path) for path in args.configs]
    reports, rows = compare_optimizers(configs, seed_override=args.seed)
    out_dir = Path(args.output_dir) if args.output_dir else Path(configs[0].output_dir) / "compare"
    for report in reports:
        emit_report(report, out_dir / report.name)
    paths = emit_comparison(rows, out_dir)
    print(comparison_text(rows))
    print(f"\nwrote {', '.join(str(p) for p in paths.values())}")
    return 0


def _cmd_validate(args) -> int:
    status = 0
    for path in args.configs:
        try:
            load_experiment_config(path)
        except ConfigError as exc:
            print(f"{path}: INVALID")
            for error in exc.errors:
                print(f"  - {error}")
            status = 1
        else:
            print(f"{path}: OK")
    return status


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="femupdate",
        description="Frequency-based finite element model updating experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_parser = sub.add_parser("run", help="run a single updating experiment")
    run_parser.add_argument("config", help="experiment config JSON")
    run_parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    run_parser.add_argument("--output-dir", default=None, help="override the output directory")
    run_parser.set_defaults(func=_cmd_run)

    compare_parser = sub.add_parser("compare", help="run several configs on one problem")
    compare_parser.add_argument("configs", nargs="+", help="experiment config JSONs")
    compare_parser.add_argument("--seed", type=int, default=None)
    compare_parser.add_argument("--output-dir", default=None)
    compare_parser.set_defaults(func=_cmd_compare)

    validate_parser = sub.add_parser("validate-config", help="check config files")
    validate_parser.add_argument("configs", nargs="+")
    validate_parser.set_defaults(func=_cmd_validate)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
