"""Model-updating problem: targets, weights and the frequency-error cost.

The cost of a modulus vector E is
    cost(E) = sum_i gamma_i * ((f_i_target - f_i_calc(E)) / f_i_target)^2
where f_calc comes from assembling the parameterized model and solving for
its first N elastic natural frequencies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .beam_fe import StructureModel, _read_config_text, apply_parameters, assemble
from .modal import ModalSolution, select_measured, solve_modes

TARGETS_SCHEMA_VERSION = 1

# free-free 2-D frames always carry three rigid-body modes
N_RIGID_FREE_FREE = 3


@dataclass(frozen=True)
class UpdatingProblem:
    """Targets, mode weights and parameter bounds for one updating run."""

    base_model: StructureModel
    target_frequencies: np.ndarray
    weights: np.ndarray
    bounds: np.ndarray

    def __post_init__(self):
        targets = np.asarray(self.target_frequencies, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        bounds = np.asarray(self.bounds, dtype=float)
        if targets.ndim != 1 or targets.size < 1:
            raise ValueError("need at least one target frequency")
        if np.any(targets <= 0) or np.any(np.diff(targets) <= 0):
            raise ValueError("target frequencies must be positive and strictly ascending")
        if weights.shape != targets.shape:
            raise ValueError("weights must match target frequencies in length")
        if np.any(weights < 0) or not np.any(weights > 0):
            raise ValueError("weights must be non-negative with at least one positive entry")
        n_params = len(self.base_model.elements)
        if bounds.shape != (n_params, 2):
            raise ValueError(f"bounds must have shape ({n_params}, 2), got {bounds.shape}")
        if np.any(bounds[:, 0] >= bounds[:, 1]):
            raise ValueError("each bound must satisfy lo < hi")
        if np.any(bounds[:, 0] <= 0):
            raise ValueError("lower bounds must be positive moduli")
        for array in (targets, weights, bounds):
            array.flags.writeable = False
        object.__setattr__(self, "target_frequencies", targets)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bounds", bounds)

    @property
    def n_modes(self) -> int:
        return self.target_frequencies.shape[0]

    @property
    def n_params(self) -> int:
        return self.bounds.shape[0]


@dataclass(frozen=True)
class CostEvaluation:
    params: np.ndarray
    frequencies: np.ndarray
    cost: float


def default_weights(targets: Sequence[float], initial_frequencies: Sequence[float]) -> np.ndarray:
    """Per-mode weights: squared relative error of the initial model.

    gamma_i = ((f_i_target - f_i_initial) / f_i_target)^2.  All-zero output
    (initial model exact) is legal here but rejected by UpdatingProblem.
    """
    targets = np.asarray(targets, dtype=float)
    initial = np.asarray(initial_frequencies, dtype=float)
    if targets.shape != initial.shape or targets.ndim != 1:
        raise ValueError("target and initial frequency vectors must have equal length")
    if np.any(targets == 0):
        raise ValueError("target frequencies must be nonzero")
    return ((targets - initial) / targets) ** 2


def clip_to_bounds(params: Sequence[float], bounds: np.ndarray) -> np.ndarray:
    """Project a parameter vector onto the box [lo, hi] per dimension."""
    params = np.asarray(params, dtype=float)
    bounds = np.asarray(bounds, dtype=float)
    if params.shape[0] != bounds.shape[0]:
        raise ValueError("params and bounds lengths differ")
    return np.clip(params, bounds[:, 0], bounds[:, 1])


def model_frequencies(problem: UpdatingProblem, params: Sequence[float]) -> ModalSolution:
    """Modal solution of the base model with ``params`` applied."""
    model = apply_parameters(problem.base_model, params)
    matrices = assemble(model)
    return solve_modes(matrices, problem.n_modes, expected_rigid=N_RIGID_FREE_FREE)


def weighted_frequency_cost(
    targets: Sequence[float], weights: Sequence[float], calculated: Sequence[float]
) -> float:
    """sum_i gamma_i ((f_i_target - f_i_calc) / f_i_target)^2."""
    targets = np.asarray(targets, dtype=float)
    weights = np.asarray(weights, dtype=float)
    calculated = np.asarray(calculated, dtype=float)
    residual = (targets - calculated) / targets
    return float(np.sum(weights * residual * residual))


def evaluate_cost(problem: UpdatingProblem, params: Sequence[float]) -> CostEvaluation:
    """Assemble, solve and score a modulus vector against the targets."""
    if not np.any(problem.weights > 0):
        raise ValueError("all-zero weights: objective is identically zero")
    solution = model_frequencies(problem, params)
    calc = solution.frequencies
    cost = weighted_frequency_cost(problem.target_frequencies, problem.weights, calc)
    return CostEvaluation(
        params=np.asarray(params, dtype=float).copy(), frequencies=calc, cost=cost
    )


def make_objective(problem: UpdatingProblem) -> Callable[[np.ndarray], float]:
    """The scalar objective params -> cost used by the optimizers.  Pure and
    reentrant; safe to evaluate concurrently on a shared problem."""

    def objective(params: np.ndarray) -> float:
        return evaluate_cost(problem, params).cost

    return objective


def relative_errors_pct(
    targets: Sequence[float], calculated: Sequence[float]
) -> tuple[np.ndarray, float]:
    """Per-mode absolute relative errors in percent, and their mean."""
    targets = np.asarray(targets, dtype=float)
    calculated = np.asarray(calculated, dtype=float)
    if targets.shape != calculated.shape:
        raise ValueError("frequency vectors must have equal length")
    errors = 100.0 * np.abs(targets - calculated) / targets
    return errors, float(np.mean(errors))


def frequency_error_table(
    problem: UpdatingProblem, evaluation: CostEvaluation
) -> tuple[np.ndarray, float]:
    """Per-mode relative errors (%) of an evaluation against the targets."""
    return relative_errors_pct(problem.target_frequencies, evaluation.frequencies)


def synthetic_targets(
    model: StructureModel,
    true_moduli: Sequence[float],
    n_modes: int,
    noise_pct: float = 0.0,
    seed: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Generate target frequencies (and measured-DOF mode shapes) from a
    known true modulus vector.

    Gaussian noise of ``noise_pct`` percent (relative, per mode) is added to
    the frequencies when requested; the returned mode shapes stay noise-free
    and serve as cross-validation targets.
    """
    truth = apply_parameters(model, true_moduli)
    solution = solve_modes(assemble(truth), n_modes, expected_rigid=N_RIGID_FREE_FREE)
    frequencies = solution.frequencies.copy()
    if noise_pct:
        rng = np.random.default_rng(seed)
        frequencies = frequencies * (1.0 + 0.01 * noise_pct * rng.standard_normal(n_modes))
    shapes = select_measured(solution, model.measured_dofs)
    return frequencies, shapes


def load_targets(source: str | Path) -> np.ndarray:
    """Measured target frequencies (Hz) from a JSON targets file or a
    bundled name such as ``"h_structure.targets"``."""
    text, label = _read_config_text(source)
    data = json.loads(text)
    version = data.get("schema_version")
    if version != TARGETS_SCHEMA_VERSION:
        raise ValueError(
            f"{label}: unsupported targets schema_version {version!r} "
            f"(expected {TARGETS_SCHEMA_VERSION})"
        )
    frequencies = np.asarray(data["frequencies_hz"], dtype=float)
    if frequencies.ndim != 1 or frequencies.size < 1:
        raise ValueError(f"{label}: frequencies_hz must be a non-empty list")
    return frequencies
