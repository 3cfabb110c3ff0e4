import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from femupdate import (
    UpdatingProblem,
    apply_parameters,
    assemble,
    clip_to_bounds,
    default_weights,
    evaluate_cost,
    frequency_error_table,
    load_targets,
    make_objective,
    relative_errors_pct,
    solve_modes,
    synthetic_targets,
)
from femupdate.updating import weighted_frequency_cost

from conftest import random_frame

TABLE_MEASURED = np.array([53.9, 117.3, 208.4, 254.0, 445.1])
TABLE_INITIAL = np.array([56.2, 127.1, 228.4, 263.4, 445.1 + 7.3])  # 452.4
TABLE_PSO = np.array([53.9, 117.8, 208.5, 253.8, 438.5])

BOUNDS_12 = np.tile([5.6e10, 8.4e10], (12, 1))


@pytest.fixture(scope="module")
def recovery_problem(h_structure):
    truth = np.full(12, 7.0e10)
    truth[[3, 4, 5]] *= 0.85
    targets, shapes = synthetic_targets(h_structure, truth, 5)
    problem = UpdatingProblem(
        base_model=h_structure,
        target_frequencies=targets,
        weights=np.ones(5),
        bounds=BOUNDS_12,
    )
    return problem, truth, shapes


class TestDefaultWeights:
    def test_exact_initial_model_gives_zero_weights(self):
        f = np.array([10.0, 20.0])
        np.testing.assert_array_equal(default_weights(f, f), np.zeros(2))

    def test_first_table_mode(self):
        gamma = default_weights([53.9], [56.2])
        oracle = ((53.9 - 56.2) / 53.9) ** 2
        assert gamma[0] == pytest.approx(oracle, rel=1e-15)
        assert gamma[0] == pytest.approx(1.821e-3, rel=1e-3)

    def test_ten_percent_error(self):
        np.testing.assert_allclose(default_weights([100.0], [110.0]), [0.01], rtol=1e-14)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            default_weights([1.0, 2.0], [1.0])

    def test_zero_target(self):
        with pytest.raises(ValueError):
            default_weights([0.0], [1.0])


class TestProblemInvariants:
    def test_all_zero_weights_rejected(self, h_structure):
        with pytest.raises(ValueError, match="positive"):
            UpdatingProblem(h_structure, TABLE_MEASURED, np.zeros(5), BOUNDS_12)

    def test_descending_targets_rejected(self, h_structure):
        with pytest.raises(ValueError):
            UpdatingProblem(h_structure, TABLE_MEASURED[::-1].copy(), np.ones(5), BOUNDS_12)

    def test_bad_bounds_rejected(self, h_structure):
        bad = BOUNDS_12.copy()
        bad[2] = [8e10, 6e10]
        with pytest.raises(ValueError):
            UpdatingProblem(h_structure, TABLE_MEASURED, np.ones(5), bad)

    def test_bounds_count_must_match_elements(self, h_structure):
        with pytest.raises(ValueError):
            UpdatingProblem(h_structure, TABLE_MEASURED, np.ones(5), BOUNDS_12[:11])


class TestCostFormula:
    def test_table1_initial_cost_with_paper_rule_weights(self):
        # gamma_i = err_i^2, cost at the initial model = sum err_i^4
        gamma = default_weights(TABLE_MEASURED, TABLE_INITIAL)
        cost = weighted_frequency_cost(TABLE_MEASURED, gamma, TABLE_INITIAL)
        oracle = float(np.sum(((TABLE_MEASURED - TABLE_INITIAL) / TABLE_MEASURED) ** 4))
        assert cost == pytest.approx(oracle, rel=1e-14)
        assert cost == pytest.approx(1.39e-4, rel=0.01)

    def test_single_mode_ten_percent(self):
        assert weighted_frequency_cost([100.0], [1.0], [110.0]) == pytest.approx(0.01, rel=1e-14)

    def test_perfect_match_is_zero(self):
        assert weighted_frequency_cost(TABLE_MEASURED, np.ones(5), TABLE_MEASURED) == 0.0


class TestEvaluateCost:
    def test_zero_at_truth(self, recovery_problem):
        problem, truth, _ = recovery_problem
        assert evaluate_cost(problem, truth).cost < 1e-20

    def test_cost_matches_formula(self, recovery_problem):
        problem, truth, _ = recovery_problem
        params = problem.base_model.moduli()
        evaluation = evaluate_cost(problem, params)
        oracle = weighted_frequency_cost(
            problem.target_frequencies, problem.weights, evaluation.frequencies
        )
        assert evaluation.cost == oracle
        assert evaluation.cost > 0

    def test_nonnegative_on_random_points(self, recovery_problem):
        problem, _, _ = recovery_problem
        rng = np.random.default_rng(4)
        for _ in range(5):
            params = rng.uniform(problem.bounds[:, 0], problem.bounds[:, 1])
            assert evaluate_cost(problem, params).cost >= 0.0

    def test_weight_scaling_scales_cost_and_keeps_ranking(self, recovery_problem):
        problem, _, _ = recovery_problem
        scaled = UpdatingProblem(
            problem.base_model,
            problem.target_frequencies,
            3.0 * problem.weights,
            problem.bounds,
        )
        rng = np.random.default_rng(11)
        points = [
            rng.uniform(problem.bounds[:, 0], problem.bounds[:, 1]) for _ in range(5)
        ]
        costs = np.array([evaluate_cost(problem, p).cost for p in points])
        costs_scaled = np.array([evaluate_cost(scaled, p).cost for p in points])
        np.testing.assert_allclose(costs_scaled, 3.0 * costs, rtol=1e-12)
        np.testing.assert_array_equal(np.argsort(costs), np.argsort(costs_scaled))

    def test_all_zero_weights_rejected_at_evaluation(self, recovery_problem):
        problem, truth, _ = recovery_problem
        degenerate = UpdatingProblem(
            problem.base_model,
            problem.target_frequencies,
            np.array([1.0, 0.0, 0.0, 0.0, 0.0]),
            problem.bounds,
        )
        # per-mode zeros are fine; only the all-zero vector is an error, and
        # that is already unconstructible
        assert evaluate_cost(degenerate, truth).cost < 1e-20

    def test_objective_is_deterministic(self, recovery_problem):
        problem, _, _ = recovery_problem
        objective = make_objective(problem)
        params = problem.base_model.moduli() * 1.05
        assert objective(params) == objective(params)


class TestFrequencyErrorTable:
    def test_table1_initial_column(self):
        errors, mean = relative_errors_pct(TABLE_MEASURED, TABLE_INITIAL)
        oracle = 100.0 * np.abs(TABLE_MEASURED - TABLE_INITIAL) / TABLE_MEASURED
        np.testing.assert_allclose(errors, oracle, rtol=1e-14)
        np.testing.assert_allclose(errors, [4.27, 8.35, 9.60, 3.70, 1.64], atol=0.005)
        assert mean == pytest.approx(5.51, abs=0.005)

    def test_table1_pso_column(self):
        errors, mean = relative_errors_pct(TABLE_MEASURED, TABLE_PSO)
        np.testing.assert_allclose(errors, [0.0, 0.43, 0.05, 0.08, 1.48], atol=0.005)
        assert mean == pytest.approx(0.41, abs=0.005)

    def test_exact_match_is_zero(self):
        errors, mean = relative_errors_pct(TABLE_MEASURED, TABLE_MEASURED)
        np.testing.assert_array_equal(errors, np.zeros(5))
        assert mean == 0.0

    def test_problem_evaluation_interface(self, recovery_problem):
        problem, truth, _ = recovery_problem
        evaluation = evaluate_cost(problem, problem.base_model.moduli())
        errors, mean = frequency_error_table(problem, evaluation)
        assert errors.shape == (5,)
        assert mean == pytest.approx(np.mean(errors), rel=1e-14)


class TestClipToBounds:
    def test_inside_unchanged(self):
        params = np.array([6.5e10, 7.5e10])
        bounds = np.tile([6e10, 8e10], (2, 1))
        np.testing.assert_array_equal(clip_to_bounds(params, bounds), params)

    def test_above_clamped(self):
        bounds = np.tile([6.0e10, 8.0e10], (1, 1))
        assert clip_to_bounds(np.array([9.0e10]), bounds)[0] == 8.0e10

    def test_below_clamped(self):
        bounds = np.tile([6.0e10, 8.0e10], (1, 1))
        assert clip_to_bounds(np.array([5.0e10]), bounds)[0] == 6.0e10


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_monotone_frequency_sensitivity(seed):
    # raising every modulus strictly raises every natural frequency
    model = random_frame(np.random.default_rng(seed))
    n_modes = min(4, model.n_dofs - 3)
    base = solve_modes(assemble(model), n_modes, expected_rigid=3)
    stiffer = solve_modes(
        assemble(apply_parameters(model, 1.25 * model.moduli())),
        n_modes,
        expected_rigid=3,
    )
    assert np.all(stiffer.frequencies > base.frequencies)


class TestSyntheticTargets:
    def test_noise_free_targets_match_truth_model(self, h_structure):
        truth = np.full(12, 7.0e10)
        truth[2] = 6.3e10
        targets, shapes = synthetic_targets(h_structure, truth, 5)
        solution = solve_modes(
            assemble(apply_parameters(h_structure, truth)), 5, expected_rigid=3
        )
        np.testing.assert_array_equal(targets, solution.frequencies)
        assert shapes.shape == (15, 5)

    def test_noise_is_seeded(self, h_structure):
        truth = np.full(12, 7.0e10)
        a, _ = synthetic_targets(h_structure, truth, 5, noise_pct=0.5, seed=42)
        b, _ = synthetic_targets(h_structure, truth, 5, noise_pct=0.5, seed=42)
        c, _ = synthetic_targets(h_structure, truth, 5, noise_pct=0.5, seed=43)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)


class TestLoadTargets:
    def test_bundled_table(self):
        np.testing.assert_array_equal(load_targets("h_structure.targets"), TABLE_MEASURED)

    def test_bad_schema(self, tmp_path):
        path = tmp_path / "targets.json"
        path.write_text('{"schema_version": 2, "frequencies_hz": [1.0]}')
        with pytest.raises(ValueError, match="schema_version"):
            load_targets(path)
