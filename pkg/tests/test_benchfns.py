"""
Tests for the benchmark objectives and the multi-start search
"""

import numpy as np
import pytest

from swarmrec.core import benchfns
from swarmrec.exceptions import ConfigurationError, DomainError


@pytest.mark.parametrize("name", sorted(benchfns.OBJECTIVES))
def test_catalogued_minima_verify(name):
    checks = benchfns.verify_minima(benchfns.get_objective(name))
    assert checks
    assert all(check.passed for check in checks)


def test_known_values():
    assert benchfns.himmelblau(np.array([3.0, 2.0])) == 0.0
    assert benchfns.rastrigin(np.zeros(5)) == 0.0
    assert benchfns.rastrigin(np.array([1.0, 0.0])) == pytest.approx(1.0)
    assert benchfns.bukin(np.array([-10.0, 1.0])) == 0.0
    assert benchfns.salomon(np.array([0.0, 0.0])) == 0.0
    assert benchfns.yang_n3(np.array([0.0, 0.0])) == 0.0
    assert benchfns.cross_in_tray(np.array([0.0, 0.0])) == pytest.approx(-0.0001)


def test_evaluate_any_dimension():
    obj = benchfns.get_objective("rastrigin")
    assert benchfns.evaluate(obj, [0.0, 0.0, 0.0]) == 0.0


def test_evaluate_outside_domain():
    with pytest.raises(DomainError):
        benchfns.evaluate(benchfns.get_objective("bukin"), [0.0, 0.0])
    with pytest.raises(DomainError):
        benchfns.evaluate(benchfns.get_objective("rastrigin"), [11.0, 0.0])


def test_evaluate_wrong_arity():
    with pytest.raises(ConfigurationError):
        benchfns.evaluate(benchfns.get_objective("himmelblau"), [1.0, 2.0, 3.0])
    with pytest.raises(ConfigurationError):
        benchfns.evaluate(benchfns.get_objective("salomon"), [])


def test_unknown_objective():
    with pytest.raises(ConfigurationError):
        benchfns.get_objective("sphere")


def test_verify_tolerance_override():
    objective = benchfns.get_objective("himmelblau")
    loose = benchfns.verify_minima(objective, tol=1e-2)
    assert all(check.tolerance == 1e-2 and check.passed for check in loose)
    strict = benchfns.verify_minima(objective, tol=0.0)
    assert all(check.tolerance == 0.0 for check in strict)
    assert strict[0].passed
    assert not all(check.passed for check in strict)


def test_compass_search_respects_budget_and_box():
    lower, upper = np.array([-10.0, -10.0]), np.array([10.0, 10.0])
    x, fx, evals = benchfns.compass_search("himmelblau", np.array([9.0, 9.0]), lower, upper, budget=50)
    assert evals <= 50
    assert np.all(x >= lower) and np.all(x <= upper)
    assert fx <= benchfns.himmelblau(np.array([9.0, 9.0]))


def test_multistart_finds_himmelblau_minimum():
    result = benchfns.multistart_optimize(benchfns.get_objective("himmelblau"), restarts=10, budget=3000, seed=1)
    assert result.best_value < 1e-8
    assert result.restarts == 10
    assert result.evals <= 10 * 3000
    minima = np.array([m.point for m in benchfns.OBJECTIVES["himmelblau"].minima[:4]])
    assert np.min(np.linalg.norm(minima - np.array(result.best_point), axis=1)) < 1e-4


def test_multistart_is_deterministic():
    obj = benchfns.get_objective("salomon")
    first = benchfns.multistart_optimize(obj, restarts=5, budget=500, seed=3, dimension=3)
    second = benchfns.multistart_optimize(obj, restarts=5, budget=500, seed=3, dimension=3)
    assert first == second
    assert len(first.best_point) == 3


def test_multistart_stays_at_known_minimum():
    result = benchfns.multistart_optimize(benchfns.get_objective("rastrigin"), starts=[[0.0, 0.0]], budget=100)
    assert result.best_point == [0.0, 0.0]
    assert result.best_value == 0.0


def test_multistart_draws_every_start_uniformly(monkeypatch):
    obj = benchfns.get_objective("rastrigin")
    seen = []

    def record(args):
        seen.append(args[1])
        return args[1], benchfns.evaluate(obj, args[1]), 1

    monkeypatch.setattr(benchfns, "_search_task", record)
    benchfns.multistart_optimize(obj, restarts=5, seed=3)
    lower, upper = (np.asarray(b) for b in obj.bounds(2))
    expected = lower + (upper - lower) * np.random.default_rng(3).random((5, 2))
    np.testing.assert_array_equal(np.array(seen), expected)


@pytest.mark.slow
def test_multistart_reaches_rastrigin_minimum_from_uniform_starts():
    result = benchfns.multistart_optimize(benchfns.get_objective("rastrigin"), restarts=100, seed=0)
    assert result.best_value < 1e-3


def test_multistart_explicit_starts():
    obj = benchfns.get_objective("himmelblau")
    result = benchfns.multistart_optimize(obj, starts=[[3.0, 2.0], [-3.0, 3.0]], budget=10)
    assert result.restarts == 2
    assert result.best_point == [3.0, 2.0]


def test_multistart_needs_a_restart():
    with pytest.raises(ConfigurationError):
        benchfns.multistart_optimize(benchfns.get_objective("himmelblau"), restarts=0)


def test_result_row():
    result = benchfns.multistart_optimize(benchfns.get_objective("rastrigin"), restarts=1, budget=10)
    assert result.row() == f"rastrigin,0.0,0.0 0.0,{result.evals}"
