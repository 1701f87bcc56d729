import pytest

import hmajority.oracle as oracle_mod
from hmajority.theory import BOUND_CATALOG
from hmajority.verify import (
    simplex_grid,
    suite_bounds,
    suite_difference_equality,
    suite_dominance,
    suite_growth_claim,
    suite_lemma9,
    suite_monotonicity,
    suite_tiemap,
    run_suites,
)


def test_simplex_grid_counts():
    # non-increasing 0.05-step vectors: partitions of 20 into at most k parts
    assert len(list(simplex_grid(2))) == 11
    assert len(list(simplex_grid(3))) == 44
    assert len(list(simplex_grid(4))) == 108
    for p in simplex_grid(3):
        assert abs(sum(p) - 1.0) < 1e-12
        assert all(a >= b for a, b in zip(p, p[1:]))


def test_suite_monotonicity_passes():
    result = suite_monotonicity(m_min=2, m_max=40)
    assert result.passed
    assert result.stats["min_step"] >= -1e-12


def test_suite_difference_equality_passes_reduced():
    result = suite_difference_equality(hs=range(1, 5), ks=(2, 3), denom=10)
    assert result.passed
    assert result.stats["max_error"] <= 1e-12


def test_suite_dominance_passes_reduced():
    result = suite_dominance(hs=range(1, 5), ks=(2, 3), denom=10)
    assert result.passed
    assert result.stats["min_margin"] >= -1e-12


def test_suite_tiemap_passes():
    result = suite_tiemap()
    assert result.passed
    assert result.stats["applicable_outcomes"] > 0
    assert result.stats["max_ratio_error"] <= 1e-12


def test_suite_growth_claim_passes():
    result = suite_growth_claim()
    assert result.passed
    assert result.stats["classified_instances"] > 20


def test_suite_lemma9_reports_even_m_defect():
    # the printed kernel bound fails at small even m (ties at m/2) and holds
    # with margin on every odd m; the suite must report exactly that shape
    result = suite_lemma9(m_max=30)
    assert result.stats["odd_m_violations"] == 0
    assert result.stats["min_margin_odd_m"] > 0
    assert result.stats["even_m_violations"] > 0
    assert set(result.stats["even_m_violating"]) <= set(range(2, 31, 2))
    assert not result.passed


def test_suite_bounds_passes_small_trials():
    result = suite_bounds(trials=20000, seed=123)
    assert result.passed
    assert result.stats["C1_empirical"] > 0
    assert result.stats["C_ema_empirical"] > 0
    assert result.stats["C5_empirical"] > 0


def test_bounds_suite_exercises_whole_catalog():
    result = suite_bounds(trials=5000, seed=5)
    assert set(result.stats["bounds_exercised"]) == set(BOUND_CATALOG)


def test_difference_equality_detects_tiebreak_mutation(monkeypatch):
    # injected off-by-one in the tie split must break the equality grid
    original = oracle_mod._tiebreak_weight
    monkeypatch.setattr(oracle_mod, "_tiebreak_weight", lambda m: 1.0 / (m + 1))
    result = suite_difference_equality(hs=(2, 3), ks=(2, 3), denom=10)
    monkeypatch.setattr(oracle_mod, "_tiebreak_weight", original)
    assert not result.passed
    assert result.failure_count > 0


def test_run_suites_selection():
    results = run_suites(["monotonicity"])
    assert len(results) == 1
    assert results[0].name == "monotonicity"
    with pytest.raises(KeyError):
        run_suites(["bogus"])
