import json
import math

import numpy as np
import pytest

from hmajority.core import Configuration
from hmajority.montecarlo import (
    Estimate,
    SweepSpec,
    SweepSpecError,
    TrialRecord,
    balanced_plus_bias_counts,
    bias_growth_audit,
    check_w1_lower_bound,
    derive_trial_seed,
    estimate_win_probs,
    rare_outsample_audit,
    read_records_jsonl,
    run_sweep,
    scaling_fit,
    summarize_cells,
    wilson_interval,
    write_records_jsonl,
)
from hmajority.oracle import win_distribution


def test_wilson_interval_orders():
    low, high = wilson_interval(50, 100)
    assert 0.0 <= low <= 0.5 <= high <= 1.0


def test_wilson_interval_coverage_battery():
    # 99.9% interval must contain the truth in >= 99.8% of 1e4 repetitions
    rng = np.random.default_rng(20240229)
    per_rep = 1000
    reps = 10**4
    for p in (0.01, 0.1, 0.5):
        successes = rng.binomial(per_rep, p, size=reps)
        covered = 0
        for s in successes:
            low, high = wilson_interval(int(s), per_rep)
            covered += low <= p <= high
        assert covered / reps >= 0.998


def test_estimate_invariants():
    est = Estimate.from_counts(3, 10)
    assert est.wilson_low <= est.point <= est.wilson_high


def test_estimate_win_probs_point_mass():
    estimates = estimate_win_probs(4, (1.0, 0.0), trials=500, seed=1)
    assert estimates[0].point == 1.0
    assert estimates[1].point == 0.0


def test_estimate_win_probs_uniform_symmetric():
    estimates = estimate_win_probs(2, (1 / 3, 1 / 3, 1 / 3), trials=10**5, seed=2)
    for est in estimates:
        assert est.wilson_low <= 1 / 3 <= est.wilson_high


def test_estimates_contain_exact_oracle_values():
    # 1e6-trial estimates must cover the exact oracle values at 99.9%
    cases = [(3, (0.6, 0.4)), (2, (1 / 3, 1 / 3, 1 / 3)), (4, (0.5, 0.3, 0.2))]
    for seed, (h, probs) in enumerate(cases):
        exact = win_distribution(h, probs)
        estimates = estimate_win_probs(h, probs, trials=10**6, seed=8000 + seed)
        for est, q in zip(estimates, exact.q):
            assert est.wilson_low <= q <= est.wilson_high


def test_estimate_win_probs_deterministic():
    a = estimate_win_probs(3, (0.6, 0.4), trials=10**4, seed=77)
    b = estimate_win_probs(3, (0.6, 0.4), trials=10**4, seed=77)
    assert a == b


def test_check_w1_lower_bound_single_opinion():
    report = check_w1_lower_bound((1.0,), n=20, c4=324.0, trials=2000, seed=3)
    assert report.w1.point == 1.0
    assert report.w1_verdict == "pass"


def test_check_w1_lower_bound_balanced_pair():
    report = check_w1_lower_bound((0.5, 0.5), n=20, c4=324.0, trials=10**5, seed=4)
    assert report.h == math.ceil(324 * math.log(20) / 0.5)
    assert report.w1_verdict == "pass"
    assert report.strict_vs_ties_verdict in ("pass", "inconclusive")
    assert report.strict_pair_verdict == "pass"


def test_check_w1_requires_sorted():
    with pytest.raises(SweepSpecError):
        check_w1_lower_bound((0.3, 0.7), n=20, c4=324.0, trials=100, seed=5)


# ---------------------------------------------------------------------------
# sweep machinery
# ---------------------------------------------------------------------------


def test_balanced_plus_bias_counts_properties():
    counts, b0 = balanced_plus_bias_counts(10**4, 16, 10.0)
    assert sum(counts) == 10**4
    assert b0 < counts[0]
    # B0 is the smallest self-consistent integer bias
    assert b0 >= 10.0 * math.sqrt(counts[0])
    assert (b0 - 1) < 10.0 * math.sqrt(625 + (b0 - 1))
    second = sorted(counts, reverse=True)[1]
    assert counts[0] - second >= b0


def test_balanced_plus_bias_zero_multiplier():
    counts, b0 = balanced_plus_bias_counts(100, 8, 0.0)
    assert b0 == 0
    assert max(counts) - min(counts) <= 1


def test_derive_trial_seed_stable():
    # frozen value: the on-disk reproducibility contract depends on it
    assert derive_trial_seed(0, 0, 0) == 0xE8CA2BD51293D64A
    assert derive_trial_seed(1, 2, 3) != derive_trial_seed(1, 3, 2)


def test_sweep_spec_validation():
    with pytest.raises(SweepSpecError):
        SweepSpec(ns=(10,), ks=(2,), hs=(3,), trials=0)
    with pytest.raises(SweepSpecError):
        SweepSpec(ns=(10,), ks=(2,), trials=5)  # no h source
    with pytest.raises(SweepSpecError):
        SweepSpec.from_json_dict({"schema_version": 1, "bogus": 1})
    with pytest.raises(SweepSpecError):
        SweepSpec.from_json_dict({"n": [10], "k": [2], "h": [3], "trials": 5})


def test_sweep_single_trial_consensus_start():
    spec = SweepSpec(
        ns=(),
        ks=(),
        hs=(3,),
        pattern="custom",
        custom_counts=(20, 0),
        trials=1,
        master_seed=5,
        max_rounds=10,
    )
    records = list(run_sweep(spec))
    assert len(records) == 1
    assert records[0].consensus_round == 0
    assert records[0].winner == 1
    assert records[0].rounds_run == 0


def test_sweep_deterministic_and_worker_invariant():
    spec = SweepSpec(
        ns=(60,), ks=(3,), hs=(3,), bias_multiplier=2.0,
        trials=6, master_seed=99, max_rounds=200,
    )
    lines_a = [r.to_json_line() for r in run_sweep(spec)]
    lines_b = [r.to_json_line() for r in run_sweep(spec)]
    assert lines_a == lines_b
    lines_c = [r.to_json_line() for r in run_sweep(spec, workers=2)]
    assert lines_a == lines_c


def test_record_jsonl_roundtrip(tmp_path):
    spec = SweepSpec(
        ns=(40,), ks=(2,), hs=(3,), bias_multiplier=2.0,
        trials=2, master_seed=1, max_rounds=100,
    )
    records = list(run_sweep(spec))
    path = tmp_path / "records.jsonl"
    write_records_jsonl(records, str(path))
    with pytest.raises(FileExistsError):
        write_records_jsonl(records, str(path))
    write_records_jsonl(records, str(path), append=True)
    loaded = read_records_jsonl(str(path))
    assert len(loaded) == 4
    rebuilt = TrialRecord.from_json_dict(loaded[0])
    assert rebuilt.cell_id == records[0].cell_id
    assert "wall_time_ms" not in loaded[0]


def test_bias_growth_audit_zero_trace():
    record = {
        "n": 100, "h": 1,
        "bias_trace": [[0, 0.0], [1, 0.0], [2, 0.0]],
        "lead_trace": [[0, 0.25, 0.25], [1, 0.25, 0.25], [2, 0.25, 0.25]],
    }
    report = bias_growth_audit([record], bias_multiplier=10.0)
    assert report.qualifying_pairs == 0
    assert report.vacuous


def test_bias_growth_audit_synthetic_trace():
    # h=1 with p1=p2=0.25 puts the small-bias boundary at exactly 1, so all
    # pairs qualify once the bias threshold is cleared; factors are (3, 3)
    record = {
        "n": 10**8, "h": 1,
        "bias_trace": [[0, 0.01], [1, 0.03], [2, 0.09]],
        "lead_trace": [[0, 0.25, 0.25], [1, 0.25, 0.25], [2, 0.25, 0.25]],
    }
    report = bias_growth_audit([record], bias_multiplier=10.0, c6=10.0)
    assert report.qualifying_pairs == 2
    assert report.growth_factors == pytest.approx((3.0, 3.0))
    assert report.fraction == 1.0
    assert not report.vacuous


def test_rare_outsample_audit_smoke():
    cfg = Configuration.from_counts((48, 20, 20, 12))
    report = rare_outsample_audit(cfg, rare_opinion=4, rounds=20, seed=1, h=200)
    assert report.rounds == 20
    assert 0.0 <= report.fraction <= 1.0
    assert report.bound == pytest.approx(1 - 1 / 100)


def test_rare_outsample_rejects_leader():
    cfg = Configuration.from_counts((48, 20, 20, 12))
    with pytest.raises(SweepSpecError):
        rare_outsample_audit(cfg, rare_opinion=1, rounds=5, seed=1, h=10)


def test_summaries_and_scaling():
    spec = SweepSpec(
        ns=(50, 100), ks=(2,), hs=(3,), bias_multiplier=2.0,
        trials=4, master_seed=77, max_rounds=300,
    )
    records = list(run_sweep(spec))
    rows = summarize_cells(records)
    assert len(rows) == 2
    for row in rows:
        assert 0.0 <= row["plurality_success_rate"] <= 1.0
        assert row["trials"] == 4
    fits = scaling_fit(rows)
    assert len(fits) == 1
    assert "slope" in fits[0]


def test_trial_record_json_is_versioned():
    spec = SweepSpec(
        ns=(30,), ks=(2,), hs=(3,), bias_multiplier=2.0,
        trials=1, master_seed=2, max_rounds=50,
    )
    record = next(iter(run_sweep(spec)))
    data = json.loads(record.to_json_line())
    assert data["schema_version"] == 1
    assert data["master_seed"] == 2
    assert data["bias_trace"][0][0] == 0
