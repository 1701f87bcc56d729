import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chi2

from hmajority.core import Configuration, bias_stats, is_consensus
from hmajority.dynamics import (
    STATUS_CONSENSUS,
    STATUS_PLURALITY_LOST,
    STATUS_ROUND_CAP,
    STEP_ORACLE,
    STOP_MAX_ROUNDS,
    STOP_PLURALITY,
    DimensionMismatchError,
    RunParams,
    oracle_step,
    run,
    step,
    summarize_round,
)
from hmajority.oracle import win_distribution
from hmajority.sampler import RngHandle


def test_step_consensus_absorbing():
    rng = RngHandle(1)
    cfg = Configuration.from_counts((50, 0, 0))
    assert step(cfg, 3, rng) is cfg
    cfg2 = Configuration.from_counts((0, 50))
    assert step(cfg2, 5, rng) is cfg2


def test_step_near_consensus_absorbs_probabilistically():
    # sampled consensus outputs stay fixed points when fed back in
    rng = RngHandle(2)
    cfg = Configuration.from_counts((199, 1))
    current = cfg
    for _ in range(50):
        current = step(current, 7, rng)
        if is_consensus(current):
            fixed = step(current, 7, rng)
            assert fixed.counts == current.counts
            break


@given(
    st.lists(st.integers(min_value=0, max_value=40), min_size=2, max_size=5).filter(
        lambda c: sum(c) > 0
    ),
    st.integers(min_value=1, max_value=6),
    st.integers(min_value=0, max_value=2**31),
)
@settings(max_examples=80, deadline=None)
def test_step_conserves_population(counts, h, seed):
    cfg = Configuration.from_counts(counts)
    nxt = step(cfg, h, RngHandle(seed))
    assert sum(nxt.counts) == cfg.n
    assert nxt.k == cfg.k


def test_step_expected_next_count():
    # q1 = Pr(Bin(3, 0.6) >= 2) = 0.648; mean over 1e3 steps within 3 sigma
    rng = RngHandle(314159)
    cfg = Configuration.from_counts((6000, 4000))
    reps = 10**3
    totals = 0
    for _ in range(reps):
        totals += step(cfg, 3, rng).counts[0]
    mean = totals / reps
    sigma = math.sqrt(10**4 * 0.648 * 0.352)
    assert abs(mean - 0.648 * 10**4) < 3 * sigma / math.sqrt(reps)


def test_oracle_step_point_mass():
    rng = RngHandle(5)
    cfg = Configuration.from_counts((10, 5, 5))
    win = win_distribution(1, (1.0, 0.0, 0.0))
    nxt = oracle_step(cfg, win, rng)
    assert nxt.counts == (20, 0, 0)


def test_oracle_step_symmetric():
    rng = RngHandle(6)
    n = 3 * 10**5
    cfg = Configuration.from_counts((n // 3, n // 3, n // 3))
    win = win_distribution(2, (1 / 3, 1 / 3, 1 / 3))
    nxt = oracle_step(cfg, win, rng)
    sigma = math.sqrt(n * (1 / 3) * (2 / 3))
    for c in nxt.counts:
        assert abs(c - n / 3) < 3 * sigma


def test_oracle_step_dimension_mismatch():
    rng = RngHandle(7)
    cfg = Configuration.from_counts((5, 5))
    win = win_distribution(2, (1 / 3, 1 / 3, 1 / 3))
    with pytest.raises(DimensionMismatchError):
        oracle_step(cfg, win, rng)


def test_step_and_oracle_step_same_marginal_law():
    # two-sample chi-square on the next-round count of opinion 1, alpha 1e-3
    steps = 4000
    cfg = Configuration.from_counts((60, 40, 20))
    win = win_distribution(2, tuple(c / cfg.n for c in cfg.counts))
    rng_a = RngHandle(101)
    rng_b = RngHandle(202)
    sample_a = np.array([step(cfg, 2, rng_a).counts[0] for _ in range(steps)])
    sample_b = np.array([oracle_step(cfg, win, rng_b).counts[0] for _ in range(steps)])
    lo = min(sample_a.min(), sample_b.min())
    hi = max(sample_a.max(), sample_b.max())
    edges = np.linspace(lo - 0.5, hi + 0.5, 16)
    counts_a, _ = np.histogram(sample_a, edges)
    counts_b, _ = np.histogram(sample_b, edges)
    keep = (counts_a + counts_b) >= 8
    counts_a, counts_b = counts_a[keep], counts_b[keep]
    stat = ((counts_a - counts_b) ** 2 / (counts_a + counts_b)).sum()
    assert chi2.sf(stat, keep.sum() - 1) > 1e-3


def test_symmetric_start_winner_uniform():
    # permutation symmetry: winner frequencies uniform over a symmetric start
    wins = np.zeros(3)
    runs = 600
    for i in range(runs):
        traj = run(
            Configuration.from_counts((10, 10, 10)),
            RunParams(h=3, max_rounds=500, seed=1000 + i),
        )
        assert traj.winner is not None
        wins[traj.winner - 1] += 1
    freq = wins / runs
    sigma = math.sqrt((1 / 3) * (2 / 3) / runs)
    assert np.all(np.abs(freq - 1 / 3) < 4 * sigma)


def test_run_already_consensus():
    traj = run(
        Configuration.from_counts((0, 9)),
        RunParams(h=3, max_rounds=10, seed=0),
    )
    assert traj.consensus_round == 0
    assert traj.winner == 2
    assert traj.terminal_status == STATUS_CONSENSUS
    assert len(traj.rounds) == 1


def test_run_params_validation():
    with pytest.raises(ValueError):
        RunParams(h=3, max_rounds=0)
    with pytest.raises(ValueError):
        RunParams(h=0, max_rounds=5)
    with pytest.raises(ValueError):
        RunParams(h=1, max_rounds=5, stop_rule="bogus")


def test_run_round_cap():
    traj = run(
        Configuration.from_counts((500, 500)),
        RunParams(h=1, max_rounds=3, seed=3),
    )
    # h=1 is a voter-style update; consensus in 3 rounds at n=1000 is unlikely
    assert traj.terminal_status in (STATUS_ROUND_CAP, STATUS_CONSENSUS)
    assert traj.rounds[-1].t == len(traj.rounds) - 1
    assert [r.t for r in traj.rounds] == list(range(len(traj.rounds)))


def test_run_plurality_lost_status():
    # start with a tiny lead for opinion 1 and a stop rule pinned to it;
    # across seeds some runs must end in consensus on another opinion
    statuses = set()
    for seed in range(40):
        traj = run(
            Configuration.from_counts((11, 10, 9)),
            RunParams(
                h=3,
                max_rounds=400,
                stop_rule=STOP_PLURALITY,
                target_opinion=1,
                seed=seed,
            ),
        )
        statuses.add(traj.terminal_status)
        if traj.terminal_status == STATUS_PLURALITY_LOST:
            assert traj.winner is not None and traj.winner != 1
            assert traj.plurality_lost_round is not None
    assert STATUS_PLURALITY_LOST in statuses
    assert STATUS_CONSENSUS in statuses


def test_plurality_loss_recorded_but_not_terminal():
    # under the plain consensus stop rule a plurality flip is an observation;
    # the run must continue past it
    found = False
    for seed in range(60):
        traj = run(
            Configuration.from_counts((11, 10, 9)),
            RunParams(h=3, max_rounds=400, seed=seed),
        )
        if (
            traj.plurality_lost_round is not None
            and traj.consensus_round is not None
            and traj.plurality_lost_round < traj.consensus_round
        ):
            found = True
            assert traj.terminal_status == STATUS_CONSENSUS
            assert len(traj.rounds) - 1 == traj.consensus_round
            break
    assert found, "no run lost and then resolved the plurality in 60 seeds"


def test_run_max_rounds_only_keeps_stepping():
    traj = run(
        Configuration.from_counts((19, 1)),
        RunParams(h=5, max_rounds=12, stop_rule=STOP_MAX_ROUNDS, seed=9),
    )
    assert len(traj.rounds) == 13
    if traj.consensus_round is not None:
        assert traj.terminal_status == STATUS_CONSENSUS
        # absorbing: all rounds after first consensus stay consensus
        for summary in traj.rounds[traj.consensus_round:]:
            assert max(summary.counts) == 20


def test_run_oracle_level_mode():
    traj = run(
        Configuration.from_counts((14, 4, 2)),
        RunParams(h=3, max_rounds=300, step_mode=STEP_ORACLE, seed=11),
    )
    assert traj.terminal_status == STATUS_CONSENSUS
    assert traj.winner in (1, 2, 3)


def test_round_summary_compression():
    counts = [1] * 100
    counts[7] = 51
    cfg = Configuration.from_counts(counts)
    summary = summarize_round(0, cfg)
    assert summary.counts is None
    assert len(summary.top_counts) == 16
    assert summary.top_counts[0] == (8, 51)
    assert summary.other_count == cfg.n - sum(c for _, c in summary.top_counts)
    small = summarize_round(0, Configuration.from_counts([5, 5]))
    assert small.counts == (5, 5)
    assert small.top_counts is None


def test_trajectory_json_roundtrip():
    traj = run(
        Configuration.from_counts((30, 10)),
        RunParams(h=3, max_rounds=100, seed=21),
    )
    doc = json.loads(json.dumps(traj.to_json_dict()))
    assert doc["terminal_status"] == traj.terminal_status
    assert doc["consensus_round"] == traj.consensus_round
    assert doc["rounds"][0]["counts"] == [30, 10]
    final = doc["rounds"][-1]
    assert final["normalized_bias"] == traj.rounds[-1].normalized_bias


def test_run_bias_trace_matches_counts():
    traj = run(
        Configuration.from_counts((40, 30, 30)),
        RunParams(h=5, max_rounds=200, seed=33),
    )
    for summary in traj.rounds:
        cfg = Configuration.from_counts(summary.counts)
        assert bias_stats(cfg).additive_bias == summary.additive_bias
