"""One synchronous round of the h-majority dynamics and full trajectories.

Each round, every one of the n agents independently samples h neighbors
uniformly at random with repetition (self-loops included: the sampling law
is exactly counts/n) and adopts the most frequent sampled opinion, breaking
ties uniformly at random. Agents are anonymous; a round only needs the
aggregated outcome counts, so memory per round is O(k) plus a bounded
row batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    Configuration,
    HMajorityError,
    bias_stats,
    is_consensus,
    validate,
)
from .oracle import WinDistribution, win_distribution
from .sampler import (
    RngHandle,
    argmax_rows_with_tiebreak,
    draw_multinomial,
    sample_counts_matrix,
)


class DimensionMismatchError(HMajorityError, ValueError):
    """A win distribution built for a different opinion count."""


STOP_CONSENSUS = "consensus"
STOP_PLURALITY = "plurality_consensus_on"
STOP_MAX_ROUNDS = "max_rounds_only"
STOP_RULES = (STOP_CONSENSUS, STOP_PLURALITY, STOP_MAX_ROUNDS)

STEP_AGENT = "agent_level"
STEP_ORACLE = "oracle_level"
STEP_MODES = (STEP_AGENT, STEP_ORACLE)

STATUS_CONSENSUS = "consensus"
STATUS_PLURALITY_LOST = "plurality_lost"
STATUS_ROUND_CAP = "round_cap"

# Full counts are kept in round summaries up to this k; beyond it only the
# top TOP_KEEP counts plus an "other" bucket are stored.
FULL_COUNTS_MAX_K = 64
TOP_KEEP = 16

_CHUNK_ROWS = 1 << 16


@dataclass(frozen=True)
class RunParams:
    """Parameters of a single trajectory execution."""

    h: int
    max_rounds: int
    stop_rule: str = STOP_CONSENSUS
    target_opinion: int | None = None
    seed: int = 0
    step_mode: str = STEP_AGENT

    def __post_init__(self):
        if self.h < 1:
            raise ValueError(f"h must be >= 1, got {self.h}")
        if self.max_rounds < 1:
            raise ValueError(f"max_rounds must be >= 1, got {self.max_rounds}")
        if self.stop_rule not in STOP_RULES:
            raise ValueError(f"unknown stop rule {self.stop_rule!r}")
        if self.step_mode not in STEP_MODES:
            raise ValueError(f"unknown step mode {self.step_mode!r}")


@dataclass(frozen=True)
class RoundSummary:
    """Per-round state snapshot kept in a trajectory."""

    t: int
    counts: tuple[int, ...] | None
    top_counts: tuple[tuple[int, int], ...] | None  # (opinion id, count)
    other_count: int
    additive_bias: int
    normalized_bias: float
    plurality: int | None

    def to_json_dict(self) -> dict:
        return {
            "t": self.t,
            "counts": list(self.counts) if self.counts is not None else None,
            "top_counts": [list(tc) for tc in self.top_counts]
            if self.top_counts is not None
            else None,
            "other_count": self.other_count,
            "additive_bias": self.additive_bias,
            "normalized_bias": self.normalized_bias,
            "plurality": self.plurality,
        }


@dataclass
class Trajectory:
    """Ordered per-round summaries plus the terminal classification.

    plurality_lost_round records the first round whose plurality differs
    from the initial one; it is an observation, not a stopping condition,
    because rare runs that lose the plurality are themselves measurement
    targets.
    """

    rounds: list[RoundSummary] = field(default_factory=list)
    terminal_status: str = STATUS_ROUND_CAP
    winner: int | None = None
    consensus_round: int | None = None
    initial_plurality: int | None = None
    plurality_lost_round: int | None = None

    def to_json_dict(self) -> dict:
        return {
            "rounds": [r.to_json_dict() for r in self.rounds],
            "terminal_status": self.terminal_status,
            "winner": self.winner,
            "consensus_round": self.consensus_round,
            "initial_plurality": self.initial_plurality,
            "plurality_lost_round": self.plurality_lost_round,
        }


def summarize_round(t: int, config: Configuration) -> RoundSummary:
    """Snapshot one round; large-k configurations keep only the top counts."""
    stats = bias_stats(config)
    if config.k <= FULL_COUNTS_MAX_K:
        counts = config.counts
        top = None
        other = 0
    else:
        counts = None
        order = sorted(range(config.k), key=lambda i: (-config.counts[i], i))
        kept = order[:TOP_KEEP]
        top = tuple((i + 1, config.counts[i]) for i in kept)
        other = config.n - sum(config.counts[i] for i in kept)
    return RoundSummary(
        t=t,
        counts=counts,
        top_counts=top,
        other_count=other,
        additive_bias=stats.additive_bias,
        normalized_bias=stats.normalized_bias,
        plurality=stats.plurality_opinion,
    )


def step(config: Configuration, h: int, rng: RngHandle) -> Configuration:
    """One synchronous round at agent level.

    Every agent draws a Multinomial(h, counts/n) sample vector and adopts
    the mode with u.a.r. tie-breaking; the n outcomes are aggregated into
    the next configuration. Consensus is absorbing: every sample then
    consists of the consensus opinion only, so the input is returned as is.
    """
    validate(config)
    if h < 1:
        raise ValueError(f"h must be >= 1, got {h}")
    if is_consensus(config) is not None:
        return config
    probs = np.asarray(config.counts, dtype=np.float64) / config.n
    k = config.k
    new_counts = np.zeros(k, dtype=np.int64)
    done = 0
    while done < config.n:
        rows = min(_CHUNK_ROWS, config.n - done)
        matrix = sample_counts_matrix(h, probs, rng, rows)
        winners = argmax_rows_with_tiebreak(matrix, rng)
        new_counts += np.bincount(winners, minlength=k)
        done += rows
    return Configuration(counts=tuple(int(c) for c in new_counts), n=config.n)


def oracle_step(
    config: Configuration, win: WinDistribution, rng: RngHandle
) -> Configuration:
    """One round through the precomputed agent-outcome law.

    Agent outcomes are i.i.d. given the configuration, so the next
    configuration is Multinomial(n, q) with q the exact adoption law;
    distributionally identical to step. win must have been computed for
    exactly this configuration's (h, counts/n).
    """
    validate(config)
    if win.k != config.k:
        raise DimensionMismatchError(
            f"win distribution has k={win.k}, configuration has k={config.k}"
        )
    drawn = draw_multinomial(config.n, _renormalized(win.q), rng)
    return Configuration(counts=drawn.counts, n=config.n)


def _renormalized(q) -> tuple[float, ...]:
    total = sum(q)
    return tuple(v / total for v in q)


def run(config0: Configuration, params: RunParams) -> Trajectory:
    """Iterate rounds until the stop rule fires or max_rounds is reached.

    Under plurality_consensus_on, reaching consensus on an opinion other
    than the target terminates with status plurality_lost (consensus is
    absorbing, so the target can never be reached afterwards). Under
    max_rounds_only all rounds are executed and the terminal status reflects
    the final configuration.
    """
    validate(config0)
    rng = RngHandle(params.seed, stream_id=0)
    traj = Trajectory()
    stats0 = bias_stats(config0)
    traj.initial_plurality = stats0.plurality_opinion
    target = params.target_opinion
    if params.stop_rule == STOP_PLURALITY and target is None:
        target = stats0.plurality_opinion

    traj.rounds.append(summarize_round(0, config0))
    winner0 = is_consensus(config0)
    if winner0 is not None:
        traj.consensus_round = 0
        traj.winner = winner0

    config = config0
    t = 0
    while t < params.max_rounds:
        if params.stop_rule != STOP_MAX_ROUNDS and traj.consensus_round is not None:
            break
        if params.step_mode == STEP_ORACLE:
            probs = tuple(c / config.n for c in config.counts)
            win = win_distribution(params.h, probs)
            config = oracle_step(config, win, rng)
        else:
            config = step(config, params.h, rng)
        t += 1
        summary = summarize_round(t, config)
        traj.rounds.append(summary)
        if (
            traj.plurality_lost_round is None
            and summary.plurality != traj.initial_plurality
        ):
            traj.plurality_lost_round = t
        winner = is_consensus(config)
        if winner is not None and traj.consensus_round is None:
            traj.consensus_round = t
            traj.winner = winner

    if traj.consensus_round is not None:
        if (
            params.stop_rule == STOP_PLURALITY
            and target is not None
            and traj.winner != target
        ):
            traj.terminal_status = STATUS_PLURALITY_LOST
        else:
            traj.terminal_status = STATUS_CONSENSUS
    else:
        traj.terminal_status = STATUS_ROUND_CAP
    return traj
