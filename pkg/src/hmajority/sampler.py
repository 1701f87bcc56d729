"""Bounded-cost random draws: binomials, multinomial count vectors,
alias-table categorical sampling, and the mode-with-uniform-tie-break rule.

All randomness flows through RngHandle, a counter-based Philox stream keyed
by (master_seed, stream_id): identical keys give byte-identical draw
sequences regardless of thread schedule, which is what makes sweeps
reproducible under parallelism.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import HMajorityError, NormalizedConfig

_MASK64 = (1 << 64) - 1

# Row batch bound for matrix helpers; callers chunk above this.
MAX_BATCH_CELLS = 1 << 28


class InvalidProbError(HMajorityError, ValueError):
    """Probability outside [0, 1]."""


class EmptySampleError(HMajorityError, ValueError):
    """A mode was requested for a sample of size zero."""


@dataclass(frozen=True)
class SampleVector:
    """Counts of each opinion among h sampled neighbors."""

    counts: tuple[int, ...]
    h: int

    @property
    def k(self) -> int:
        return len(self.counts)


class RngHandle:
    """Deterministic pseudorandom stream keyed by (master_seed, stream_id).

    Backed by the counter-based Philox generator, so distinct stream ids on
    the same master seed give independent streams without jump-ahead
    bookkeeping. Each handle must be owned by exactly one worker.
    """

    __slots__ = ("master_seed", "stream_id", "gen")

    def __init__(self, master_seed: int, stream_id: int = 0):
        self.master_seed = int(master_seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        key = np.array([self.master_seed, self.stream_id], dtype=np.uint64)
        self.gen = np.random.Generator(np.random.Philox(key=key))

    def spawn(self, stream_id: int) -> "RngHandle":
        """Fresh independent stream under the same master seed."""
        return RngHandle(self.master_seed, stream_id)

    def __repr__(self) -> str:
        return f"RngHandle(master_seed={self.master_seed}, stream_id={self.stream_id})"


def _probs_array(p) -> np.ndarray:
    if isinstance(p, NormalizedConfig):
        arr = np.asarray(p.probs, dtype=np.float64)
    else:
        arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidProbError(f"expected a non-empty probability vector, got {p!r}")
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise InvalidProbError(f"probabilities outside [0,1]: {arr}")
    return arr


def draw_binomial(trials: int, prob: float, rng: RngHandle) -> int:
    """One Binomial(trials, prob) variate.

    Expected cost is bounded independently of trials (numpy dispatches to
    inversion for small mean and a rejection method otherwise), so h up to
    1e6 is usable.
    """
    if trials < 0:
        raise InvalidProbError(f"trials must be >= 0, got {trials}")
    if not (0.0 <= prob <= 1.0):
        raise InvalidProbError(f"prob must lie in [0,1], got {prob}")
    return int(rng.gen.binomial(trials, prob))


def draw_multinomial(h: int, p, rng: RngHandle) -> SampleVector:
    """Exact Multinomial(h, p) draw via sequential conditional binomials.

    X_i ~ Binomial(h - sum_{j<i} X_j, p_i / (1 - sum_{j<i} p_j)), cost O(k).
    """
    probs = _probs_array(p)
    if h < 0:
        raise InvalidProbError(f"h must be >= 0, got {h}")
    k = probs.size
    counts = [0] * k
    remaining = int(h)
    rem_p = 1.0
    for i in range(k - 1):
        if remaining == 0:
            break
        pi = float(probs[i])
        if pi <= 0.0:
            continue
        if rem_p <= pi:
            counts[i] = remaining
            remaining = 0
            rem_p = 0.0
            continue
        x = int(rng.gen.binomial(remaining, pi / rem_p))
        counts[i] = x
        remaining -= x
        rem_p -= pi
    counts[k - 1] += remaining
    return SampleVector(counts=tuple(counts), h=int(h))


class AliasTable:
    """Walker alias table: O(k) setup, O(1) per categorical draw.

    Build once per round and share read-only across workers.
    """

    __slots__ = ("k", "accept", "alias")

    def __init__(self, p):
        probs = _probs_array(p)
        total = probs.sum()
        if total <= 0.0:
            raise InvalidProbError("probability vector sums to zero")
        scaled = probs * (probs.size / total)
        k = probs.size
        accept = np.ones(k, dtype=np.float64)
        alias = np.arange(k, dtype=np.int64)
        small = [i for i in range(k) if scaled[i] < 1.0]
        large = [i for i in range(k) if scaled[i] >= 1.0]
        scaled = scaled.copy()
        while small and large:
            s = small.pop()
            g = large.pop()
            accept[s] = scaled[s]
            alias[s] = g
            scaled[g] = scaled[g] - (1.0 - scaled[s])
            if scaled[g] < 1.0:
                small.append(g)
            else:
                large.append(g)
        # leftovers are 1 up to rounding
        self.k = k
        self.accept = accept
        self.alias = alias

    def draw_ids(self, rng: RngHandle, size) -> np.ndarray:
        """Array of category ids (0-based) with the table's law."""
        idx = rng.gen.integers(0, self.k, size=size)
        u = rng.gen.random(size=size)
        return np.where(u < self.accept[idx], idx, self.alias[idx])


def draw_categorical_counts(
    h: int, p, rng: RngHandle, table: AliasTable | None = None
) -> SampleVector:
    """Same law as draw_multinomial, via h alias-table draws: O(h) per draw
    after O(k) shared setup. Preferable when h is much smaller than k."""
    probs = _probs_array(p)
    if h < 0:
        raise InvalidProbError(f"h must be >= 0, got {h}")
    if table is None:
        table = AliasTable(probs)
    if h == 0:
        return SampleVector(counts=(0,) * probs.size, h=0)
    ids = table.draw_ids(rng, h)
    counts = np.bincount(ids, minlength=probs.size)
    return SampleVector(counts=tuple(int(c) for c in counts), h=int(h))


def mode_with_tiebreak(x: SampleVector, rng: RngHandle) -> int:
    """1-based id of the most sampled opinion, ties broken u.a.r.

    When m >= 2 opinions attain the maximum, each is returned with
    probability exactly 1/m, using a single uniform integer in [0, m).
    """
    if x.h < 1:
        raise EmptySampleError("cannot take the mode of an empty sample")
    max_count = max(x.counts)
    leaders = [i for i, c in enumerate(x.counts) if c == max_count]
    if len(leaders) == 1:
        return leaders[0] + 1
    pick = int(rng.gen.integers(0, len(leaders)))
    return leaders[pick] + 1


def sample_counts_matrix(
    h: int, p, rng: RngHandle, rows: int, method: str = "auto"
) -> np.ndarray:
    """(rows, k) matrix of independent Multinomial(h, p) draws.

    method "chain" runs the conditional-binomial chain vectorized over rows
    (O(k) per row); "categorical" draws h category ids per row through an
    alias table (O(h) per row after O(k) setup). "auto" picks chain when
    k <= h, categorical otherwise, which keeps per-row cost O(min(k, h)).
    """
    probs = _probs_array(p)
    if h < 0:
        raise InvalidProbError(f"h must be >= 0, got {h}")
    if rows < 0:
        raise InvalidProbError(f"rows must be >= 0, got {rows}")
    k = probs.size
    if method == "auto":
        method = "chain" if k <= h else "categorical"
    if method == "chain":
        if rows * k > MAX_BATCH_CELLS:
            raise InvalidProbError("batch too large; chunk the rows")
        out = np.zeros((rows, k), dtype=np.int64)
        remaining = np.full(rows, int(h), dtype=np.int64)
        rem_p = 1.0
        for i in range(k - 1):
            pi = float(probs[i])
            if pi <= 0.0:
                continue
            if rem_p <= pi:
                out[:, i] = remaining
                remaining = np.zeros(rows, dtype=np.int64)
                rem_p = 0.0
                continue
            x = rng.gen.binomial(remaining, pi / rem_p)
            out[:, i] = x
            remaining = remaining - x
            rem_p -= pi
        out[:, k - 1] += remaining
        return out
    if method == "categorical":
        if rows * max(h, 1) > MAX_BATCH_CELLS:
            raise InvalidProbError("batch too large; chunk the rows")
        if h == 0:
            return np.zeros((rows, k), dtype=np.int64)
        table = AliasTable(probs)
        ids = table.draw_ids(rng, (rows, h))
        flat = ids + (np.arange(rows, dtype=np.int64) * k)[:, None]
        counts = np.bincount(flat.ravel(), minlength=rows * k)
        return counts.reshape(rows, k).astype(np.int64)
    raise InvalidProbError(f"unknown sampling method {method!r}")


def argmax_rows_with_tiebreak(counts: np.ndarray, rng: RngHandle) -> np.ndarray:
    """Per-row argmax (0-based) with exact uniform tie-breaking.

    Rows with m tied maxima pick each with probability 1/m using one uniform
    integer per tied row.
    """
    rowmax = counts.max(axis=1)
    winners = counts.argmax(axis=1)
    is_max = counts == rowmax[:, None]
    m = is_max.sum(axis=1)
    tied = np.nonzero(m > 1)[0]
    if tied.size:
        u = rng.gen.integers(0, m[tied])
        cumulative = np.cumsum(is_max[tied], axis=1)
        winners[tied] = np.argmax(cumulative == (u + 1)[:, None], axis=1)
    return winners
