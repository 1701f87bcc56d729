"""Closed-form bounds and thresholds, plus machine-checkable verdicts.

Every lower bound used by the verification suites lives in BOUND_CATALOG
under a stable name:

    lemma9_lower(m, delta)            sqrt(2m/pi) * g(delta, m)
    reduction_lower(m, q, c1)         c1 * min(sqrt(m) * (2q - 1), 1)
    w1_lower(p1)                      p1 / 3
    strict_vs_ties_lower()            1/6
    strict_pair_lower(p1, p2)         (p1 + p2) / 36
    cond_diff_lower(p1, p2, h, c)     c * min((p1-p2) sqrt(h) / sqrt(2(p1+p2)), 1)
    uncond_diff_lower(delta_j, h, p1, p2, c5)
                                      c5 (p1+p2) min(delta_j sqrt(h/(2(p1+p2))), 1)
    ratio_regime_lower(q_j, c6)       q_j / (1 - c6)
    bias_threshold(p1, n, lam1)       lam1 * sqrt(p1 / n)
    h_threshold(p1, n, c4)            c4 * ln(n) / p1
    weak_opinion_c4(c2, c3)           (3 c3 / (1 - c2))^2

Defaults are C2 = 1/2, C3 = 3 (hence C4 = 324) and C6 = 0.05; all
overridable. Natural logarithm is used wherever a threshold says "log n".
Verdicts compare exact measurements at absolute tolerance 1e-12 and
interval estimates with the three-valued rule (pass / fail / inconclusive
when the interval straddles the bound).
"""

from __future__ import annotations

import math
from typing import Callable

from .core import Configuration, HMajorityError, NormalizedConfig, validate
from .oracle import ABS_TOL, g_function


class UnknownBoundError(HMajorityError, KeyError):
    """No bound with that name in the catalog."""


class UnclassifiedOpinionError(HMajorityError, ValueError):
    """An opinion fits none of the growth-audit classes."""


DEFAULT_C2 = 0.5
DEFAULT_C3 = 3.0
DEFAULT_C6 = 0.05


def weak_opinion_c4(c2: float = DEFAULT_C2, c3: float = DEFAULT_C3) -> float:
    return (3.0 * c3 / (1.0 - c2)) ** 2


DEFAULT_C4 = weak_opinion_c4()  # 324 with the default constants


def lemma9_lower(m: int, delta: float) -> float:
    return math.sqrt(2.0 * m / math.pi) * g_function(delta, m)


def reduction_lower(m: int, q: float, c1: float) -> float:
    return c1 * min(math.sqrt(m) * (2.0 * q - 1.0), 1.0)


def w1_lower(p1: float) -> float:
    return p1 / 3.0


def strict_vs_ties_lower() -> float:
    return 1.0 / 6.0


def strict_pair_lower(p1: float, p2: float) -> float:
    return (p1 + p2) / 36.0


def cond_diff_lower(p1: float, p2: float, h: int, c: float) -> float:
    if p1 + p2 <= 0.0:
        return 0.0
    return c * min((p1 - p2) * math.sqrt(h) / math.sqrt(2.0 * (p1 + p2)), 1.0)


def uncond_diff_lower(delta_j: float, h: int, p1: float, p2: float, c5: float) -> float:
    if p1 + p2 <= 0.0:
        return 0.0
    return c5 * (p1 + p2) * min(delta_j * math.sqrt(h / (2.0 * (p1 + p2))), 1.0)


def ratio_regime_lower(q_j: float, c6: float = DEFAULT_C6) -> float:
    return q_j / (1.0 - c6)


def bias_threshold(p1: float, n: int, lam1: float) -> float:
    return lam1 * math.sqrt(p1 / n)


def h_threshold(p1: float, n: int, c4: float = DEFAULT_C4) -> float:
    return c4 * math.log(n) / p1


BOUND_CATALOG: dict[str, Callable[..., float]] = {
    "lemma9_lower": lemma9_lower,
    "reduction_lower": reduction_lower,
    "w1_lower": w1_lower,
    "strict_vs_ties_lower": strict_vs_ties_lower,
    "strict_pair_lower": strict_pair_lower,
    "cond_diff_lower": cond_diff_lower,
    "uncond_diff_lower": uncond_diff_lower,
    "ratio_regime_lower": ratio_regime_lower,
    "bias_threshold": bias_threshold,
    "h_threshold": h_threshold,
    "weak_opinion_c4": weak_opinion_c4,
}

VERDICT_PASS = "pass"
VERDICT_FAIL = "fail"
VERDICT_INCONCLUSIVE = "inconclusive"


def bound_value(bound: str, params: dict) -> float:
    if bound not in BOUND_CATALOG:
        raise UnknownBoundError(bound)
    return BOUND_CATALOG[bound](**params)


def verdict_vs_value(value: float, measured) -> str:
    """Three-valued comparison of a measurement against a lower bound.

    Exact measurements pass when measured >= value - 1e-12. Interval
    estimates pass when the whole interval clears the bound, fail when the
    whole interval is below it, and are inconclusive when it straddles.
    """
    low = getattr(measured, "wilson_low", None)
    high = getattr(measured, "wilson_high", None)
    if low is None or high is None:
        m = float(measured)
        return VERDICT_PASS if m >= value - ABS_TOL else VERDICT_FAIL
    if low >= value:
        return VERDICT_PASS
    if high < value:
        return VERDICT_FAIL
    return VERDICT_INCONCLUSIVE


def verdict(bound: str, params: dict, measured) -> str:
    """Compare a measured value or Estimate against a named catalog bound."""
    return verdict_vs_value(bound_value(bound, params), measured)


def verdict_report(bound: str, params: dict, measured) -> dict:
    """JSON-ready record of one verdict call."""
    value = bound_value(bound, params)
    v = verdict_vs_value(value, measured)
    low = getattr(measured, "wilson_low", None)
    measured_out = (
        {"point": measured.point, "wilson_low": measured.wilson_low,
         "wilson_high": measured.wilson_high}
        if low is not None
        else float(measured)
    )
    return {
        "bound": bound,
        "params": params,
        "measured": measured_out,
        "bound_value": value,
        "verdict": v,
    }


CLASS_GAP_GREW = "additive_gap_grew"
CLASS_RATIO_SHRANK = "ratio_shrank"
CLASS_VANISHED = "vanished"


def classify_opinions(
    before: Configuration, after: Configuration
) -> dict[int, str]:
    """Partition every opinion j != 1 into the growth-audit classes.

    For each j: "additive_gap_grew" when c'(1) - c'(j) > c(1) - c(j),
    "ratio_shrank" when c'(j)/c'(1) < c(j)/c(1), "vanished" when a
    previously supported opinion dropped to zero. Opinion 1 must hold a
    maximum of the before configuration. Raises UnclassifiedOpinionError
    when some opinion satisfies none, in which case the growth claim's
    hypotheses do not hold.
    """
    validate(before)
    validate(after)
    if before.k != after.k or before.n != after.n:
        raise UnclassifiedOpinionError("configurations must share n and k")
    if before.k < 2:
        raise UnclassifiedOpinionError("the partition needs at least one rival")
    if before.counts[0] < max(before.counts):
        raise UnclassifiedOpinionError("opinion 1 is not a plurality opinion")
    out: dict[int, str] = {}
    c1, c1p = before.counts[0], after.counts[0]
    for j in range(1, before.k):
        cj, cjp = before.counts[j], after.counts[j]
        if cjp == 0 and cj > 0:
            out[j + 1] = CLASS_VANISHED
        elif (c1p - cjp) > (c1 - cj):
            out[j + 1] = CLASS_GAP_GREW
        elif c1 > 0 and c1p > 0 and cjp * c1 < cj * c1p:
            out[j + 1] = CLASS_RATIO_SHRANK
        else:
            raise UnclassifiedOpinionError(
                f"opinion {j + 1} fits no class: before={cj}, after={cjp}"
            )
    return out


def p1_growth_audit(
    before: Configuration,
    after: Configuration,
    classification: dict[int, str] | None = None,
) -> str:
    """Check that the support of opinion 1 strictly grew.

    Requires every opinion j != 1 to fall into one of the three classes;
    a supplied classification is re-verified arithmetically before use.
    Returns "pass" when p'(1) > p(1), "fail" otherwise.
    """
    derived = classify_opinions(before, after)
    if classification is not None:
        for j, label in classification.items():
            if derived.get(j) != label and not _class_holds(before, after, j, label):
                raise UnclassifiedOpinionError(
                    f"opinion {j} does not satisfy class {label!r}"
                )
    p1_before = before.counts[0] / before.n
    p1_after = after.counts[0] / after.n
    return VERDICT_PASS if p1_after > p1_before else VERDICT_FAIL


def _class_holds(before, after, j, label) -> bool:
    cj, cjp = before.counts[j - 1], after.counts[j - 1]
    c1, c1p = before.counts[0], after.counts[0]
    if label == CLASS_VANISHED:
        return cjp == 0 and cj > 0
    if label == CLASS_GAP_GREW:
        return (c1p - cjp) > (c1 - cj)
    if label == CLASS_RATIO_SHRANK:
        return c1 > 0 and c1p > 0 and cjp * c1 < cj * c1p
    return False


REGIME_SMALL = "small_bias"
REGIME_MID = "mid_bias"
REGIME_LARGE = "large_bias"


def small_bias_boundary(p1: float, p2: float, h: int) -> float:
    return math.sqrt(2.0 * (p1 + p2) / h)


def large_bias_boundary(p1: float, c6: float = DEFAULT_C6) -> float:
    return (1.0 - 1.0 / (1.0 + c6)) * p1


def regime_classifier(
    p: NormalizedConfig, h: int, j: int, c6: float = DEFAULT_C6
) -> str:
    """Classify the gap delta(j) = p_1 - p_j into its analysis regime.

    p must be sorted in non-increasing order and j is a 1-based opinion id
    with j >= 2. Boundary points go to the higher regime, and the large
    check takes precedence so the classification is monotone in delta(j).
    """
    probs = p.probs if isinstance(p, NormalizedConfig) else tuple(p)
    if j < 2 or j > len(probs):
        raise UnclassifiedOpinionError(f"j must be in 2..k, got {j}")
    for a, b in zip(probs, probs[1:]):
        if b > a + 1e-15:
            raise UnclassifiedOpinionError("probabilities must be non-increasing")
    p1 = probs[0]
    p2 = probs[1] if len(probs) > 1 else 0.0
    delta_j = p1 - probs[j - 1]
    if delta_j >= large_bias_boundary(p1, c6):
        return REGIME_LARGE
    if delta_j < small_bias_boundary(p1, p2, h):
        return REGIME_SMALL
    return REGIME_MID
