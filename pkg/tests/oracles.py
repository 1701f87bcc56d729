"""Independent reference implementations used only as test oracles.

These deliberately avoid the library's code paths: the win distribution is
computed by enumerating all k^h ordered sample sequences, pmfs come from
exact Fraction arithmetic, and the conditional pair differences are summed
directly from scipy's binomial pmf with indicator events.
"""

from fractions import Fraction
import itertools
import math

from scipy.stats import binom


def naive_win_distribution(h, probs):
    """Adoption law by brute force over ordered sequences, tie split 1/m."""
    k = len(probs)
    q = [0.0] * k
    q_strict = [0.0] * k
    q_ties = [0.0] * k
    pair = 0.0
    for seq in itertools.product(range(k), repeat=h):
        prob = 1.0
        for i in seq:
            prob *= probs[i]
        if prob == 0.0:
            continue
        counts = [0] * k
        for i in seq:
            counts[i] += 1
        top = max(counts)
        leaders = [i for i in range(k) if counts[i] == top]
        share = prob / len(leaders)
        for i in leaders:
            q[i] += share
            q_ties[i] += prob
        if len(leaders) == 1:
            q_strict[leaders[0]] += prob
            if leaders[0] < 2:
                pair += prob
    return q, q_strict, q_ties, pair


def exact_multinomial_pmf_fraction(x, h, prob_fractions):
    """Multinomial pmf in exact rational arithmetic."""
    if sum(x) != h:
        raise ValueError("counts must sum to h")
    value = Fraction(math.factorial(h))
    for xi, pi in zip(x, prob_fractions):
        value /= math.factorial(xi)
        value *= Fraction(pi) ** xi
    return value


def naive_pair_diffs(m, q):
    """Unconditional and max-conditioned comparison differences.

    Uses scipy's pmf and direct indicator sums; no closed-form shortcut.
    Returns (diff_unconditional, thresholds, diffs).
    """
    pmf = binom.pmf(range(m + 1), m, q)
    diff_uncond = sum(pmf[j] - pmf[m - j] for j in range(m + 1) if 2 * j > m)
    lo = math.ceil(m / 2)
    thresholds = list(range(lo, m + 1))
    diffs = []
    for i in thresholds:
        num = 0.0
        den = 0.0
        for j in range(m + 1):
            big = max(j, m - j)
            if big < i:
                continue
            den += pmf[j]
            if j > m - j:
                num += pmf[j]
            elif m - j > j:
                num -= pmf[j]
        diffs.append(num / den if den > 0 else 0.0)
    return diff_uncond, thresholds, diffs


def random_simplex(rng, k):
    """A uniform point on the k-simplex."""
    raw = rng.dirichlet([1.0] * k)
    vec = [float(v) for v in raw]
    vec[-1] += 1.0 - sum(vec)
    return tuple(vec)
