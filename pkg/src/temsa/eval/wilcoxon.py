"""Two-sided Wilcoxon signed-rank test.

Exact p-values come from the null distribution of the positive-rank sum,
built by dynamic programming over subset sums.  Average ranks of tied
absolute differences are multiples of 1/2, so doubling every rank makes all
weights integers and keeps the arithmetic exact.  Above the enumeration
cutoff a normal approximation with continuity correction takes over; its
variance uses the sum of squared ranks, which folds in the tie correction
automatically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

ZERO_METHODS = ("wilcox", "pratt")
METHODS = ("auto", "exact", "approx")
EXACT_CUTOFF = 25
DEFAULT_ALPHA = 0.05


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float  # min(W+, W-)
    w_plus: float
    w_minus: float
    n_effective: int
    p_value: float
    method: str  # "exact" or "normal-approximation"
    alpha: float
    significant: bool


def signed_rank_null_counts(doubled_ranks: Sequence[int]) -> np.ndarray:
    """Count, for every achievable doubled rank sum s, the sign assignments
    whose positive part sums to s.  Entries over all s total 2**n."""
    doubled = np.asarray(doubled_ranks, dtype=np.int64)
    if (doubled <= 0).any():
        raise ValueError("doubled ranks must be positive integers")
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in doubled.tolist():
        # Right-hand side builds a temporary; an in-place += would read
        # already-updated cells and double count.
        counts[r:] = counts[r:] + counts[:-r]
    return counts


def _exact_two_sided_p(w_plus_doubled: int, doubled_ranks: np.ndarray) -> float:
    counts = signed_rank_null_counts(doubled_ranks)
    total = int(doubled_ranks.sum())
    n = len(doubled_ranks)
    lo = min(w_plus_doubled, total - w_plus_doubled)
    tail = int(counts[: lo + 1].sum())
    # The null is symmetric about total/2, so the upper tail mirrors the
    # lower one exactly.
    return min(1.0, 2.0 * tail / float(2**n))


def _approx_two_sided_p(w_plus: float, ranks: np.ndarray) -> float:
    mean = float(ranks.sum()) / 2.0
    var = float(np.square(ranks).sum()) / 4.0
    if var == 0.0:
        raise ValueError("degenerate: zero variance in rank sum")
    d = w_plus - mean
    correction = 0.5 * math.copysign(1.0, d) if d != 0 else 0.0
    z = (d - correction) / math.sqrt(var)
    return math.erfc(abs(z) / math.sqrt(2.0))


def wilcoxon_signed_rank(x: Sequence[float], y: Sequence[float],
                         alpha: float = DEFAULT_ALPHA,
                         zero_method: str = "wilcox",
                         method: str = "auto") -> WilcoxonResult:
    """Paired two-sided signed-rank test on x vs y.

    zero_method "wilcox" drops zero differences before ranking; "pratt" ranks
    them with everything else, then drops their ranks.  method "auto" uses
    exact enumeration when the effective sample size is at most 25 and the
    normal approximation beyond that.
    """
    if zero_method not in ZERO_METHODS:
        raise ValueError(f"zero_method must be one of {ZERO_METHODS}, "
                         f"got {zero_method!r}")
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"x and y must be equal-length 1-d sequences, "
                         f"got shapes {x.shape} and {y.shape}")
    if len(x) < 1:
        raise ValueError("need at least one pair")

    diffs = x - y
    nonzero = diffs != 0
    n_effective = int(nonzero.sum())
    if n_effective == 0:
        raise ValueError("degenerate: all differences zero")

    if zero_method == "wilcox":
        kept = diffs[nonzero]
        ranks = rankdata(np.abs(kept))
    else:
        all_ranks = rankdata(np.abs(diffs))
        kept = diffs[nonzero]
        ranks = all_ranks[nonzero]

    w_plus = float(ranks[kept > 0].sum())
    w_minus = float(ranks[kept < 0].sum())

    use_exact = method == "exact" or (method == "auto"
                                      and n_effective <= EXACT_CUTOFF)
    if use_exact:
        doubled = np.rint(2.0 * ranks).astype(np.int64)
        p_value = _exact_two_sided_p(int(round(2.0 * w_plus)), doubled)
        method_tag = "exact"
    else:
        p_value = _approx_two_sided_p(w_plus, ranks)
        method_tag = "normal-approximation"

    return WilcoxonResult(
        statistic=min(w_plus, w_minus),
        w_plus=w_plus,
        w_minus=w_minus,
        n_effective=n_effective,
        p_value=p_value,
        method=method_tag,
        alpha=alpha,
        significant=p_value < alpha,
    )
