"""Small statistics helpers: macro F1 and the Mann-Whitney U test."""

from __future__ import annotations

import math
from math import comb

import numpy as np
from scipy.special import erfc
from scipy.stats import rankdata

from .errors import DomainError, ShapeError

EXACT_BELOW = 8


def macro_f1(predictions, truth) -> float:
    """Unweighted mean of the per-class F1 scores for labels {0, 1}.

    A class that appears in neither ``predictions`` nor ``truth`` scores 1.
    """
    pred = np.asarray(predictions).reshape(-1)
    true = np.asarray(truth).reshape(-1)
    if pred.shape != true.shape:
        raise ShapeError(f"length mismatch: {pred.shape[0]} predictions, {true.shape[0]} labels")
    scores = []
    for c in (0, 1):
        tp = int(np.sum((pred == c) & (true == c)))
        fp = int(np.sum((pred == c) & (true != c)))
        fn = int(np.sum((pred != c) & (true == c)))
        denom = 2 * tp + fp + fn
        scores.append(1.0 if denom == 0 else 2 * tp / denom)
    return float(np.mean(scores))


def _exact_two_sided(ranks2: np.ndarray, n_a: int, u_obs2: float) -> float:
    """Exact null distribution of the doubled rank sum of group a.

    ``ranks2`` are twice the (mid)ranks so every value is an integer; all
    ``C(n, n_a)`` subsets are equally likely under the null.
    """
    ranks2 = ranks2.astype(np.int64)
    max_sum = int(np.sort(ranks2)[::-1][:n_a].sum())
    # ways[k, s]: number of k-subsets of the items seen so far with doubled rank sum s
    ways = np.zeros((n_a + 1, max_sum + 1), dtype=object)
    ways[0, 0] = 1
    for r in ranks2:
        for k in range(n_a, 0, -1):
            ways[k, r:] = ways[k, r:] + ways[k - 1, : max_sum + 1 - r]
    dist = ways[n_a]
    total = comb(len(ranks2), n_a)
    n_b = len(ranks2) - n_a
    offset2 = n_a * (n_a + 1)  # doubled n_a(n_a+1)/2
    mean2 = n_a * n_b  # doubled mean of U
    dev_obs = abs(u_obs2 - mean2)
    hits = 0
    for s in range(max_sum + 1):
        if dist[s]:
            if abs((s - offset2) - mean2) >= dev_obs:
                hits += dist[s]
    return min(1.0, hits / total)


def mann_whitney_u(sample_a, sample_b) -> tuple[float, float]:
    """Two-sided Mann-Whitney U test.

    Returns ``(U, p)`` where ``U`` counts pairs with ``a > b`` (ties count
    one half).  Uses the exact permutation distribution (midranks for ties)
    when the smaller sample has fewer than 8 values, otherwise the normal
    approximation with tie and continuity corrections.
    """
    a = np.asarray(sample_a, dtype=np.float64).reshape(-1)
    b = np.asarray(sample_b, dtype=np.float64).reshape(-1)
    if a.size == 0 or b.size == 0:
        raise DomainError("both samples must be nonempty")
    n_a, n_b = a.size, b.size
    n = n_a + n_b
    ranks = rankdata(np.concatenate([a, b]))
    rank_sum_a = float(np.sum(ranks[:n_a]))
    u = rank_sum_a - n_a * (n_a + 1) / 2.0

    if min(n_a, n_b) < EXACT_BELOW:
        p = _exact_two_sided(np.rint(2 * ranks).astype(np.int64), n_a, round(2 * u))
        return u, p

    _, counts = np.unique(ranks, return_counts=True)
    tie_term = float(np.sum(counts**3 - counts)) / (n * (n - 1))
    var = n_a * n_b / 12.0 * ((n + 1) - tie_term)
    if var <= 0.0:
        return u, 1.0
    dev = max(abs(u - n_a * n_b / 2.0) - 0.5, 0.0)
    z = dev / math.sqrt(var)
    return u, float(min(1.0, erfc(z / math.sqrt(2.0))))
