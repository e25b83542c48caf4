"""Two-sample tests and correlation used by the characterisation report."""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Sequence

import numpy as np
from scipy import special


def _student_t_sf2(t: float, df: float) -> float:
    """Two-sided tail probability P(|T| >= |t|) for Student-t with ``df`` dof."""
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return float(min(1.0, max(0.0, special.betainc(df / 2.0, 0.5, x))))


def _normal_sf2(z: float) -> float:
    return float(min(1.0, special.erfc(abs(z) / math.sqrt(2.0))))


def median(values: Sequence[float]) -> float:
    """Median; even-length samples average the two central order statistics."""
    if len(values) == 0:
        raise ValueError("median of empty sample")
    s = sorted(values)
    mid = len(s) // 2
    if len(s) % 2:
        return float(s[mid])
    return (s[mid - 1] + s[mid]) / 2.0


def welch_t_test(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Welch's unequal-variance t-test; returns (t, two-sided p)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise ValueError("welch_t_test needs at least two observations per sample")
    va = a.var(ddof=1) / a.size
    vb = b.var(ddof=1) / b.size
    if va == 0 and vb == 0:
        raise ValueError("welch_t_test undefined: both samples have zero variance")
    diff = a.mean() - b.mean()
    se = math.sqrt(va + vb)
    t = diff / se
    df = (va + vb) ** 2 / (va ** 2 / (a.size - 1) + vb ** 2 / (b.size - 1))
    return float(t), _student_t_sf2(t, df)


def rank_sum_moments(a: Sequence[float], b: Sequence[float]) -> tuple[float, float, float]:
    """Mann-Whitney U of ``a`` with its null mean and tie-corrected variance."""
    n1, n2 = len(a), len(b)
    pooled = np.concatenate([np.asarray(a, float), np.asarray(b, float)])
    ranks = _midranks(pooled)
    u = float(ranks[:n1].sum() - n1 * (n1 + 1) / 2.0)
    n = n1 + n2
    ties = sum(t ** 3 - t for t in Counter(pooled.tolist()).values())
    mean = n1 * n2 / 2.0
    if n < 2:
        return u, mean, 0.0
    var = n1 * n2 / 12.0 * ((n + 1) - ties / (n * (n - 1)))
    return u, mean, var


def _midranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(len(x))
    i = 0
    while i < len(xs):
        j = i
        while j + 1 < len(xs) and xs[j + 1] == xs[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _exact_rank_sum_p(a, b) -> float:
    """Exact permutation p-value of U, counting subsets by doubled rank sum."""
    n1 = len(a)
    pooled = np.concatenate([np.asarray(a, float), np.asarray(b, float)])
    r2 = np.rint(2 * _midranks(pooled)).astype(int)
    total = int(r2.sum())
    # ways[k][s]: subsets of size k with doubled rank sum s
    ways = [Counter() for _ in range(n1 + 1)]
    ways[0][0] = 1
    for r in r2:
        for k in range(min(n1, len(r2)), 0, -1):
            for s, c in ways[k - 1].items():
                ways[k][s + r] += c
    dist = ways[n1]
    n_total = sum(dist.values())
    observed = int(r2[:n1].sum())
    # U is an affine map of the rank sum; centre both at their null mean
    centre2 = n1 * total  # 2 * n * E[sum]
    obs_dev = abs(len(r2) * observed - centre2)
    extreme = sum(c for s, c in dist.items() if abs(len(r2) * s - centre2) >= obs_dev)
    return extreme / n_total


def wilcoxon_rank_sum(a: Sequence[float], b: Sequence[float], *, continuity: bool = True,
                      method: str = "normal") -> tuple[float, float]:
    """Wilcoxon rank-sum / Mann-Whitney U test; returns (U of ``a``, two-sided p).

    ``method="normal"`` uses the tie-corrected normal approximation,
    ``method="exact"`` enumerates the permutation distribution (small samples).
    """
    if len(a) == 0 and len(b) == 0:
        raise ValueError("wilcoxon_rank_sum needs non-empty samples")
    if len(a) == 0 or len(b) == 0:
        raise ValueError("wilcoxon_rank_sum needs at least one observation per sample")
    u, mean, var = rank_sum_moments(a, b)
    if method == "exact":
        return u, _exact_rank_sum_p(a, b)
    if method != "normal":
        raise ValueError(f"unknown method {method!r}")
    if var <= 0:
        return u, 1.0
    dev = abs(u - mean)
    if continuity:
        dev = max(0.0, dev - 0.5)
    return u, _normal_sf2(dev / math.sqrt(var))


def pearson(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Pearson correlation with a two-sided t-based p-value."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("pearson needs samples of equal length")
    n = x.size
    if n < 3:
        raise ValueError("pearson needs at least three pairs")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise ValueError("pearson undefined for constant input")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        return r, 0.0
    t = r * math.sqrt((n - 2) / (1 - r * r))
    return r, _student_t_sf2(t, n - 2)
