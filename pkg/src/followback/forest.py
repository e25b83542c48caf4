"""Bagged CART trees (Gini, sqrt feature subsampling, grown to purity).

Feature subsampling draws positions in the sorted order of column names and
equal-gain splits go to the feature that comes first in that order, so a
model trained on column-permuted data makes the same predictions.
"""

from __future__ import annotations

import json
import math
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

LEAF = -1


@numba.njit(cache=True)
def _best_split(X, y, idx, feats):
    """Lowest weighted Gini over ``feats`` (scanned in order, strict improvement)."""
    n = idx.shape[0]
    total_pos = 0.0
    for i in range(n):
        total_pos += y[idx[i]]
    best_feat = -1
    best_thr = 0.0
    best_score = np.inf
    vals = np.empty(n)
    for f in feats:
        for i in range(n):
            vals[i] = X[idx[i], f]
        order = np.argsort(vals, kind="mergesort")
        left_pos = 0.0
        for k in range(n - 1):
            left_pos += y[idx[order[k]]]
            a = vals[order[k]]
            b = vals[order[k + 1]]
            if b <= a:
                continue
            nl = k + 1.0
            nr = n - nl
            right_pos = total_pos - left_pos
            score = (nl - (left_pos * left_pos + (nl - left_pos) * (nl - left_pos)) / nl
                     + nr - (right_pos * right_pos + (nr - right_pos) * (nr - right_pos)) / nr)
            if score < best_score - 1e-12:
                best_score = score
                best_feat = f
                thr = a + (b - a) / 2.0
                if thr >= b:  # midpoint rounding onto the upper value
                    thr = a
                best_thr = thr
    return best_feat, best_thr


@numba.njit(cache=True)
def _grow(X, y, sample, canon, m, seed):
    """Grow one tree on rows ``sample``; ``canon[r]`` is the column of canonical rank r."""
    np.random.seed(seed)
    n_cols = canon.shape[0]
    cap = 2 * sample.shape[0] + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    # stack of (node id, start, end) over a working copy of the sample
    work = sample.copy()
    stack_node = np.empty(cap, dtype=np.int64)
    stack_lo = np.empty(cap, dtype=np.int64)
    stack_hi = np.empty(cap, dtype=np.int64)
    top = 0
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = work.shape[0]
    top = 1
    n_nodes = 1
    ranks = np.arange(n_cols)
    while top > 0:
        top -= 1
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]
        idx = work[lo:hi]
        pos = 0.0
        for i in range(idx.shape[0]):
            pos += y[idx[i]]
        value[node] = pos / idx.shape[0]
        if pos == 0.0 or pos == idx.shape[0]:
            continue
        # partial Fisher-Yates over canonical ranks
        for i in range(m):
            j = i + np.random.randint(n_cols - i)
            t = ranks[i]
            ranks[i] = ranks[j]
            ranks[j] = t
        chosen = np.sort(ranks[:m].copy())
        feats = np.empty(m, dtype=np.int64)
        for i in range(m):
            feats[i] = canon[chosen[i]]
        f, thr = _best_split(X, y, idx, feats)
        if f < 0:
            f, thr = _best_split(X, y, idx, canon)
        if f < 0:
            continue  # identical rows with mixed labels
        # partition idx in place
        i = lo
        j = hi - 1
        while i <= j:
            if X[work[i], f] <= thr:
                i += 1
            else:
                t = work[i]
                work[i] = work[j]
                work[j] = t
                j -= 1
        feature[node] = f
        threshold[node] = thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack_node[top] = n_nodes
        stack_lo[top] = lo
        stack_hi[top] = i
        top += 1
        stack_node[top] = n_nodes + 1
        stack_lo[top] = i
        stack_hi[top] = hi
        top += 1
        n_nodes += 2
    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes]


@numba.njit(cache=True)
def _predict_tree(X, feature, threshold, left, right, value):
    out = np.empty(X.shape[0])
    for r in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = value[node]
    return out


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        return _predict_tree(np.ascontiguousarray(X, dtype=float), self.feature, self.threshold,
                             self.left, self.right, self.value)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)


@dataclass
class ForestModel:
    columns: tuple[str, ...]
    trees: list[Tree]
    seed: int

    def predict_proba(self, X) -> np.ndarray:
        values = _as_array(X, self.columns)
        return np.mean([t.predict(values) for t in self.trees], axis=0)

    def predict(self, X, threshold: float = 0.5) -> np.ndarray:
        return (self.predict_proba(X) >= threshold).astype(int)

    def to_json(self) -> dict:
        return {
            "kind": "forest",
            "columns": list(self.columns),
            "seed": self.seed,
            "trees": [
                {
                    # features stored by name so the model survives column reordering
                    "feature": [self.columns[f] if f >= 0 else None for f in t.feature],
                    "threshold": t.threshold.tolist(),
                    "left": t.left.tolist(),
                    "right": t.right.tolist(),
                    "value": t.value.tolist(),
                }
                for t in self.trees
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> ForestModel:
        if obj.get("kind") != "forest":
            raise ValueError("not a forest model")
        cols = tuple(obj["columns"])
        pos = {c: i for i, c in enumerate(cols)}
        trees = [
            Tree(
                np.array([pos[f] if f is not None else LEAF for f in t["feature"]], dtype=np.int64),
                np.array(t["threshold"], dtype=float),
                np.array(t["left"], dtype=np.int64),
                np.array(t["right"], dtype=np.int64),
                np.array(t["value"], dtype=float),
            )
            for t in obj["trees"]
        ]
        return cls(cols, trees, obj["seed"])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), separators=(",", ":")), encoding="utf-8")

    @classmethod
    def load(cls, path) -> ForestModel:
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def _as_array(X, columns: Sequence[str]) -> np.ndarray:
    if hasattr(X, "columns") and hasattr(X, "values"):
        if tuple(X.columns) != tuple(columns):
            pos = {c: i for i, c in enumerate(X.columns)}
            missing = [c for c in columns if c not in pos]
            if missing:
                raise ValueError(f"feature matrix lacks columns {missing[:5]}")
            return np.ascontiguousarray(X.values[:, [pos[c] for c in columns]], dtype=float)
        return np.ascontiguousarray(X.values, dtype=float)
    return np.ascontiguousarray(X, dtype=float)


def train_forest(X, y, trees: int = 100, seed: int = 42, columns: Sequence[str] | None = None,
                 max_features: int | None = None) -> ForestModel:
    """Fit ``trees`` bootstrap CART trees on ``X`` (FeatureMatrix or array) and 0/1 ``y``."""
    if columns is None:
        columns = tuple(X.columns) if hasattr(X, "columns") else tuple(f"x{i}" for i in range(np.shape(X)[1]))
    values = _as_array(X, columns) if hasattr(X, "columns") else np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n, p = values.shape
    if len(y) != n:
        raise ValueError("X and y have different lengths")
    if trees < 1:
        raise ValueError("trees must be positive")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("labels must be 0/1")
    n_pos = int(y.sum())
    if n_pos < 2 or n - n_pos < 2:
        raise ValueError("forest training needs at least two examples of each class")
    m = max_features or max(1, math.ceil(math.sqrt(p)))
    canon = np.array(sorted(range(p), key=lambda j: columns[j]), dtype=np.int64)
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(trees):
        sample = rng.integers(0, n, size=n).astype(np.int64)
        tree_seed = int(rng.integers(0, 2**31 - 1))
        out.append(Tree(*_grow(values, y, sample, canon, min(m, p), tree_seed)))
    return ForestModel(tuple(columns), out, seed)
