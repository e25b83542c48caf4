"""Train/test splits and precision/recall/F1 reporting."""

from __future__ import annotations

import json
import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .community import Partition
from .graph import LabelRecord

log = logging.getLogger(__name__)

RANDOM = "Random"
STRATIFIED = "Stratified"


@dataclass(frozen=True)
class Split:
    name: str
    train: tuple[str, ...]
    tests: Mapping[str, tuple[str, ...]]  # test-set label -> user ids

    def __post_init__(self):
        seen = set(self.train)
        for ids in self.tests.values():
            if seen & set(ids):
                raise ValueError("train and test sets overlap")
            seen |= set(ids)

    def test_ids(self) -> list[str]:
        return [u for ids in self.tests.values() for u in ids]

    def to_json(self) -> dict:
        return {"name": self.name, "train": list(self.train),
                "tests": {k: list(v) for k, v in self.tests.items()}}

    @classmethod
    def from_json(cls, obj: dict) -> Split:
        return cls(obj["name"], tuple(obj["train"]), {k: tuple(v) for k, v in obj["tests"].items()})


def _normalise_mode(mode: str) -> str:
    m = mode.lower()
    if m == "random":
        return RANDOM
    if m == "stratified":
        return STRATIFIED
    raise ValueError(f"unknown split mode {mode!r}")


def make_splits(labels: Mapping[str, LabelRecord], partition: Partition | None, mode: str,
                seed: int = 42, n_pos: int = 500, n_neg: int = 500, per_group: int = 25,
                eligible: Sequence[str] | None = None) -> Split:
    """Random: one balanced test set of ``n_pos`` + ``n_neg``.
    Stratified: ``per_group`` + ``per_group`` per community (the pooled group
    included), shrunk to what a community holds. Everything else labelled trains.
    """
    mode = _normalise_mode(mode)
    rng = np.random.default_rng(seed)
    pool = set(labels) if eligible is None else set(eligible) & set(labels)
    pos = sorted(u for u in pool if labels[u].followed_back)
    neg = sorted(u for u in pool if not labels[u].followed_back)
    if not pos:
        raise ValueError("no positive labels available for a split")
    if mode == RANDOM:
        if len(pos) < n_pos:
            raise ValueError(f"only {len(pos)} positives available, {n_pos} requested")
        if len(neg) < n_neg:
            raise ValueError(f"only {len(neg)} negatives available, {n_neg} requested")
        test = sorted(rng.choice(pos, n_pos, replace=False).tolist()
                      + rng.choice(neg, n_neg, replace=False).tolist())
        test_set = set(test)
        train = tuple(u for u in sorted(pool) if u not in test_set)
        return Split(RANDOM, train, {"all": tuple(test)})
    if partition is None:
        raise ValueError("stratified splits need a partition")
    tests: dict[str, tuple[str, ...]] = {}
    used: set[str] = set()
    for c in partition.communities:
        members = set(partition.members(c.community_id))
        cp = [u for u in pos if u in members]
        cn = [u for u in neg if u in members]
        k = min(per_group, len(cp), len(cn))
        name = c.label or str(c.community_id)
        if k < per_group:
            log.warning("community %s: mini-test set shrunk to %d+%d", name, k, k)
        if k == 0:
            continue
        chosen = sorted(rng.choice(cp, k, replace=False).tolist() + rng.choice(cn, k, replace=False).tolist())
        tests[name] = tuple(chosen)
        used.update(chosen)
    if not tests:
        raise ValueError("no community holds both classes")
    train = tuple(u for u in sorted(pool) if u not in used)
    return Split(STRATIFIED, train, tests)


@dataclass(frozen=True)
class SetScore:
    name: str
    n: int
    n_pos: int
    precision: float | None
    recall: float | None
    f1: float | None

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class EvalReport:
    split_name: str
    sets: tuple[SetScore, ...]
    precision: float | None
    recall: float | None
    f1: float | None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"split": self.split_name, "precision": self.precision, "recall": self.recall,
                "f1": self.f1, "sets": [s.to_json() for s in self.sets], **self.extra}


def scores(y_true, y_pred) -> tuple[float | None, float | None, float | None]:
    """Precision, recall and F1; ``None`` where the denominator is zero."""
    y_true = np.asarray(y_true, dtype=bool)
    y_pred = np.asarray(y_pred, dtype=bool)
    tp = int(np.sum(y_true & y_pred))
    fp = int(np.sum(~y_true & y_pred))
    fn = int(np.sum(y_true & ~y_pred))
    precision = tp / (tp + fp) if tp + fp else None
    recall = tp / (tp + fn) if tp + fn else None
    if precision is None or recall is None:
        f1 = None if tp + fn == 0 else 0.0
    elif precision + recall == 0:
        f1 = 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def _mean(values):
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def evaluate(probabilities: Mapping[str, float], labels: Mapping[str, LabelRecord], split: Split,
             threshold: float = 0.5) -> EvalReport:
    """Score predicted follow-back probabilities on each test set of ``split``."""
    sets = []
    for name, ids in split.tests.items():
        y = [labels[u].followed_back for u in ids]
        pred = [probabilities[u] >= threshold for u in ids]
        p, r, f = scores(y, pred)
        if r is None:
            log.warning("test set %s has no positives; recall undefined", name)
        sets.append(SetScore(name, len(ids), int(sum(y)), p, r, f))
    if split.name == RANDOM and len(sets) == 1:
        s = sets[0]
        return EvalReport(split.name, tuple(sets), s.precision, s.recall, s.f1)
    return EvalReport(split.name, tuple(sets), _mean(s.precision for s in sets),
                      _mean(s.recall for s in sets), _mean(s.f1 for s in sets))


def write_splits(path, splits: Sequence[Split]) -> None:
    Path(path).write_text(json.dumps([s.to_json() for s in splits], indent=1), encoding="utf-8")


def read_splits(path) -> list[Split]:
    return [Split.from_json(o) for o in json.loads(Path(path).read_text(encoding="utf-8"))]
