"""Per-account behavioural measures and group / community comparisons."""

from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, fields
from datetime import datetime

import numpy as np

from .community import Partition
from .graph import Corpus, LabelRecord, user_reciprocity
from .stats import median, pearson, welch_t_test, wilcoxon_rank_sum

log = logging.getLogger(__name__)

SECONDS_PER_YEAR = 31_557_600.0  # Julian year


@dataclass(frozen=True)
class MeasureRow:
    user_id: str
    age_years: float
    response_time_hours: float | None
    followers: int
    followings: int
    statuses: int
    likes: int
    followers_per_age: float
    followings_per_age: float
    statuses_per_age: float
    likes_per_age: float
    reciprocity: float
    retweet_ratio: float | None
    engagements_received: int | None


# (report name, MeasureRow attribute, group statistic)
MEASURES: tuple[tuple[str, str, str], ...] = (
    ("response_time", "response_time_hours", "median"),
    ("age", "age_years", "median"),
    ("followers", "followers", "median"),
    ("followings", "followings", "median"),
    ("followers_per_age", "followers_per_age", "median"),
    ("followings_per_age", "followings_per_age", "median"),
    ("reciprocity", "reciprocity", "mean"),
    ("statuses", "statuses", "median"),
    ("likes", "likes", "median"),
    ("statuses_per_age", "statuses_per_age", "median"),
    ("likes_per_age", "likes_per_age", "median"),
    ("retweet_ratio", "retweet_ratio", "mean"),
    ("engagements", "engagements_received", "median"),
)


def compute_measures(corpus: Corpus, pivot: datetime) -> list[MeasureRow]:
    """One row per labelled in-corpus account, ordered by user id."""
    rows = []
    for uid in sorted(corpus.labels):
        acc = corpus.accounts.get(uid)
        if acc is None:
            continue
        age = (pivot - acc.created_at).total_seconds() / SECONDS_PER_YEAR
        if age <= 0:
            raise ValueError(f"pivot {pivot.isoformat()} is not after creation of {uid!r}")
        label = corpus.labels[uid]
        rt = None
        if label.response_time is not None and not label.unsolicited:
            rt = label.response_time / 3600.0
        tweets = corpus.tweets_of(uid)
        if tweets:
            rt_ratio = sum(1 for t in tweets if t.is_retweet) / len(tweets)
            engagements = sum(t.like_count + t.retweet_count for t in tweets)
        else:
            rt_ratio = engagements = None
        recip = user_reciprocity(uid, corpus.graph) if uid in corpus.graph else 0.0
        rows.append(MeasureRow(
            user_id=uid,
            age_years=age,
            response_time_hours=rt,
            followers=acc.followers_count,
            followings=acc.followings_count,
            statuses=acc.statuses_count,
            likes=acc.likes_count,
            followers_per_age=acc.followers_count / age,
            followings_per_age=acc.followings_count / age,
            statuses_per_age=acc.statuses_count / age,
            likes_per_age=acc.likes_count / age,
            reciprocity=recip,
            retweet_ratio=rt_ratio,
            engagements_received=engagements,
        ))
    return rows


@dataclass(frozen=True)
class Comparison:
    measure: str
    statistic_kind: str  # "mean" or "median"
    group_stat_fb: float | None
    group_stat_other: float | None
    diff: float | None
    test: str | None
    statistic: float | None
    p: float | None

    def to_json(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple[Comparison, ...]
    n_fb: int
    n_other: int

    def __getitem__(self, measure: str) -> Comparison:
        for r in self.rows:
            if r.measure == measure:
                return r
        raise KeyError(measure)

    def to_json(self) -> dict:
        return {"n_fb": self.n_fb, "n_other": self.n_other,
                "measures": [r.to_json() for r in self.rows]}


def _values(rows: Iterable[MeasureRow], attr: str) -> list[float]:
    return [float(v) for r in rows if (v := getattr(r, attr)) is not None]


def _stat(values: list[float], kind: str) -> float | None:
    if not values:
        return None
    if kind == "median":
        return median(values)
    return float(np.mean(values))


def binary_comparison(measures: list[MeasureRow], labels: Mapping[str, LabelRecord]
                      ) -> ComparisonReport:
    """Follow-back vs other accounts for every measure.

    Mean-type measures are tested with Welch's t-test, median-type measures
    with the Wilcoxon rank-sum test.
    """
    ordered = sorted(measures, key=lambda r: r.user_id)
    fb = [r for r in ordered if labels.get(r.user_id) is not None and labels[r.user_id].followed_back]
    other = [r for r in ordered if labels.get(r.user_id) is not None and not labels[r.user_id].followed_back]
    if not fb or not other:
        raise ValueError("binary comparison needs both follow-back and other accounts")
    out = []
    for name, attr, kind in MEASURES:
        a, b = _values(fb, attr), _values(other, attr)
        sa, sb = _stat(a, kind), _stat(b, kind)
        diff = sa - sb if sa is not None and sb is not None else None
        test = stat = p = None
        try:
            if kind == "mean" and len(a) >= 2 and len(b) >= 2:
                test = "welch"
                stat, p = welch_t_test(a, b)
            elif kind == "median" and a and b:
                test = "wilcoxon"
                stat, p = wilcoxon_rank_sum(a, b)
        except ValueError as exc:
            log.warning("%s: test skipped (%s)", name, exc)
            test = stat = p = None
        out.append(Comparison(name, kind, sa, sb, diff, test, stat, p))
    return ComparisonReport(tuple(out), len(fb), len(other))


class CorrelationError(ValueError):
    def __init__(self, measure: str, cause: str):
        super().__init__(f"{measure}: {cause}")
        self.measure = measure


def community_correlation(measures: list[MeasureRow], partition: Partition,
                          exclude: Iterable[int] = (), fb_only: bool = False,
                          labels: Mapping[str, LabelRecord] | None = None,
                          include_none: bool = False) -> dict[str, tuple[float, float]]:
    """Pearson r (and p) between each community statistic and its follow-back ratio.

    ``partition`` must carry follow-back ratios (see ``Partition.with_labels``);
    ``labels`` is required when ``fb_only`` restricts statistics to follow-back members.
    """
    excluded = set(exclude)
    comms = [c for c in partition.communities
             if c.community_id not in excluded and (include_none or not c.is_none)]
    if len(comms) < 3:
        raise ValueError("community correlation needs at least three communities")
    if fb_only and labels is None:
        raise ValueError("fb_only requires labels")
    by_comm: dict[int, list[MeasureRow]] = {c.community_id: [] for c in comms}
    for row in sorted(measures, key=lambda r: r.user_id):
        cid = partition.assignment.get(row.user_id)
        if cid not in by_comm:
            continue
        if fb_only and not (row.user_id in labels and labels[row.user_id].followed_back):
            continue
        by_comm[cid].append(row)
    result = {}
    for name, attr, kind in MEASURES:
        xs, ys = [], []
        for c in comms:
            value = _stat(_values(by_comm[c.community_id], attr), kind)
            if value is None:
                log.info("%s: community %s has no values, dropped", name, c.label)
                continue
            xs.append(value)
            ys.append(c.follow_back_ratio)
        try:
            result[name] = pearson(xs, ys)
        except ValueError as exc:
            raise CorrelationError(name, str(exc)) from None
    return result
