from dataclasses import replace
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from followback.characterize import (MEASURES, SECONDS_PER_YEAR, CorrelationError, MeasureRow,
                                     binary_comparison, community_correlation, compute_measures)
from followback.community import partition_from_groups
from followback.graph import Corpus, FollowGraph, LabelRecord

from conftest import PIVOT, account, tweet


def _corpus(created, tweets=(), label=LabelRecord("u", True, 7200)):
    acc = account("u", created=created, followers_count=10, followings_count=20, statuses_count=30,
                  likes_count=40)
    return Corpus({"u": acc}, FollowGraph(["u"], []), {"u": tuple(tweets)} if tweets else {}, {"u": label})


def test_age_in_julian_years():
    (row,) = compute_measures(_corpus(PIVOT - timedelta(seconds=SECONDS_PER_YEAR)), PIVOT)
    assert row.age_years == 1.0
    (row,) = compute_measures(_corpus(datetime(2020, 11, 12, tzinfo=timezone.utc)), PIVOT)
    assert row.age_years == pytest.approx(365 / 365.25, abs=1e-15)
    assert row.response_time_hours == 2.0


def test_pivot_before_creation_is_an_error():
    with pytest.raises(ValueError, match="pivot"):
        compute_measures(_corpus(PIVOT + timedelta(days=1)), PIVOT)


def test_retweet_ratio_and_engagements():
    tweets = [tweet(f"r{i}", "u", is_retweet=True, retweeted_user_id="v") for i in range(74)]
    tweets += [tweet(f"o{i}", "u") for i in range(126)]
    (row,) = compute_measures(_corpus(datetime(2020, 1, 1, tzinfo=timezone.utc), tweets), PIVOT)
    assert row.retweet_ratio == 0.37
    tweets = [tweet("a", "u", like_count=3, retweet_count=1), tweet("b", "u", like_count=2)]
    (row,) = compute_measures(_corpus(datetime(2020, 1, 1, tzinfo=timezone.utc), tweets), PIVOT)
    assert row.engagements_received == 6
    (row,) = compute_measures(_corpus(datetime(2020, 1, 1, tzinfo=timezone.utc)), PIVOT)
    assert row.retweet_ratio is None and row.engagements_received is None


def test_unsolicited_followers_have_no_response_time():
    c = _corpus(datetime(2020, 1, 1, tzinfo=timezone.utc), label=LabelRecord("u", True, None, True))
    assert compute_measures(c, PIVOT)[0].response_time_hours is None


def test_per_age_fields_scale_with_age():
    created = datetime(2019, 5, 1, tzinfo=timezone.utc)
    (base,) = compute_measures(_corpus(created), PIVOT)
    for c in (0.5, 2.0, 3.0):
        older = PIVOT - (PIVOT - created) * c
        (row,) = compute_measures(_corpus(older), PIVOT)
        for f in ("followers_per_age", "followings_per_age", "statuses_per_age", "likes_per_age"):
            assert getattr(row, f) == pytest.approx(getattr(base, f) / c, rel=1e-12)
        assert row.followers_per_age == pytest.approx(row.followers / row.age_years, rel=1e-9)


def _rows(rng, n, shift=0.0, prefix="u"):
    rows = []
    for i in range(n):
        age = float(rng.lognormal(0.5 + shift, 0.5))
        f, g, s, lk = (int(rng.lognormal(m, 1.0)) for m in (6, 6, 8, 8))
        rows.append(MeasureRow(f"{prefix}{i:05d}", age, float(rng.lognormal(2, 1)), f, g, s, lk,
                               f / age, g / age, s / age, lk / age, float(rng.beta(2, 2)),
                               float(rng.beta(3, 5)), int(rng.lognormal(5, 1))))
    return rows


def test_same_distribution_groups_are_rarely_significant():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        rows = _rows(rng, 1000)
        labels = {r.user_id: LabelRecord(r.user_id, i % 2 == 0) for i, r in enumerate(rows)}
        report = binary_comparison(rows, labels)
        ps = [c.p for c in report.rows]
        assert len(ps) == 13 and all(p is not None for p in ps)
        assert sum(p > 0.01 for p in ps) >= 12


def test_comparison_uses_matching_tests():
    rng = np.random.default_rng(0)
    rows = _rows(rng, 40)
    labels = {r.user_id: LabelRecord(r.user_id, i < 20) for i, r in enumerate(rows)}
    report = binary_comparison(rows, labels)
    for (name, _, kind), c in zip(MEASURES, report.rows):
        assert c.measure == name and c.statistic_kind == kind
        assert c.test == ("welch" if kind == "mean" else "wilcoxon")
        assert c.diff == pytest.approx(c.group_stat_fb - c.group_stat_other)


def test_group_medians_ignore_id_relabeling():
    rng = np.random.default_rng(1)
    rows = _rows(rng, 50)
    labels = {r.user_id: LabelRecord(r.user_id, i % 3 == 0) for i, r in enumerate(rows)}
    a = binary_comparison(rows, labels)
    renamed = [replace(r, user_id="z" + r.user_id[::-1]) for r in rows]
    labels2 = {"z" + u[::-1]: LabelRecord("z" + u[::-1], rec.followed_back) for u, rec in labels.items()}
    b = binary_comparison(renamed, labels2)
    for x, y in zip(a.rows, b.rows):
        if x.statistic_kind == "median":
            assert x.group_stat_fb == y.group_stat_fb and x.group_stat_other == y.group_stat_other


def test_single_group_is_an_error():
    rows = _rows(np.random.default_rng(2), 10)
    with pytest.raises(ValueError):
        binary_comparison(rows, {r.user_id: LabelRecord(r.user_id, True) for r in rows})


def test_default_corpus_reproduces_difference_signs(default_world):
    c = default_world.corpus
    report = binary_comparison(compute_measures(c, PIVOT), c.labels)
    assert report["age"].diff < 0
    for m in ("followers", "followings", "engagements", "reciprocity", "followers_per_age",
              "followings_per_age", "likes"):
        assert report[m].diff > 0, m
    assert report["followers"].group_stat_fb == pytest.approx(3200, rel=0.1)
    assert report["followers"].group_stat_other == pytest.approx(785, rel=0.1)
    assert report["retweet_ratio"].group_stat_fb == pytest.approx(0.37, abs=0.03)


def test_community_correlation_directions(default_world, default_partition):
    c = default_world.corpus
    rows = compute_measures(c, PIVOT)
    corr = community_correlation(rows, default_partition)
    assert corr["age"][0] < 0
    assert corr["engagements"][0] >= 0.5
    fb = community_correlation(rows, default_partition, fb_only=True, labels=c.labels)
    assert set(fb) == set(corr)
    for r, p in corr.values():
        assert -1 <= r <= 1 and 0 <= p <= 1


def test_community_correlation_errors(default_world, default_partition):
    rows = compute_measures(default_world.corpus, PIVOT)
    keep = [c.community_id for c in default_partition.communities][:2]
    exclude = [c.community_id for c in default_partition.communities if c.community_id not in keep]
    with pytest.raises(ValueError, match="three"):
        community_correlation(rows, default_partition, exclude=exclude)


def test_constant_measure_names_itself():
    part = partition_from_groups({"a": ["a0", "a1"], "b": ["b0", "b1"], "c": ["c0", "c1"]})
    rows, labels = [], {}
    for i, u in enumerate(sorted(part.assignment)):
        rows.append(MeasureRow(u, 1.0, float(i), 5, 5, 5, 5, 5.0, 5.0, 5.0, 5.0, 0.5, None, None))
        labels[u] = LabelRecord(u, i % 2 == 0 or u.startswith("a"))
    part = part.with_labels(labels)
    with pytest.raises(CorrelationError) as err:
        community_correlation(rows, part)
    assert err.value.measure == "age"
