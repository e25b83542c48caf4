import math

import numpy as np
import pytest

from followback.coordination import (UserVector, build_user_vectors, coordination_curves, cosine_matrix,
                                     default_thresholds, engagements_from_tweets, similarity_network,
                                     threshold_sweep)
from followback.synth import BACKGROUND

from conftest import tweet


def test_tweet_engaged_by_everyone_has_zero_weight():
    assert build_user_vectors([("a", "t1")]) == []
    assert build_user_vectors([("a", "t1"), ("b", "t1")]) == []


def test_hand_computed_tfidf_table():
    eng = [("u1", "t1"), ("u1", "t1"), ("u1", "t2"),
           ("u2", "t2"), ("u2", "t3"),
           ("u3", "t3"), ("u3", "t4"), ("u3", "t4"), ("u3", "t4"),
           ("u4", "t5"), ("u4", "t1"),
           ("u5", "t6"), ("u5", "t2")]
    # N = 5; df: t1 2, t2 3, t3 2, t4 1, t5 1, t6 1
    ln = math.log
    expected = {
        "u1": {"t1": 2 * ln(5 / 2), "t2": ln(5 / 3)},
        "u2": {"t2": ln(5 / 3), "t3": ln(5 / 2)},
        "u3": {"t3": ln(5 / 2), "t4": 3 * ln(5)},
        "u4": {"t5": ln(5), "t1": ln(5 / 2)},
        "u5": {"t6": ln(5), "t2": ln(5 / 3)},
    }
    vecs = {v.user_id: v.weights for v in build_user_vectors(eng)}
    assert set(vecs) == set(expected)
    for u, w in expected.items():
        assert set(vecs[u]) == set(w)
        for t in w:
            assert vecs[u][t] == pytest.approx(w[t], abs=1e-15)


def test_similarity_examples():
    same = [UserVector("a", {"x": 1.0, "y": 2.0}), UserVector("b", {"x": 1.0, "y": 2.0})]
    net = similarity_network(same)
    assert net.edges() == [("a", "b", 1.0)]
    ortho = [UserVector("a", {"x": 1.0}), UserVector("b", {"y": 1.0})]
    assert similarity_network(ortho, floor=0.1).edges() == []
    with pytest.raises(ValueError):
        similarity_network(same, floor=1.5)


def test_cosine_matches_brute_force():
    rng = np.random.default_rng(0)
    terms = [f"t{i}" for i in range(15)]
    vecs = []
    for i in range(10):
        pick = rng.choice(terms, int(rng.integers(1, 6)), replace=False)
        vecs.append(UserVector(f"u{i}", {t: float(rng.uniform(0.1, 3)) for t in pick}))
    sim = cosine_matrix(vecs)
    for i, a in enumerate(vecs):
        for j, b in enumerate(vecs):
            if i == j:
                continue
            dot = sum(w * b.weights.get(t, 0.0) for t, w in a.weights.items())
            na = math.sqrt(sum(w * w for w in a.weights.values()))
            nb = math.sqrt(sum(w * w for w in b.weights.values()))
            assert sim[i, j] == pytest.approx(dot / (na * nb), abs=1e-12)
    assert np.array_equal(sim, sim.T)
    assert sim.min() >= 0 and sim.max() <= 1


def test_cosine_is_scale_invariant():
    rng = np.random.default_rng(1)
    eng = [(f"u{rng.integers(0, 8)}", f"t{rng.integers(0, 12)}") for _ in range(60)]
    base = cosine_matrix(build_user_vectors(eng))
    scaled = cosine_matrix(build_user_vectors(eng * 3))
    assert np.allclose(base, scaled, atol=1e-12)


def _net(nodes, weighted_edges):
    idx = {n: i for i, n in enumerate(nodes)}
    w = np.zeros((len(nodes), len(nodes)))
    for a, b, x in weighted_edges:
        w[idx[a], idx[b]] = w[idx[b], idx[a]] = x
    from followback.coordination import SimilarityNetwork
    return SimilarityNetwork(tuple(nodes), w, w > 0)


def test_complete_graph_ratio_is_one():
    nodes = list("abcde")
    net = _net(nodes, [(a, b, 1.0) for i, a in enumerate(nodes) for b in nodes[i + 1:]])
    curve = threshold_sweep(net, default_thresholds())
    assert all(r == 1.0 for _, r in curve.points)


def test_star_with_isolated_node():
    nodes = ["c", "l1", "l2", "l3", "z"]
    net = _net(nodes, [("c", l, 0.9) for l in ("l1", "l2", "l3")])
    curve = threshold_sweep(net, [0.0, 0.5, 0.95])
    assert curve.ratio_at(0.5) == pytest.approx(4 / 5)
    # every edge is gone: five singleton components, the tie goes to the smallest id "c"
    assert curve.ratio_at(0.95) == pytest.approx(1 / 5)


def test_giant_component_tie_break():
    nodes = ["d", "e", "a", "b", "x"]
    net = _net(nodes, [("d", "e", 0.5), ("a", "b", 0.5)])
    curve = threshold_sweep(net, [0.4], community_size=10)
    assert curve.points == ((0.4, 0.2),)


def test_sweep_validation():
    net = _net(list("ab"), [("a", "b", 0.5)])
    with pytest.raises(ValueError):
        threshold_sweep(net, [0.5, 0.2])
    with pytest.raises(ValueError):
        threshold_sweep(net, [0.2, 1.2])
    with pytest.raises(ValueError, match="empty"):
        threshold_sweep(_net([], []), [0.1])


def test_connected_network_starts_at_one_and_curves_are_monotone():
    rng = np.random.default_rng(3)
    for _ in range(10):
        eng = [(f"u{rng.integers(0, 20)}", f"t{rng.integers(0, 15)}") for _ in range(120)]
        net = similarity_network(build_user_vectors(eng))
        curve = threshold_sweep(net, default_thresholds())
        ratios = [r for _, r in curve.points]
        assert all(b <= a + 1e-15 for a, b in zip(ratios, ratios[1:]))
        assert ratios[0] == 1.0  # threshold 0 keeps the complete floor-0 network


def test_engagement_kinds_switch():
    tweets = {"a": (tweet("1", "a", is_retweet=True, retweeted_user_id="z", engaged_tweet_id="x"),
                    tweet("2", "a", is_quote=True, engaged_tweet_id="y"))}
    assert engagements_from_tweets(tweets, ["a"]) == [("a", "x"), ("a", "y")]
    assert engagements_from_tweets(tweets, ["a"], kinds=("retweet",)) == [("a", "x")]


def test_strong_narrow_communities_plateau(default_world, default_partition):
    from followback.community import nmi
    planted = default_world.planted
    curves = coordination_curves(default_partition, default_world.corpus.tweets)
    # map detected communities to planted names by majority
    for cid, curve in curves.items():
        members = default_partition.members(cid)
        names = [planted.assignment[u] for u in members]
        name = max(set(names), key=names.count)
        spec = planted.spec(name)
        ratios = [r for _, r in curve.points]
        assert all(b <= a for a, b in zip(ratios, ratios[1:]))
        if spec is not None and spec.coordination_pattern == "strong-narrow":
            for t, r in curve.points:
                if t >= 0.9:
                    assert 0.07 <= r <= 0.13, (name, t, r)
    assert nmi(planted.assignment, dict(default_partition.assignment)) > 0.9
    assert BACKGROUND in set(planted.assignment.values())
