import itertools
import time

import networkx as nx
import numpy as np
import pytest
from sklearn.metrics import normalized_mutual_info_score

from followback.community import (NONE_LABEL, Partition, community_profile, detect_communities,
                                  follow_back_ratio, modularity, nmi, partition_from_groups)
from followback.graph import FollowGraph, LabelRecord

from conftest import mutual_edges, tweet


def _q_definition(graph, assign):
    """Newman Q from the O(n^2) pair sum over the weighted undirected projection."""
    nodes = list(graph.nodes)
    idx = {n: i for i, n in enumerate(nodes)}
    a = np.zeros((len(nodes), len(nodes)))
    for u, v in graph.edges:
        a[idx[u], idx[v]] += 1
        a[idx[v], idx[u]] += 1
    k = a.sum(axis=1)
    two_m = a.sum()
    q = 0.0
    for i, j in itertools.product(range(len(nodes)), repeat=2):
        if assign[nodes[i]] == assign[nodes[j]]:
            q += a[i, j] - k[i] * k[j] / two_m
    return q / two_m


def _groups(part):
    return sorted(sorted(m) for m in part.groups().values())


def two_triangles():
    return FollowGraph("abcdef", mutual_edges("abc") + mutual_edges("def"))


def test_two_triangles_match_best_bipartition():
    g = two_triangles()
    best, best_q = None, -1.0
    for mask in range(1, 2 ** 6 - 1):
        assign = {n: (mask >> i) & 1 for i, n in enumerate(g.nodes)}
        q = _q_definition(g, assign)
        if q > best_q + 1e-12:
            best, best_q = assign, q
    part = detect_communities(g, min_size=1, seed=0)
    assert _groups(part) == [["a", "b", "c"], ["d", "e", "f"]]
    assert {frozenset(u for u in best if best[u] == c) for c in (0, 1)} == {frozenset("abc"), frozenset("def")}
    assert part.modularity == pytest.approx(best_q, abs=1e-12)


def test_complete_mutual_graph_is_one_community():
    g = FollowGraph("abcdef", mutual_edges("abcdef"))
    part = detect_communities(g, min_size=1)
    assert len(part.communities) == 1 and part.communities[0].size == 6


def test_planted_twelve_blocks_recovered():
    rng = np.random.default_rng(7)
    n, blocks = 200, 12
    nodes = [f"v{i:05d}" for i in range(n * blocks)]
    truth = {u: i // n for i, u in enumerate(nodes)}
    edges = []
    for b in range(blocks):
        idx = np.arange(b * n, (b + 1) * n)
        iu, ju = np.triu_indices(n, 1)
        keep = rng.random(len(iu)) < 0.3
        for i, j in zip(idx[iu[keep]], idx[ju[keep]]):
            edges += [(nodes[i], nodes[j]), (nodes[j], nodes[i])]
    m = len(nodes)
    k = rng.binomial(m * (m - 1), 0.005)
    src, dst = rng.integers(0, m, k), rng.integers(0, m, k)
    edges += [(nodes[a], nodes[b]) for a, b in zip(src, dst) if a != b and truth[nodes[a]] != truth[nodes[b]]]
    part = detect_communities(FollowGraph(nodes, edges), min_size=100, seed=42)
    assert nmi(truth, dict(part.assignment)) >= 0.9


def test_modularity_one_community_on_path():
    g = FollowGraph("abcd", [("a", "b"), ("b", "c"), ("c", "d")])
    part = partition_from_groups({"all": "abcd"})
    # degrees 1,2,2,1 with m = 3: 3/3 - (6/6)^2
    assert modularity(g, part) == pytest.approx(0.0, abs=1e-15)
    split = partition_from_groups({"x": "ab", "y": "cd"})
    # one internal edge each, degree sums 3 and 3
    assert modularity(g, split) == pytest.approx(2 * (1 / 3 - (3 / 6) ** 2), abs=1e-15)


def test_modularity_matches_definition_and_networkx():
    rng = np.random.default_rng(3)
    for _ in range(10):
        nodes = [f"n{i}" for i in range(12)]
        edges = [(a, b) for a, b in itertools.permutations(nodes, 2) if rng.random() < 0.2]
        g = FollowGraph(nodes, edges)
        if not edges:
            continue
        assign = {u: int(rng.integers(0, 3)) for u in nodes}
        part = partition_from_groups({str(c): [u for u in nodes if assign[u] == c] for c in range(3)})
        q = modularity(g, part)
        assert q == pytest.approx(_q_definition(g, {u: part.assignment[u] for u in nodes}), abs=1e-12)
        ug = nx.Graph()
        ug.add_nodes_from(nodes)
        for (a, b), w in g.undirected_weights().items():
            ug.add_edge(a, b, weight=w)
        comms = [set(m) for m in part.groups().values() if m]
        assert q == pytest.approx(nx.community.modularity(ug, comms, weight="weight"), abs=1e-12)
        assert -0.5 <= q <= 1


def test_modularity_errors():
    g = two_triangles()
    with pytest.raises(ValueError, match="missing"):
        modularity(g, partition_from_groups({"x": "abc"}))
    with pytest.raises(ValueError):
        modularity(FollowGraph([], []), Partition({}, ()))
    with pytest.raises(ValueError, match="empty graph"):
        detect_communities(FollowGraph([], []))


def test_louvain_beats_trivial_partitions_and_is_deterministic(default_world):
    g = default_world.corpus.graph.internal()
    a = detect_communities(g, min_size=1, seed=42)
    b = detect_communities(g, min_size=1, seed=42)
    assert a.assignment == b.assignment
    singletons = partition_from_groups({u: [u] for u in g.nodes})
    one = partition_from_groups({"all": list(g.nodes)})
    assert a.modularity >= modularity(g, singletons)
    assert a.modularity >= modularity(g, one)


def test_small_groups_pool_into_none():
    g = FollowGraph([*"abcdef", "x", "y"], mutual_edges("abcdef") + [("x", "y"), ("y", "x")])
    part = detect_communities(g, min_size=3)
    none = part.stats(part.none_id)
    assert none.label == NONE_LABEL and none.size == 2
    assert sorted(part.members(part.none_id)) == ["x", "y"]
    assert [c.community_id for c in part.communities] == list(range(len(part.communities)))


def test_stub_nodes_are_not_assigned():
    g = FollowGraph([*"abc", "X"], mutual_edges("abc") + [("a", "X")], external=["X"])
    part = detect_communities(g, min_size=1)
    assert "X" not in part.assignment


def test_follow_back_ratio_examples():
    part = partition_from_groups({"c": "abcd", "e": "efg"})
    labels = {"a": LabelRecord("a", True), "b": LabelRecord("b", True), "c": LabelRecord("c", False)}
    ratios = follow_back_ratio(part, labels)
    assert ratios == {0: 0.5, 1: 0.0}


def test_ratios_weighted_mean_equals_corpus_ratio(default_partition, default_world):
    labels = default_world.corpus.labels
    part = default_partition
    total = sum(c.size * c.follow_back_ratio for c in part.communities) / len(part.assignment)
    assert total == pytest.approx(np.mean([labels[u].followed_back for u in part.assignment]), abs=1e-12)
    assert all(0 <= c.follow_back_ratio <= 1 for c in part.communities)


def test_partition_json_round_trip(tmp_path, default_partition):
    default_partition.dump(tmp_path / "p.json")
    back = Partition.load(tmp_path / "p.json")
    assert back == default_partition


def test_profile_counts_distinct_users():
    tweets = {u: (tweet(f"{u}1", u, hashtags=("x",)),) for u in "abc"}
    tweets["d"] = tuple(tweet(f"d{i}", "d", hashtags=("y",)) for i in range(5))
    part = partition_from_groups({"c": "abcd", "e": "e"})
    prof = community_profile(part, tweets, k=2)
    assert prof[0]["hashtags"] == [("x", 3), ("y", 1)]
    assert prof[1] == {"hashtags": [], "retweeted_users": []}
    with pytest.raises(ValueError):
        community_profile(part, tweets, k=0)


def test_profile_matches_hash_map_oracle():
    rng = np.random.default_rng(5)
    users = [f"u{i}" for i in range(30)]
    tags = [f"t{i}" for i in range(8)]
    tweets, rts = {}, {}
    for u in users:
        own = [tweet(f"{u}-{j}", u, hashtags=tuple(rng.choice(tags, int(rng.integers(0, 3)), replace=False)))
               for j in range(int(rng.integers(0, 4)))]
        own += [tweet(f"{u}-rt{j}", u, is_retweet=True, retweeted_user_id=str(rng.choice(users[:5])))
                for j in range(int(rng.integers(0, 3)))]
        tweets[u] = tuple(own)
    part = partition_from_groups({"a": users[:15], "b": users[15:]})
    prof = community_profile(part, tweets, k=20)
    for cid, members in part.groups().items():
        counts, rts = {}, {}
        for u in members:
            for h in {h for t in tweets[u] for h in t.hashtags}:
                counts[h] = counts.get(h, 0) + 1
            for r in {t.retweeted_user_id for t in tweets[u] if t.is_retweet}:
                rts[r] = rts.get(r, 0) + 1
        assert prof[cid]["hashtags"] == sorted(counts.items(), key=lambda t: (-t[1], t[0]))
        assert prof[cid]["retweeted_users"] == sorted(rts.items(), key=lambda t: (-t[1], t[0]))
        assert all(n <= len(members) for _, n in prof[cid]["hashtags"])


def test_nmi_matches_sklearn():
    rng = np.random.default_rng(11)
    for _ in range(10):
        a = rng.integers(0, 4, 60)
        b = rng.integers(0, 5, 60)
        keys = [f"k{i}" for i in range(60)]
        mine = nmi(dict(zip(keys, a)), dict(zip(keys, b)))
        assert mine == pytest.approx(normalized_mutual_info_score(a, b), abs=1e-12)
    assert nmi({"a": 1, "b": 2}, {"a": 5, "b": 6}) == pytest.approx(1.0)


def test_default_corpus_detection_is_fast(default_world):
    g = default_world.corpus.graph.internal()
    t = time.perf_counter()
    detect_communities(g, min_size=100, seed=42)
    assert time.perf_counter() - t < 30
