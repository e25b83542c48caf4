from collections import Counter

import numpy as np
import pytest

from followback.graph import FollowGraph
from followback.node2vec import (Node2VecParams, _csr, biased_walks, node2vec, read_embeddings,
                                 train_embeddings, transition_probs, write_embeddings)

from conftest import mutual_edges


def _weights_by_definition(graph, prev, cur, p, q):
    und = {frozenset(e) for e in graph.edges}
    nbrs = sorted((x for x in graph.nodes if frozenset((cur, x)) in und))
    w = []
    for x in nbrs:
        if x == prev:
            w.append(1 / p)
        elif frozenset((prev, x)) in und:
            w.append(1.0)
        else:
            w.append(1 / q)
    w = np.array(w)
    return nbrs, w / w.sum()


# a-b-c triangle plus a pendant d on b and e on c
KITE = FollowGraph("abcde", [("a", "b"), ("b", "c"), ("c", "a"), ("b", "d"), ("e", "c")])


def test_isolated_node_walk_has_length_one():
    g = FollowGraph("abz", [("a", "b")])
    walks = biased_walks(g, Node2VecParams(walk_length=10, walks_per_node=2))
    assert [w for w in walks if w[0] == "z"] == [["z"], ["z"]]


def test_two_node_walk_alternates():
    g = FollowGraph("ab", [("a", "b")])
    for w in biased_walks(g, Node2VecParams(walk_length=9, walks_per_node=3)):
        assert len(w) == 9
        assert all(x != y for x, y in zip(w, w[1:]))


def test_transition_probs_match_definition_and_sum_to_one():
    nodes, indptr, indices = _csr(KITE)
    idx = {n: i for i, n in enumerate(nodes)}
    for p, q in ((1, 0.5), (0.25, 4), (2, 1)):
        for u, v in KITE.edges:
            for prev, cur in ((u, v), (v, u)):
                probs = transition_probs(idx[prev], idx[cur], indptr, indices, p, q)
                nbrs, expected = _weights_by_definition(KITE, prev, cur, p, q)
                assert [nodes[i] for i in indices[indptr[idx[cur]]:indptr[idx[cur] + 1]]] == nbrs
                assert probs == pytest.approx(expected, abs=1e-15)
                assert probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_empirical_transitions_match_within_one_percent():
    p, q = 0.5, 2.0
    params = Node2VecParams(walk_length=3, walks_per_node=60_000, p=p, q=q, seed=7)
    walks = [w for w in biased_walks(KITE, params) if w[0] == "a"]
    # condition on the first hop to isolate the biased second step
    for first in ("b", "c"):
        seconds = Counter(w[2] for w in walks if w[1] == first)
        n = sum(seconds.values())
        nbrs, expected = _weights_by_definition(KITE, "a", first, p, q)
        for x, pr in zip(nbrs, expected):
            assert abs(seconds[x] / n - pr) < 0.01, (first, x)
    # the first hop is uniform over neighbours
    firsts = Counter(w[1] for w in walks)
    assert abs(firsts["b"] / len(walks) - 0.5) < 0.01


def test_walks_are_deterministic_per_seed():
    params = Node2VecParams(walk_length=12, walks_per_node=3, seed=5)
    assert biased_walks(KITE, params) == biased_walks(KITE, params)
    assert biased_walks(KITE, params) != biased_walks(KITE, Node2VecParams(walk_length=12, walks_per_node=3,
                                                                           seed=6))


def _cos(a, b):
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def test_two_cliques_separate():
    left = [f"l{i}" for i in range(10)]
    right = [f"r{i}" for i in range(10)]
    g = FollowGraph(left + right, mutual_edges(left) + mutual_edges(right) + [("l0", "r0"), ("r0", "l0")])
    params = Node2VecParams(dim=32, walk_length=20, walks_per_node=10, window=3, seed=1)
    emb = node2vec(g, params)
    intra = np.mean([_cos(emb[a], emb[b]) for grp in (left, right) for a in grp for b in grp if a < b])
    inter = np.mean([_cos(emb[a], emb[b]) for a in left for b in right])
    assert intra - inter >= 0.3
    again = node2vec(g, params)
    assert all(np.array_equal(emb[n], again[n]) for n in g.nodes)


def test_single_node_gets_zero_vector():
    emb = node2vec(FollowGraph("a", []), Node2VecParams(dim=8))
    assert emb["a"].tolist() == [0.0] * 8
    g = FollowGraph("abz", [("a", "b")])
    emb = node2vec(g, Node2VecParams(dim=8, walk_length=5, walks_per_node=2))
    assert not emb["z"].any() and emb["a"].any()


def test_param_validation_and_errors():
    with pytest.raises(ValueError):
        Node2VecParams(q=0)
    with pytest.raises(ValueError):
        Node2VecParams(dim=0)
    with pytest.raises(ValueError):
        biased_walks(FollowGraph([], []))
    with pytest.raises(ValueError):
        train_embeddings([])


def test_embedding_csv_round_trip(tmp_path):
    emb = {"a": np.array([0.1, -2.5e-7]), "b": np.array([np.pi, 0.0])}
    write_embeddings(tmp_path / "e.csv", emb)
    back = read_embeddings(tmp_path / "e.csv")
    assert list(back) == ["a", "b"] and all(np.array_equal(emb[k], back[k]) for k in emb)
