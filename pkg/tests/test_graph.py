import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from followback.graph import (Corpus, CorpusError, FollowGraph, LabelRecord, Tweet, edge_reciprocity,
                              load_corpus, user_reciprocity, write_corpus, write_edges, write_jsonl)

from conftest import account, tweet


def _write(tmp_path, accounts, edges, tweets=(), labels=()):
    write_jsonl(tmp_path / "accounts.jsonl", [a.to_json() for a in accounts])
    write_edges(tmp_path / "edges.csv", edges)
    write_jsonl(tmp_path / "tweets.jsonl", [t.to_json() for t in tweets])
    write_jsonl(tmp_path / "labels.jsonl", [r.to_json() for r in labels])
    return [tmp_path / n for n in ("accounts.jsonl", "edges.csv", "tweets.jsonl", "labels.jsonl")]


def test_load_three_accounts_two_edges(tmp_path):
    paths = _write(tmp_path, [account(u) for u in "abc"], [("a", "b"), ("b", "c")])
    c = load_corpus(*paths)
    assert len(c.graph) == 3 and len(c.graph.edges) == 2
    assert not c.graph.external


def test_unknown_edge_endpoint_becomes_external_stub(tmp_path):
    paths = _write(tmp_path, [account(u) for u in "ab"], [("a", "b"), ("a", "X")])
    c = load_corpus(*paths)
    assert "X" in c.graph and c.graph.external == {"X"}
    assert c.graph.internal().nodes == ("a", "b")
    assert "X" not in c.accounts


def test_duplicate_account_id_names_line(tmp_path):
    paths = _write(tmp_path, [account("a"), account("b"), account("a")], [])
    with pytest.raises(CorpusError, match=r"accounts\.jsonl:3: duplicate account id"):
        load_corpus(*paths)


def test_malformed_line_names_file_and_line(tmp_path):
    paths = _write(tmp_path, [account("a")], [])
    with open(paths[0], "a") as fh:
        fh.write("{not json\n")
    with pytest.raises(CorpusError, match=r"accounts\.jsonl:2"):
        load_corpus(*paths)
    paths[0].write_text("")
    write_jsonl(paths[2], [{"id": "t", "user_id": "a"}])
    with pytest.raises(CorpusError, match=r"tweets\.jsonl:1: invalid tweet"):
        load_corpus(*paths)


def test_missing_file_names_path(tmp_path):
    with pytest.raises(CorpusError, match="nope.jsonl"):
        load_corpus(tmp_path / "nope.jsonl", tmp_path / "edges.csv")


def test_edges_file_errors(tmp_path):
    write_jsonl(tmp_path / "a.jsonl", [account("a").to_json()])
    (tmp_path / "e.csv").write_text("src,dst\na,b,c\n")
    with pytest.raises(CorpusError, match=r"e\.csv:2"):
        load_corpus(tmp_path / "a.jsonl", tmp_path / "e.csv")
    (tmp_path / "e.csv").write_text("from,to\na,b\n")
    with pytest.raises(CorpusError, match=r"e\.csv:1"):
        load_corpus(tmp_path / "a.jsonl", tmp_path / "e.csv")


def test_duplicate_edges_are_dropped(tmp_path):
    write_jsonl(tmp_path / "a.jsonl", [account(u).to_json() for u in "ab"])
    (tmp_path / "e.csv").write_text("src,dst\na,b\na,b\nb,a\n")
    c = load_corpus(tmp_path / "a.jsonl", tmp_path / "e.csv")
    assert c.graph.edges == (("a", "b"), ("b", "a"))


def test_round_trip_is_bit_identical(tmp_path, default_world):
    first = write_corpus(default_world.corpus, tmp_path / "one")
    again = load_corpus(first["accounts"], first["edges"], first["tweets"], first["labels"])
    second = write_corpus(again, tmp_path / "two")
    for key in first:
        assert first[key].read_bytes() == second[key].read_bytes(), key


def test_graph_invariants():
    with pytest.raises(ValueError, match="self-loop"):
        FollowGraph(["a"], [("a", "a")])
    with pytest.raises(ValueError, match="outside"):
        FollowGraph(["a"], [("a", "b")])
    g = FollowGraph("ab", [("a", "b"), ("a", "b")])
    assert g.edges == (("a", "b"),)


def test_label_and_tweet_invariants():
    with pytest.raises(ValueError):
        LabelRecord("u", False, response_time=10)
    with pytest.raises(ValueError):
        LabelRecord("u", True, response_time=10, unsolicited=True)
    with pytest.raises(ValueError):
        LabelRecord("u", False, followed_dnfb=True)
    with pytest.raises(ValueError):
        tweet("t", "u", is_retweet=True)
    with pytest.raises(ValueError):
        tweet("t", "u", is_retweet=True, retweeted_user_id="v", is_reply=True)
    with pytest.raises(ValueError):
        account("u", followers_count=-1)
    rec = LabelRecord("u", True, 600, False, True)
    assert LabelRecord.from_json(json.loads(json.dumps(rec.to_json()))) == rec


# ---- reciprocity -------------------------------------------------------------------


def test_edge_reciprocity_examples():
    assert edge_reciprocity(FollowGraph("ab", [("a", "b"), ("b", "a")])) == 1.0
    assert edge_reciprocity(FollowGraph("ab", [("a", "b")])) == 0.0
    with pytest.raises(ValueError, match="undefined on empty graph"):
        edge_reciprocity(FollowGraph("ab", []))


def _random_graph(rng, n, p):
    nodes = [f"n{i}" for i in range(n)]
    edges = [(a, b) for a, b in itertools.permutations(nodes, 2) if rng.random() < p]
    return FollowGraph(nodes, edges), nodes, edges


def test_edge_reciprocity_matches_double_loop():
    rng = np.random.default_rng(0)
    for _ in range(20):
        g, _, edges = _random_graph(rng, int(rng.integers(2, 21)), rng.uniform(0.1, 0.6))
        if not edges:
            continue
        mutual = 0
        for u, v in edges:
            for x, y in edges:
                if (x, y) == (v, u):
                    mutual += 1
                    break
        assert edge_reciprocity(g) == pytest.approx(mutual / len(edges), abs=1e-15)


def test_reversal_closed_graph_is_fully_reciprocal():
    rng = np.random.default_rng(1)
    for _ in range(10):
        _, nodes, edges = _random_graph(rng, 12, 0.3)
        closed = set(edges) | {(v, u) for u, v in edges}
        if closed:
            assert edge_reciprocity(FollowGraph(nodes, sorted(closed))) == 1.0


def test_user_reciprocity_examples():
    g = FollowGraph("abcde", [("a", "b"), ("a", "c"), ("a", "d"), ("c", "a"), ("d", "a"), ("e", "a")])
    assert user_reciprocity("a", g) == 0.5
    g = FollowGraph("abc", [("a", "b"), ("a", "c"), ("b", "a"), ("c", "a")])
    assert user_reciprocity("a", g) == 1.0
    assert user_reciprocity("z", FollowGraph("z", [])) == 0.0
    with pytest.raises(KeyError):
        user_reciprocity("q", g)


def test_mean_user_reciprocity_matches_raw_edge_lists():
    rng = np.random.default_rng(2)
    for _ in range(10):
        g, nodes, edges = _random_graph(rng, 15, 0.25)
        mine = np.mean([user_reciprocity(u, g) for u in nodes])
        brute = []
        for u in nodes:
            fo = {v for x, v in edges if x == u}
            fr = {x for x, v in edges if v == u}
            brute.append(len(fo & fr) / len(fo | fr) if fo | fr else 0.0)
        assert mine == pytest.approx(np.mean(brute), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.sets(st.tuples(st.integers(0, 7), st.integers(0, 7)).filter(lambda e: e[0] != e[1]), max_size=30),
       st.permutations(list(range(8))))
def test_user_reciprocity_is_relabeling_invariant(edges, perm):
    nodes = [str(i) for i in range(8)]
    g = FollowGraph(nodes, [(str(a), str(b)) for a, b in edges])
    h = FollowGraph(nodes, [(str(perm[a]), str(perm[b])) for a, b in edges])
    for i in range(8):
        assert user_reciprocity(str(i), g) == user_reciprocity(str(perm[i]), h)


def test_corpus_is_read_only():
    c = Corpus({"a": account("a")}, FollowGraph("a", []))
    with pytest.raises(TypeError):
        c.accounts["b"] = account("b")
    assert c.tweets_of("a") == ()


def test_tweet_json_round_trip():
    t = tweet("t1", "u", is_retweet=True, retweeted_user_id="v", mentions=("x", "y"), hashtags=("h",),
              like_count=3, engaged_tweet_id="t0")
    assert Tweet.from_json(json.loads(json.dumps(t.to_json()))) == t
