import itertools
from datetime import datetime, timezone

import pytest

from followback.community import detect_communities
from followback.graph import Account, Corpus, FollowGraph, LabelRecord, Tweet
from followback.synth import default_specs, generate

PIVOT = datetime(2021, 11, 12, tzinfo=timezone.utc)


def account(uid, created=datetime(2020, 1, 1, tzinfo=timezone.utc), **kw):
    base = dict(id=uid, screen_name=f"sn_{uid}", name=f"Name {uid}", description="", location="",
                url="", created_at=created, followers_count=0, followings_count=0,
                statuses_count=0, likes_count=0)
    base.update(kw)
    return Account(**base)


def tweet(tid, uid, text="hello", t=datetime(2021, 6, 1, tzinfo=timezone.utc), **kw):
    return Tweet(id=tid, user_id=uid, created_at=t, text=text, **kw)


def mutual_edges(nodes):
    return [(a, b) for a, b in itertools.permutations(nodes, 2)]


def small_corpus(groups, fb=(), tweets=None):
    """Corpus with mutual cliques ``groups`` and follow-back users ``fb``."""
    nodes = [u for g in groups for u in g]
    edges = [e for g in groups for e in mutual_edges(g)]
    labels = {u: LabelRecord(u, u in fb) for u in nodes}
    return Corpus({u: account(u) for u in nodes}, FollowGraph(nodes, edges), tweets or {}, labels)


@pytest.fixture(scope="session")
def default_world():
    return generate(default_specs(), seed=42)


@pytest.fixture(scope="session")
def default_partition(default_world):
    c = default_world.corpus
    return detect_communities(c.graph.internal(), min_size=100, seed=42).with_labels(c.labels)


@pytest.fixture(scope="session")
def corpus_dir(default_world, tmp_path_factory):
    d = tmp_path_factory.mktemp("corpus")
    default_world.write(d)
    return d


@pytest.fixture(scope="session")
def full_run(corpus_dir, tmp_path_factory):
    """Output directory of one complete default pipeline run."""
    from followback.pipeline import load_config, run_pipeline

    out = tmp_path_factory.mktemp("run")
    cfg = load_config(overrides={"accounts": corpus_dir / "accounts.jsonl", "edges": corpus_dir / "edges.csv",
                                 "tweets": corpus_dir / "tweets.jsonl", "labels": corpus_dir / "labels.jsonl",
                                 "output": out})
    run_pipeline(cfg)
    return out


# criterion number -> (passed, detail), filled by the acceptance tests
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {detail}")
