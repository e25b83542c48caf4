"""Louvain community detection, modularity and per-community profiles."""

from __future__ import annotations

import json
import logging
import math
import random
from collections import Counter, defaultdict
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, replace

from .graph import FollowGraph, LabelRecord, Tweet, edge_reciprocity

log = logging.getLogger(__name__)

NONE_LABEL = "None"


@dataclass(frozen=True)
class CommunityStats:
    community_id: int
    size: int
    follow_back_ratio: float = 0.0
    automated_ratio: float | None = None
    edge_reciprocity: float | None = None
    label: str = ""
    is_none: bool = False


@dataclass(frozen=True)
class Partition:
    """Community assignment of in-corpus accounts.

    Ids are dense from 0 in decreasing size order; when some detected groups
    were too small they are pooled into a trailing "None" community.
    """

    assignment: Mapping[str, int]
    communities: tuple[CommunityStats, ...]
    modularity: float | None = None

    def members(self, community_id: int) -> list[str]:
        return [u for u, c in self.assignment.items() if c == community_id]

    def groups(self) -> dict[int, list[str]]:
        out: dict[int, list[str]] = {c.community_id: [] for c in self.communities}
        for u, c in self.assignment.items():
            out[c].append(u)
        return out

    @property
    def none_id(self) -> int | None:
        for c in self.communities:
            if c.is_none:
                return c.community_id
        return None

    def stats(self, community_id: int) -> CommunityStats:
        return self.communities[community_id]

    def with_labels(self, labels: Mapping[str, LabelRecord]) -> Partition:
        """Fill follow-back and automation ratios from honeypot labels."""
        fb = follow_back_ratio(self, labels)
        auto = automation_ratio(self, labels)
        comms = tuple(
            replace(c, follow_back_ratio=fb[c.community_id], automated_ratio=auto.get(c.community_id))
            for c in self.communities
        )
        return replace(self, communities=comms)

    def to_json(self) -> dict:
        groups = self.groups()
        return {
            "modularity": self.modularity,
            "communities": [
                {
                    "id": c.community_id,
                    "label": c.label,
                    "size": c.size,
                    "follow_back_ratio": c.follow_back_ratio,
                    "automated_ratio": c.automated_ratio,
                    "edge_reciprocity": c.edge_reciprocity,
                    "is_none": c.is_none,
                    "members": groups[c.community_id],
                }
                for c in self.communities
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> Partition:
        assignment = {}
        comms = []
        for rec in sorted(obj["communities"], key=lambda r: r["id"]):
            cid = int(rec["id"])
            for m in rec["members"]:
                assignment[str(m)] = cid
            comms.append(CommunityStats(
                community_id=cid,
                size=int(rec["size"]),
                follow_back_ratio=float(rec.get("follow_back_ratio", 0.0)),
                automated_ratio=rec.get("automated_ratio"),
                edge_reciprocity=rec.get("edge_reciprocity"),
                label=rec.get("label", f"C{cid}"),
                is_none=bool(rec.get("is_none", False)),
            ))
        return cls(assignment, tuple(comms), obj.get("modularity"))

    def dump(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=1)

    @classmethod
    def load(cls, path) -> Partition:
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def _adjacency(graph: FollowGraph) -> dict[str, dict[str, float]]:
    adj: dict[str, dict[str, float]] = {n: {} for n in graph.nodes}
    for (a, b), w in graph.undirected_weights().items():
        adj[a][b] = float(w)
        adj[b][a] = float(w)
    return adj


def _one_level(adj: list[dict[int, float]], order: list[int]) -> tuple[list[int], bool]:
    """Local-move phase over integer nodes; returns community of each node."""
    n = len(adj)
    # self-loops of aggregated nodes already hold twice the internal weight
    degree = [sum(nbrs.values()) for nbrs in adj]
    two_m = sum(degree)
    comm = list(range(n))
    tot = list(degree)
    improved = False
    if two_m == 0:
        return comm, False
    while True:
        moves = 0
        for i in order:
            ci = comm[i]
            ki = degree[i]
            links: dict[int, float] = defaultdict(float)
            for j, w in adj[i].items():
                if j != i:
                    links[comm[j]] += w
            tot[ci] -= ki
            best, best_gain = ci, links.get(ci, 0.0) - tot[ci] * ki / two_m
            # ascending scan with strict improvement: staying wins ties, then lowest id
            for c in sorted(links):
                gain = links[c] - tot[c] * ki / two_m
                if gain > best_gain + 1e-12:
                    best, best_gain = c, gain
            tot[best] += ki
            if best != ci:
                comm[i] = best
                moves += 1
        if moves == 0:
            break
        improved = True
    return comm, improved


def louvain(graph: FollowGraph, seed: int = 42) -> list[list[str]]:
    """Louvain modularity optimisation on the mutual-weighted undirected projection.

    Node visiting order is a seeded shuffle; equal-gain moves go to the lowest
    community id. Returns communities as lists of node ids.
    """
    rng = random.Random(seed)
    node_ids = sorted(graph.nodes)
    index = {n: i for i, n in enumerate(node_ids)}
    named = _adjacency(graph)
    adj: list[dict[int, float]] = [
        {index[m]: w for m, w in named[n].items()} for n in node_ids
    ]
    members: list[list[int]] = [[i] for i in range(len(node_ids))]
    while True:
        order = list(range(len(adj)))
        rng.shuffle(order)
        comm, improved = _one_level(adj, order)
        if not improved:
            break
        relabel = {c: k for k, c in enumerate(sorted(set(comm)))}
        new_members: list[list[int]] = [[] for _ in relabel]
        new_adj: list[dict[int, float]] = [defaultdict(float) for _ in relabel]
        for i, c in enumerate(comm):
            new_members[relabel[c]].extend(members[i])
        for i, nbrs in enumerate(adj):
            ci = relabel[comm[i]]
            for j, w in nbrs.items():
                new_adj[ci][relabel[comm[j]]] += w
        adj = [dict(d) for d in new_adj]
        members = new_members
    return [[node_ids[i] for i in sorted(group)] for group in members]


def detect_communities(graph: FollowGraph, min_size: int = 100, seed: int = 42) -> Partition:
    """Run Louvain over the in-corpus graph and pool small groups into "None".

    External stub nodes are ignored.
    """
    if min_size < 1:
        raise ValueError("min_size must be >= 1")
    inner = graph.internal()
    if len(inner) == 0:
        raise ValueError("cannot detect communities on an empty graph")
    groups = louvain(inner, seed=seed)
    groups.sort(key=lambda g: (-len(g), g[0]))
    big = [g for g in groups if len(g) >= min_size]
    small = [u for g in groups if len(g) < min_size for u in g]
    assignment: dict[str, int] = {}
    comms = []
    for cid, g in enumerate(big):
        for u in g:
            assignment[u] = cid
        comms.append(CommunityStats(cid, len(g), label=f"C{cid}",
                                    edge_reciprocity=_safe_reciprocity(inner, g)))
    if small:
        cid = len(big)
        for u in small:
            assignment[u] = cid
        comms.append(CommunityStats(cid, len(small), label=NONE_LABEL, is_none=True,
                                    edge_reciprocity=_safe_reciprocity(inner, small)))
        log.info("pooled %d nodes from groups below %d into %s", len(small), min_size, NONE_LABEL)
    assignment = {u: assignment[u] for u in inner.nodes}
    part = Partition(assignment, tuple(comms))
    return replace(part, modularity=modularity(inner, part))


def partition_from_groups(groups: Mapping[str, Iterable[str]], graph: FollowGraph | None = None) -> Partition:
    """Build a partition from named groups (e.g. a planted assignment).

    A group named "None" becomes the pooled community.
    """
    assignment: dict[str, int] = {}
    comms = []
    names = [k for k in groups if k != NONE_LABEL] + ([NONE_LABEL] if NONE_LABEL in groups else [])
    inner = graph.internal() if graph is not None else None
    for cid, name in enumerate(names):
        members = list(groups[name])
        for u in members:
            assignment[u] = cid
        rec = _safe_reciprocity(inner, members) if inner is not None else None
        comms.append(CommunityStats(cid, len(members), label=name, is_none=name == NONE_LABEL,
                                    edge_reciprocity=rec))
    part = Partition(assignment, tuple(comms))
    if inner is not None:
        part = replace(part, modularity=modularity(inner, part))
    return part


def _safe_reciprocity(graph: FollowGraph, members: list[str]) -> float | None:
    sub = graph.subgraph(members)
    return edge_reciprocity(sub) if sub.edges else None


def modularity(graph: FollowGraph, partition: Partition) -> float:
    """Newman modularity of the partition on the weighted undirected projection."""
    if not partition.assignment:
        raise ValueError("empty partition")
    assign = partition.assignment
    for n in graph.nodes:
        if n not in assign:
            raise ValueError(f"node {n!r} missing from partition")
    weights = graph.undirected_weights()
    m = float(sum(weights.values()))
    if m == 0:
        return 0.0
    internal: dict[int, float] = defaultdict(float)
    degree: dict[int, float] = defaultdict(float)
    for (a, b), w in weights.items():
        ca, cb = assign[a], assign[b]
        degree[ca] += w
        degree[cb] += w
        if ca == cb:
            internal[ca] += w
    q = 0.0
    for c in sorted(degree):
        q += internal[c] / m - (degree[c] / (2 * m)) ** 2
    return q


def follow_back_ratio(partition: Partition, labels: Mapping[str, LabelRecord]) -> dict[int, float]:
    """Share of members labelled as follow-back; unlabelled members count as negatives."""
    pos: Counter = Counter()
    size: Counter = Counter()
    for u, c in partition.assignment.items():
        size[c] += 1
        rec = labels.get(u)
        if rec is not None and rec.followed_back:
            pos[c] += 1
    return {c.community_id: (pos[c.community_id] / size[c.community_id]
                             if size[c.community_id] else 0.0)
            for c in partition.communities}


def automation_ratio(partition: Partition, labels: Mapping[str, LabelRecord]) -> dict[int, float]:
    """Share of follow-back members that also followed a do-not-follow-back honeypot.

    Communities without follow-back members are left out.
    """
    fb: Counter = Counter()
    auto: Counter = Counter()
    for u, c in partition.assignment.items():
        rec = labels.get(u)
        if rec is not None and rec.followed_back:
            fb[c] += 1
            if rec.followed_dnfb:
                auto[c] += 1
    return {c: auto[c] / fb[c] for c in sorted(fb)}


def _top_k(users_by_entity: Mapping[str, set], k: int, cap: int) -> list[tuple[str, int]]:
    ranked = sorted(((e, len(us)) for e, us in users_by_entity.items()), key=lambda t: (-t[1], t[0]))
    assert all(n <= cap for _, n in ranked)
    return ranked[:k]


def community_profile(partition: Partition, tweets: Mapping[str, Iterable[Tweet]], k: int = 5
                      ) -> dict[int, dict[str, list[tuple[str, int]]]]:
    """Top-k hashtags and retweeted users per community by number of distinct members."""
    if k < 1:
        raise ValueError("k must be >= 1")
    tags: dict[int, dict[str, set]] = defaultdict(lambda: defaultdict(set))
    rts: dict[int, dict[str, set]] = defaultdict(lambda: defaultdict(set))
    for user, cid in partition.assignment.items():
        for tw in tweets.get(user, ()):
            for h in tw.hashtags:
                tags[cid][h].add(user)
            if tw.is_retweet and tw.retweeted_user_id is not None:
                rts[cid][tw.retweeted_user_id].add(user)
    out = {}
    for c in partition.communities:
        cid = c.community_id
        out[cid] = {
            "hashtags": _top_k(tags.get(cid, {}), k, c.size),
            "retweeted_users": _top_k(rts.get(cid, {}), k, c.size),
        }
    return out


def nmi(labels_true: Mapping[str, object], labels_pred: Mapping[str, object]) -> float:
    """Normalised mutual information (arithmetic mean normalisation) over shared keys."""
    keys = [k for k in labels_true if k in labels_pred]
    n = len(keys)
    if n == 0:
        raise ValueError("no shared keys")
    joint = Counter((labels_true[k], labels_pred[k]) for k in keys)
    a = Counter(labels_true[k] for k in keys)
    b = Counter(labels_pred[k] for k in keys)

    def entropy(counts):
        return -sum(v / n * math.log(v / n) for v in counts.values())

    ha, hb = entropy(a), entropy(b)
    if ha == 0 and hb == 0:
        return 1.0
    mi = sum(v / n * math.log(v * n / (a[x] * b[y])) for (x, y), v in joint.items())
    denom = (ha + hb) / 2
    return max(0.0, min(1.0, mi / denom)) if denom > 0 else 0.0
