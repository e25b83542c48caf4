"""Coordination curves from TF-IDF user vectors over engaged tweets.

Each user is a TF-IDF vector over the tweets it retweeted or quoted. Pairs of
users are linked by cosine similarity and, for a grid of thresholds, we
measure how much of the community sits in the giant component of the
thresholded similarity network.
"""

from __future__ import annotations

import hashlib
import math
from collections import Counter, defaultdict
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .graph import Tweet

ENGAGEMENT_KINDS = ("retweet", "quote")


@dataclass(frozen=True)
class UserVector:
    user_id: str
    weights: Mapping[str, float]


@dataclass(frozen=True)
class SimilarityNetwork:
    nodes: tuple[str, ...]
    weights: np.ndarray  # symmetric, zero diagonal; entries below the floor are zeroed
    mask: np.ndarray  # True where an edge exists

    def edges(self) -> list[tuple[str, str, float]]:
        iu, ju = np.nonzero(np.triu(self.mask, 1))
        return [(self.nodes[i], self.nodes[j], float(self.weights[i, j])) for i, j in zip(iu, ju)]


@dataclass(frozen=True)
class CoordinationCurve:
    community_id: int
    points: tuple[tuple[float, float], ...]

    def ratio_at(self, threshold: float) -> float:
        for t, r in self.points:
            if math.isclose(t, threshold, abs_tol=1e-9):
                return r
        raise KeyError(threshold)


def engagement_key(tweet: Tweet) -> str | None:
    """Identity of the tweet being retweeted or quoted.

    Falls back to a digest of the retweet text when the corpus does not carry
    the engaged tweet id.
    """
    if tweet.engaged_tweet_id is not None:
        return tweet.engaged_tweet_id
    digest = hashlib.blake2b(f"{tweet.retweeted_user_id}\x00{tweet.text}".encode(), digest_size=8)
    return "h:" + digest.hexdigest()


def engagements_from_tweets(tweets: Mapping[str, Iterable[Tweet]], users: Iterable[str],
                            kinds: Sequence[str] = ENGAGEMENT_KINDS) -> list[tuple[str, str]]:
    pairs = []
    for u in users:
        for tw in tweets.get(u, ()):
            if (tw.is_retweet and "retweet" in kinds) or (tw.is_quote and "quote" in kinds):
                key = engagement_key(tw)
                if key is not None:
                    pairs.append((u, key))
    return pairs


def build_user_vectors(engagements: Iterable[tuple[str, str]]) -> list[UserVector]:
    """tf = engagement count, idf = ln(N_users / users engaging the tweet)."""
    tf: dict[str, Counter] = defaultdict(Counter)
    for user, tweet_id in engagements:
        tf[user][tweet_id] += 1
    n_users = len(tf)
    df: Counter = Counter()
    for counts in tf.values():
        df.update(counts.keys())
    vectors = []
    for user in sorted(tf):
        weights = {t: c * math.log(n_users / df[t]) for t, c in sorted(tf[user].items())}
        weights = {t: w for t, w in weights.items() if w > 0}
        if weights:
            vectors.append(UserVector(user, weights))
    return vectors


def _dense(vectors: Sequence[UserVector]) -> np.ndarray:
    terms = sorted({t for v in vectors for t in v.weights})
    col = {t: j for j, t in enumerate(terms)}
    mat = np.zeros((len(vectors), len(terms)))
    for i, v in enumerate(vectors):
        for t, w in v.weights.items():
            mat[i, col[t]] = w
    return mat


def cosine_matrix(vectors: Sequence[UserVector]) -> np.ndarray:
    if not vectors:
        return np.zeros((0, 0))
    mat = _dense(vectors)
    norms = np.linalg.norm(mat, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    unit = mat / safe[:, None]
    sim = unit @ unit.T
    sim[norms == 0, :] = 0.0
    sim[:, norms == 0] = 0.0
    sim = np.clip(sim, 0.0, 1.0)
    # identical vectors must survive a threshold of exactly 1
    sim[np.abs(sim - 1.0) <= 1e-12] = 1.0
    np.fill_diagonal(sim, 0.0)
    return sim


def similarity_network(vectors: Sequence[UserVector], floor: float = 0.0) -> SimilarityNetwork:
    if not 0.0 <= floor <= 1.0:
        raise ValueError("floor must be within [0, 1]")
    sim = cosine_matrix(vectors)
    mask = sim >= floor
    np.fill_diagonal(mask, False)
    return SimilarityNetwork(tuple(v.user_id for v in vectors), np.where(mask, sim, 0.0), mask)


def default_thresholds(step: float = 0.05) -> list[float]:
    n = int(round(1.0 / step))
    return [round(i * step, 10) for i in range(n + 1)]


def giant_component(mask: np.ndarray, nodes: Sequence[str]) -> list[int]:
    """Indices of the largest connected component; ties go to the smallest min node id."""
    if len(nodes) == 0:
        return []
    ncomp, labels = connected_components(csr_matrix(mask), directed=False)
    best_key, best = None, []
    for c in range(ncomp):
        idx = np.flatnonzero(labels == c)
        key = (-len(idx), min(nodes[i] for i in idx))
        if best_key is None or key < best_key:
            best_key, best = key, idx.tolist()
    return best


def threshold_sweep(network: SimilarityNetwork, thresholds: Sequence[float],
                    community_size: int | None = None, community_id: int = 0,
                    denominator: str = "community") -> CoordinationCurve:
    """Share of users inside (or linked to) the giant component per threshold.

    ``denominator="community"`` divides by the community size (users without
    engagements count as uncoordinated); ``"network"`` divides by the number
    of vectorised users.
    """
    n = len(network.nodes)
    size = community_size if community_size is not None else n
    if denominator == "network":
        size = n
    if size == 0:
        raise ValueError("threshold sweep on an empty node set")
    ts = list(thresholds)
    if any(not 0.0 <= t <= 1.0 for t in ts):
        raise ValueError("thresholds must lie within [0, 1]")
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValueError("thresholds must be strictly increasing")
    points = []
    for t in ts:
        if n == 0:
            points.append((t, 0.0))
            continue
        mask = network.mask & (network.weights >= t)
        gc = giant_component(mask, network.nodes)
        in_gc = np.zeros(n, dtype=bool)
        in_gc[gc] = True
        linked = in_gc | mask[:, in_gc].any(axis=1)
        points.append((t, float(linked.sum()) / size))
    return CoordinationCurve(community_id, tuple(points))


def coordination_curves(partition, tweets: Mapping[str, Iterable[Tweet]],
                        thresholds: Sequence[float] | None = None, floor: float = 0.0,
                        kinds: Sequence[str] = ENGAGEMENT_KINDS, denominator: str = "community",
                        include_none: bool = False) -> dict[int, CoordinationCurve]:
    thresholds = thresholds if thresholds is not None else default_thresholds()
    curves = {}
    for c in partition.communities:
        if c.is_none and not include_none:
            continue
        members = sorted(partition.members(c.community_id))
        vectors = build_user_vectors(engagements_from_tweets(tweets, members, kinds))
        net = similarity_network(vectors, floor)
        curves[c.community_id] = threshold_sweep(net, thresholds, community_size=len(members),
                                                 community_id=c.community_id,
                                                 denominator=denominator)
    return curves
