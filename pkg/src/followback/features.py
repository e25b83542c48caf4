"""Per-account feature families and their assembly into a design matrix."""

from __future__ import annotations

import csv
import hashlib
import json
import re
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from datetime import datetime
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import centrality
from .characterize import SECONDS_PER_YEAR
from .graph import Account, Corpus, FollowGraph, Tweet, user_reciprocity

FAMILIES = ("profile", "tweets", "ego", "network", "embedding", "combined")

PROFILE_COLUMNS = (
    "age_years", "statuses_count", "followers_count", "followings_count", "likes_count",
    "name_length", "screen_name_length", "description_length", "has_location", "has_url",
)

TWEET_COLUMNS = (
    "time_since_last_tweet", "n_multi_mention_tweets", "mean_inter_tweet_gap",
    "n_duplicate_texts", "n_retweets", "pct_retweets", "n_replies", "pct_replies",
    "n_quotes", "pct_quotes", "mean_hashtags", "sd_hashtags", "mean_mentions",
    "sd_mentions", "mean_likes_received", "sd_likes_received", "missing_timeline",
)

EGO_COLUMNS = ("reciprocal_to_followers", "reciprocal_to_followings", "jaccard_reciprocity")

NETWORK_COLUMNS = (
    "in_degree", "out_degree", "degree_centrality_in", "degree_centrality_out",
    "closeness_centrality", "betweenness_centrality", "eccentricity", "node_reciprocity",
    "clustering_coefficient", "pagerank", "hub_score", "authority_score", "in_clique",
    "in_giant_component",
)


@dataclass(frozen=True)
class FeatureMatrix:
    user_ids: tuple[str, ...]
    family: str
    columns: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown feature family {self.family!r}")
        if len(set(self.columns)) != len(self.columns):
            raise ValueError("duplicate column names")
        vals = np.asarray(self.values, dtype=float).reshape(len(self.user_ids), len(self.columns))
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "user_ids", tuple(self.user_ids))
        object.__setattr__(self, "columns", tuple(self.columns))

    @property
    def shape(self):
        return self.values.shape

    def rows(self, user_ids: Sequence[str]) -> np.ndarray:
        index = {u: i for i, u in enumerate(self.user_ids)}
        return np.array([index[u] for u in user_ids], dtype=int)

    def select(self, user_ids: Sequence[str]) -> FeatureMatrix:
        return FeatureMatrix(tuple(user_ids), self.family, self.columns,
                             self.values[self.rows(user_ids)])

    def to_csv(self, path) -> None:
        path = Path(path)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["user_id", *self.columns])
            for uid, row in zip(self.user_ids, self.values):
                w.writerow([uid, *(repr(float(v)) for v in row)])
        meta = {"family": self.family, "columns": list(self.columns), "rows": len(self.user_ids)}
        path.with_suffix(".meta.json").write_text(json.dumps(meta, indent=1), encoding="utf-8")

    @classmethod
    def from_csv(cls, path) -> FeatureMatrix:
        path = Path(path)
        meta = json.loads(path.with_suffix(".meta.json").read_text(encoding="utf-8"))
        with open(path, encoding="utf-8", newline="") as fh:
            r = csv.reader(fh)
            header = next(r)
            ids, rows = [], []
            for row in r:
                ids.append(row[0])
                rows.append([float(v) for v in row[1:]])
        values = np.array(rows, dtype=float).reshape(len(ids), len(header) - 1)
        return cls(tuple(ids), meta["family"], tuple(header[1:]), values)


def profile_features(account: Account, pivot: datetime) -> np.ndarray:
    age = (pivot - account.created_at).total_seconds() / SECONDS_PER_YEAR
    return np.array([
        age,
        account.statuses_count,
        account.followers_count,
        account.followings_count,
        account.likes_count,
        len(account.name),
        len(account.screen_name),
        len(account.description),
        1.0 if account.location else 0.0,
        1.0 if account.url else 0.0,
    ], dtype=float)


def tweet_features(tweets: Sequence[Tweet], follow_time: datetime) -> np.ndarray:
    """Timeline statistics; time quantities are in hours."""
    if not tweets:
        out = np.zeros(len(TWEET_COLUMNS))
        out[-1] = 1.0
        return out
    n = len(tweets)
    times = sorted(t.created_at.timestamp() for t in tweets)
    since_last = (follow_time.timestamp() - times[-1]) / 3600.0
    gaps = np.diff(times) / 3600.0
    mean_gap = float(gaps.mean()) if len(gaps) else 0.0
    text_counts = Counter(t.text for t in tweets)
    duplicates = sum(c for c in text_counts.values() if c > 1)
    n_rt = sum(t.is_retweet for t in tweets)
    n_reply = sum(t.is_reply for t in tweets)
    n_quote = sum(t.is_quote for t in tweets)
    tags = np.array([len(t.hashtags) for t in tweets], dtype=float)
    ments = np.array([len(t.mentions) for t in tweets], dtype=float)
    likes = np.array([t.like_count for t in tweets], dtype=float)
    multi = sum(1 for t in tweets if len(t.mentions) >= 2)
    return np.array([
        since_last, multi, mean_gap, duplicates,
        n_rt, n_rt / n, n_reply, n_reply / n, n_quote, n_quote / n,
        tags.mean(), tags.std(), ments.mean(), ments.std(), likes.mean(), likes.std(),
        0.0,
    ], dtype=float)


_TOKEN = re.compile(r"\w+", re.UNICODE)


@lru_cache(maxsize=200_000)
def _token_slot(token: str, dim: int) -> tuple[int, float]:
    h = int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "little")
    return h % dim, (1.0 if (h >> 63) & 1 == 0 else -1.0)


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def text_embedding(tweets: Sequence[Tweet], dim: int = 256) -> np.ndarray:
    """Signed feature hashing of lower-cased unigrams, L2-normalised."""
    if dim < 8:
        raise ValueError("embedding dimension must be >= 8")
    vec = np.zeros(dim)
    for t in tweets:
        for tok in tokenize(t.text):
            slot, sign = _token_slot(tok, dim)
            vec[slot] += sign
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0 else vec


def ego_features(user: str, graph: FollowGraph) -> np.ndarray:
    if user not in graph:
        raise KeyError(f"unknown user {user!r}")
    followers = graph.followers(user)
    followings = graph.followings(user)
    mutual = len(followers & followings)
    return np.array([
        mutual / len(followers) if followers else 0.0,
        mutual / len(followings) if followings else 0.0,
        user_reciprocity(user, graph),
    ])


def network_features(graph: FollowGraph) -> FeatureMatrix:
    """Structural statistics for every node of ``graph`` (in node order)."""
    if len(graph) == 0:
        raise ValueError("network features need a non-empty graph")
    a, nodes = centrality.adjacency(graph)
    u = centrality.undirected(a)
    n = len(nodes)
    indeg = np.asarray(a.sum(axis=0)).ravel()
    outdeg = np.asarray(a.sum(axis=1)).ravel()
    scale = 1.0 / (n - 1) if n > 1 else 0.0
    between, close, ecc = centrality.shortest_path_stats(u)
    hubs, auths = centrality.hits(a)
    cols = np.column_stack([
        indeg, outdeg, indeg * scale, outdeg * scale, close, between, ecc,
        centrality.node_reciprocity(a), centrality.clustering(u), centrality.pagerank(a),
        hubs, auths, centrality.in_mutual_triangle(a).astype(float),
        centrality.giant_component_mask(u, nodes).astype(float),
    ])
    return FeatureMatrix(tuple(nodes), "network", NETWORK_COLUMNS, cols)


def _follow_time(corpus: Corpus, uid: str, default: datetime) -> datetime:
    rec = corpus.labels.get(uid)
    if rec is not None and rec.followed_at is not None:
        return rec.followed_at
    return default


def build_family(corpus: Corpus, family: str, user_ids: Sequence[str], pivot: datetime,
                 embed_dim: int = 256, network: FeatureMatrix | None = None,
                 embeddings: Mapping[str, np.ndarray] | None = None) -> FeatureMatrix:
    """Feature matrix of one family for ``user_ids``.

    The tweets family carries the hashed text embedding as ``text_*`` columns
    when ``embed_dim`` > 0; the embedding family holds node2vec vectors.
    """
    ids = tuple(user_ids)
    if family == "profile":
        vals = [profile_features(corpus.accounts[u], pivot) for u in ids]
        return FeatureMatrix(ids, family, PROFILE_COLUMNS, np.array(vals).reshape(len(ids), -1))
    if family == "tweets":
        cols = list(TWEET_COLUMNS)
        if embed_dim:
            cols += [f"text_{i}" for i in range(embed_dim)]
        vals = []
        for u in ids:
            tw = corpus.tweets_of(u)
            row = tweet_features(tw, _follow_time(corpus, u, pivot))
            if embed_dim:
                row = np.concatenate([row, text_embedding(tw, embed_dim)])
            vals.append(row)
        return FeatureMatrix(ids, family, tuple(cols), np.array(vals).reshape(len(ids), -1))
    if family == "ego":
        vals = [ego_features(u, corpus.graph) if u in corpus.graph else np.zeros(3) for u in ids]
        return FeatureMatrix(ids, family, EGO_COLUMNS, np.array(vals).reshape(len(ids), -1))
    if family == "network":
        net = network if network is not None else network_features(corpus.graph.internal())
        index = {u: i for i, u in enumerate(net.user_ids)}
        vals = np.zeros((len(ids), len(net.columns)))
        for r, u in enumerate(ids):
            if u in index:
                vals[r] = net.values[index[u]]
        return FeatureMatrix(ids, family, net.columns, vals)
    if family == "embedding":
        if embeddings is None:
            raise ValueError("embedding family needs node embeddings")
        dim = len(next(iter(embeddings.values())))
        vals = np.array([embeddings.get(u, np.zeros(dim)) for u in ids]).reshape(len(ids), dim)
        return FeatureMatrix(ids, family, tuple(f"n2v_{i}" for i in range(dim)), vals)
    raise ValueError(f"unknown feature family {family!r}")


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, values: np.ndarray) -> Standardizer:
        """Column means and deviations; constant columns keep scale 1."""
        mean = values.mean(axis=0)
        sd = values.std(axis=0)
        return cls(mean, np.where(sd > 0, sd, 1.0))

    def transform(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean) / self.scale


def assemble(matrices: Iterable[FeatureMatrix], families: Iterable[str] | None = None,
             train_ids: Sequence[str] | None = None) -> FeatureMatrix:
    """Concatenate feature families column-wise and z-score every column.

    Means and deviations come from ``train_ids`` only (all rows when omitted);
    constant columns are centred but not rescaled. Column names are prefixed
    with their family.
    """
    mats = list(matrices)
    if families is not None:
        wanted = set(families)
        mats = [m for m in mats if m.family in wanted]
    if not mats:
        raise ValueError("nothing to assemble")
    ids = mats[0].user_ids
    for m in mats[1:]:
        if m.user_ids != ids:
            raise ValueError(f"user order of family {m.family!r} does not match {mats[0].family!r}")
    cols = tuple(f"{m.family}.{c}" for m in mats for c in m.columns)
    values = np.hstack([m.values for m in mats])
    if not np.isfinite(values).all():
        values = np.where(np.isfinite(values), values, 0.0)
    fit = values if train_ids is None else values[mats[0].rows(train_ids)]
    scaler = Standardizer.fit(fit)
    return FeatureMatrix(ids, "combined", cols, scaler.transform(values))
