"""Core data model: accounts, tweets, honeypot labels and the follow graph.

Corpus files are line-oriented (JSONL for records, CSV for edges) and are
written back in the same canonical form they are read in, so a load/write
cycle of a conforming corpus is byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from types import MappingProxyType

log = logging.getLogger(__name__)

TIME_FORMAT = "%Y-%m-%dT%H:%M:%SZ"


class CorpusError(ValueError):
    """Raised for malformed or inconsistent corpus files."""


def parse_time(value: str) -> datetime:
    return datetime.strptime(value, TIME_FORMAT).replace(tzinfo=timezone.utc)


def format_time(value: datetime) -> str:
    return value.astimezone(timezone.utc).strftime(TIME_FORMAT)


@dataclass(frozen=True)
class Account:
    id: str
    screen_name: str
    name: str
    description: str
    location: str
    url: str
    created_at: datetime
    followers_count: int
    followings_count: int
    statuses_count: int
    likes_count: int
    suspended: bool = False
    deleted: bool = False

    def __post_init__(self):
        for name in ("followers_count", "followings_count", "statuses_count", "likes_count"):
            if getattr(self, name) < 0:
                raise ValueError(f"account {self.id}: {name} must be non-negative")

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "screen_name": self.screen_name,
            "name": self.name,
            "description": self.description,
            "location": self.location,
            "url": self.url,
            "created_at": format_time(self.created_at),
            "followers_count": self.followers_count,
            "followings_count": self.followings_count,
            "statuses_count": self.statuses_count,
            "likes_count": self.likes_count,
            "suspended": self.suspended,
            "deleted": self.deleted,
        }

    @classmethod
    def from_json(cls, obj: dict) -> Account:
        return cls(
            id=str(obj["id"]),
            screen_name=obj["screen_name"],
            name=obj["name"],
            description=obj.get("description") or "",
            location=obj.get("location") or "",
            url=obj.get("url") or "",
            created_at=parse_time(obj["created_at"]),
            followers_count=int(obj["followers_count"]),
            followings_count=int(obj["followings_count"]),
            statuses_count=int(obj["statuses_count"]),
            likes_count=int(obj["likes_count"]),
            suspended=bool(obj.get("suspended", False)),
            deleted=bool(obj.get("deleted", False)),
        )


@dataclass(frozen=True)
class Tweet:
    id: str
    user_id: str
    created_at: datetime
    text: str
    is_retweet: bool = False
    is_reply: bool = False
    is_quote: bool = False
    retweeted_user_id: str | None = None
    mentions: tuple[str, ...] = ()
    hashtags: tuple[str, ...] = ()
    like_count: int = 0
    retweet_count: int = 0
    # id of the retweeted/quoted tweet; optional extension of the tweet schema
    engaged_tweet_id: str | None = None

    def __post_init__(self):
        if self.is_retweet and self.retweeted_user_id is None:
            raise ValueError(f"tweet {self.id}: retweet without retweeted_user_id")
        if self.is_retweet and self.is_reply:
            raise ValueError(f"tweet {self.id}: cannot be both retweet and reply")

    def to_json(self) -> dict:
        obj = {
            "id": self.id,
            "user_id": self.user_id,
            "created_at": format_time(self.created_at),
            "text": self.text,
            "is_retweet": self.is_retweet,
            "is_reply": self.is_reply,
            "is_quote": self.is_quote,
            "retweeted_user_id": self.retweeted_user_id,
            "mentions": list(self.mentions),
            "hashtags": list(self.hashtags),
            "like_count": self.like_count,
            "retweet_count": self.retweet_count,
        }
        if self.engaged_tweet_id is not None:
            obj["engaged_tweet_id"] = self.engaged_tweet_id
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> Tweet:
        rt_user = obj.get("retweeted_user_id")
        engaged = obj.get("engaged_tweet_id")
        return cls(
            id=str(obj["id"]),
            user_id=str(obj["user_id"]),
            created_at=parse_time(obj["created_at"]),
            text=obj.get("text") or "",
            is_retweet=bool(obj.get("is_retweet", False)),
            is_reply=bool(obj.get("is_reply", False)),
            is_quote=bool(obj.get("is_quote", False)),
            retweeted_user_id=None if rt_user is None else str(rt_user),
            mentions=tuple(obj.get("mentions") or ()),
            hashtags=tuple(obj.get("hashtags") or ()),
            like_count=int(obj.get("like_count", 0)),
            retweet_count=int(obj.get("retweet_count", 0)),
            engaged_tweet_id=None if engaged is None else str(engaged),
        )


@dataclass(frozen=True)
class LabelRecord:
    """Honeypot outcome for one account.

    ``followed_at`` and ``sample`` are optional extensions: the time the
    honeypot sent its follow, and which sampling strategy reached the account.
    """

    user_id: str
    followed_back: bool
    response_time: int | None = None  # seconds
    unsolicited: bool = False
    followed_dnfb: bool | None = None
    followed_at: datetime | None = None
    sample: str | None = None

    def __post_init__(self):
        if self.response_time is not None:
            if self.response_time < 0:
                raise ValueError(f"label {self.user_id}: negative response_time")
            if not self.followed_back or self.unsolicited:
                raise ValueError(
                    f"label {self.user_id}: response_time requires a solicited follow back"
                )
        if self.followed_dnfb is not None and not self.followed_back:
            raise ValueError(f"label {self.user_id}: followed_dnfb set without follow back")

    @property
    def automated(self) -> bool:
        return bool(self.followed_dnfb)

    def to_json(self) -> dict:
        obj = {
            "user_id": self.user_id,
            "followed_back": self.followed_back,
            "response_time": self.response_time,
            "unsolicited": self.unsolicited,
            "followed_dnfb": self.followed_dnfb,
        }
        if self.followed_at is not None:
            obj["followed_at"] = format_time(self.followed_at)
        if self.sample is not None:
            obj["sample"] = self.sample
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> LabelRecord:
        rt = obj.get("response_time")
        dnfb = obj.get("followed_dnfb")
        at = obj.get("followed_at")
        return cls(
            user_id=str(obj["user_id"]),
            followed_back=bool(obj["followed_back"]),
            response_time=None if rt is None else int(rt),
            unsolicited=bool(obj.get("unsolicited", False)),
            followed_dnfb=None if dnfb is None else bool(dnfb),
            followed_at=None if at is None else parse_time(at),
            sample=obj.get("sample"),
        )


class FollowGraph:
    """Directed follow relation: an edge ``(src, dst)`` means src follows dst.

    Nodes flagged external are stubs referenced by edges but absent from the
    account table. Instances are treated as immutable once built.
    """

    def __init__(self, nodes: Iterable[str], edges: Iterable[tuple[str, str]],
                 external: Iterable[str] = ()):
        node_list = list(dict.fromkeys(nodes))
        node_set = set(node_list)
        succ: dict[str, set[str]] = {n: set() for n in node_list}
        pred: dict[str, set[str]] = {n: set() for n in node_list}
        edge_list = []
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop on {u!r}")
            if u not in node_set or v not in node_set:
                raise ValueError(f"edge ({u!r}, {v!r}) has an endpoint outside the node set")
            if v in succ[u]:
                continue
            succ[u].add(v)
            pred[v].add(u)
            edge_list.append((u, v))
        self._nodes = tuple(node_list)
        self._edges = tuple(edge_list)
        self._succ = succ
        self._pred = pred
        self.external = frozenset(external) & node_set

    @property
    def nodes(self) -> tuple[str, ...]:
        return self._nodes

    @property
    def edges(self) -> tuple[tuple[str, str], ...]:
        return self._edges

    def __contains__(self, node) -> bool:
        return node in self._succ

    def __len__(self) -> int:
        return len(self._nodes)

    def followings(self, node: str) -> set[str]:
        return self._succ[node]

    def followers(self, node: str) -> set[str]:
        return self._pred[node]

    def has_edge(self, u: str, v: str) -> bool:
        return u in self._succ and v in self._succ[u]

    def internal(self) -> FollowGraph:
        """Subgraph induced by the non-external nodes."""
        if not self.external:
            return self
        keep = [n for n in self._nodes if n not in self.external]
        return self.subgraph(keep)

    def subgraph(self, nodes: Iterable[str]) -> FollowGraph:
        keep = [n for n in dict.fromkeys(nodes) if n in self._succ]
        keep_set = set(keep)
        edges = [(u, v) for u, v in self._edges if u in keep_set and v in keep_set]
        return FollowGraph(keep, edges, self.external & keep_set)

    def undirected_weights(self) -> dict[tuple[str, str], int]:
        """Undirected projection: weight 2 for mutual pairs, 1 for one-way edges.

        Keys are ``(a, b)`` with ``a < b``.
        """
        weights: dict[tuple[str, str], int] = {}
        for u, v in self._edges:
            key = (u, v) if u < v else (v, u)
            weights[key] = weights.get(key, 0) + 1
        return weights


def edge_reciprocity(graph: FollowGraph) -> float:
    """Fraction of directed edges whose reverse edge is also present."""
    if not graph.edges:
        raise ValueError("edge reciprocity is undefined on empty graph")
    mutual = sum(1 for u, v in graph.edges if graph.has_edge(v, u))
    return mutual / len(graph.edges)


def user_reciprocity(user: str, graph: FollowGraph) -> float:
    """Jaccard coefficient of the user's followings and followers (0 if isolated)."""
    if user not in graph:
        raise KeyError(f"unknown user {user!r}")
    out, inc = graph.followings(user), graph.followers(user)
    union = len(out | inc)
    if union == 0:
        return 0.0
    return len(out & inc) / union


@dataclass(frozen=True)
class Corpus:
    accounts: Mapping[str, Account]
    graph: FollowGraph
    tweets: Mapping[str, tuple[Tweet, ...]] = field(default_factory=dict)
    labels: Mapping[str, LabelRecord] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "accounts", MappingProxyType(dict(self.accounts)))
        object.__setattr__(self, "tweets", MappingProxyType(dict(self.tweets)))
        object.__setattr__(self, "labels", MappingProxyType(dict(self.labels)))

    def tweets_of(self, user: str) -> tuple[Tweet, ...]:
        return self.tweets.get(user, ())

    def all_tweets(self) -> Iterable[Tweet]:
        for user in self.tweets:
            yield from self.tweets[user]

    @property
    def handle_index(self) -> dict[str, str]:
        """Case-folded screen name -> account id."""
        return {a.screen_name.casefold(): a.id for a in self.accounts.values()}


def _read_jsonl(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None


def _require(path) -> Path:
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"{path}: no such file")
    return path


def load_accounts(path) -> dict[str, Account]:
    path = _require(path)
    accounts: dict[str, Account] = {}
    for lineno, obj in _read_jsonl(path):
        try:
            acc = Account.from_json(obj)
        except (KeyError, TypeError, ValueError) as exc:
            raise CorpusError(f"{path}:{lineno}: invalid account ({exc})") from None
        if acc.id in accounts:
            raise CorpusError(f"{path}:{lineno}: duplicate account id {acc.id!r}")
        accounts[acc.id] = acc
    return accounts


def load_edges(path) -> list[tuple[str, str]]:
    path = _require(path)
    edges = []
    seen = set()
    duplicates = 0
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["src", "dst"]:
            raise CorpusError(f"{path}:1: expected header 'src,dst'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2 or not row[0] or not row[1]:
                raise CorpusError(f"{path}:{lineno}: expected two fields 'src,dst'")
            if row[0] == row[1]:
                raise CorpusError(f"{path}:{lineno}: self-loop on {row[0]!r}")
            edge = (row[0], row[1])
            if edge in seen:
                duplicates += 1
                continue
            seen.add(edge)
            edges.append(edge)
    if duplicates:
        log.info("%s: dropped %d duplicate edges", path, duplicates)
    return edges


def load_tweets(path) -> dict[str, tuple[Tweet, ...]]:
    path = _require(path)
    by_user: dict[str, list[Tweet]] = {}
    for lineno, obj in _read_jsonl(path):
        try:
            tw = Tweet.from_json(obj)
        except (KeyError, TypeError, ValueError) as exc:
            raise CorpusError(f"{path}:{lineno}: invalid tweet ({exc})") from None
        by_user.setdefault(tw.user_id, []).append(tw)
    return {u: tuple(ts) for u, ts in by_user.items()}


def load_labels(path) -> dict[str, LabelRecord]:
    path = _require(path)
    labels: dict[str, LabelRecord] = {}
    for lineno, obj in _read_jsonl(path):
        try:
            rec = LabelRecord.from_json(obj)
        except (KeyError, TypeError, ValueError) as exc:
            raise CorpusError(f"{path}:{lineno}: invalid label ({exc})") from None
        if rec.user_id in labels:
            raise CorpusError(f"{path}:{lineno}: duplicate label for {rec.user_id!r}")
        labels[rec.user_id] = rec
    return labels


def load_corpus(accounts_path, edges_path, tweets_path=None, labels_path=None) -> Corpus:
    accounts = load_accounts(accounts_path)
    edges = load_edges(edges_path)
    nodes = list(accounts)
    external = []
    known = set(nodes)
    for u, v in edges:
        for n in (u, v):
            if n not in known:
                known.add(n)
                nodes.append(n)
                external.append(n)
    if external:
        log.info("%d edge endpoints are not in the account table; added as external stubs",
                 len(external))
    graph = FollowGraph(nodes, edges, external)
    tweets = load_tweets(tweets_path) if tweets_path else {}
    labels = load_labels(labels_path) if labels_path else {}
    return Corpus(accounts, graph, tweets, labels)


def _dump(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def write_jsonl(path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(_dump(rec))
            fh.write("\n")


def write_edges(path, edges: Iterable[tuple[str, str]]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["src", "dst"])
    writer.writerows(edges)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def write_corpus(corpus: Corpus, directory) -> dict[str, Path]:
    """Write the four corpus files into ``directory`` and return their paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "accounts": directory / "accounts.jsonl",
        "edges": directory / "edges.csv",
        "tweets": directory / "tweets.jsonl",
        "labels": directory / "labels.jsonl",
    }
    write_jsonl(paths["accounts"], (a.to_json() for a in corpus.accounts.values()))
    write_edges(paths["edges"], corpus.graph.edges)
    write_jsonl(paths["tweets"], (t.to_json() for t in corpus.all_tweets()))
    write_jsonl(paths["labels"], (r.to_json() for r in corpus.labels.values()))
    return paths
