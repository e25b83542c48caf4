"""Synthetic follow-back corpora with planted communities."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from ..characterize import SECONDS_PER_YEAR
from ..graph import Account, Corpus, FollowGraph, LabelRecord, Tweet, write_corpus
from .delays import delay_model, observed
from .specs import DEFAULT_PIVOT, CommunitySpec, GeneratorParams, GroupProfile

BACKGROUND = "None"
MARKER_TAGS = ("followback", "teamfollowback", "f4f", "followtrain")
MARKER_WORDS = ("follow", "back", "gain", "followers", "mutual", "ifb")


@dataclass(frozen=True)
class Planted:
    """Generator ground truth: community of every account and latent dispositions."""
    assignment: dict[str, str]  # user -> community name ("None" for the background sample)
    follow_back: frozenset[str]
    automated: frozenset[str]
    coordination_core: frozenset[str]
    specs: tuple[CommunitySpec, ...]
    params: GeneratorParams
    background_accounts: int
    seed: int

    def groups(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for u, c in sorted(self.assignment.items()):
            out.setdefault(c, []).append(u)
        return out

    def spec(self, name: str) -> CommunitySpec | None:
        for s in self.specs:
            if s.name == name:
                return s
        return None

    def response_median(self, user: str) -> float:
        s = self.spec(self.assignment.get(user, BACKGROUND))
        return s.response_time_median_hours if s is not None else self.params.background_response_hours

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "background_accounts": self.background_accounts,
            "communities": [s.to_json() for s in self.specs],
            "params": self.params.to_json(),
            "assignment": dict(sorted(self.assignment.items())),
            "follow_back": sorted(self.follow_back),
            "automated": sorted(self.automated),
            "coordination_core": sorted(self.coordination_core),
        }

    @classmethod
    def from_json(cls, obj: dict) -> Planted:
        return cls(
            assignment=dict(obj["assignment"]),
            follow_back=frozenset(obj["follow_back"]),
            automated=frozenset(obj["automated"]),
            coordination_core=frozenset(obj.get("coordination_core", ())),
            specs=tuple(CommunitySpec.from_json(s) for s in obj["communities"]),
            params=GeneratorParams.from_json(obj["params"]),
            background_accounts=obj["background_accounts"],
            seed=obj["seed"],
        )

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), separators=(",", ":")), encoding="utf-8")

    @classmethod
    def load(cls, path) -> Planted:
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class SyntheticCorpus:
    corpus: Corpus
    planted: Planted

    def write(self, directory) -> dict[str, Path]:
        directory = Path(directory)
        paths = write_corpus(self.corpus, directory)
        paths["planted"] = directory / "planted.json"
        self.planted.dump(paths["planted"])
        return paths


def _lognormal(rng, median, sigma, size=None):
    return median * np.exp(sigma * rng.standard_normal(size))


def _beta_mean(rng, mean, concentration):
    mean = min(max(mean, 1e-3), 1 - 1e-3)
    return rng.beta(mean * concentration, (1 - mean) * concentration)


def _exact_subset(rng, items, k):
    k = int(min(max(k, 0), len(items)))
    if k == 0:
        return set()
    return set(rng.choice(np.asarray(items, dtype=object), k, replace=False).tolist())


def _zipf_index(rng, n, a=1.1, size=None):
    w = 1.0 / np.arange(1, n + 1) ** a
    return rng.choice(n, size=size, p=w / w.sum())


def _stable_int(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "little")


class _Builder:
    def __init__(self, specs, background_accounts, pivot, seed, params: GeneratorParams):
        if not specs:
            raise ValueError("at least one community spec is required")
        if sum(s.size for s in specs) + background_accounts < 2:
            raise ValueError("a corpus needs at least two accounts")
        if background_accounts < 0:
            raise ValueError("background_accounts must be non-negative")
        names = [s.name or f"C{i}" for i, s in enumerate(specs)]
        if len(set(names)) != len(names) or BACKGROUND in names:
            raise ValueError("community names must be unique and not 'None'")
        self.specs = tuple(s if s.name else CommunitySpec(**{**s.to_json(), "name": n})
                           for s, n in zip(specs, names))
        self.n_bg = background_accounts
        self.pivot = pivot
        self.seed = seed
        self.p = params
        self.rng = np.random.default_rng(seed)
        self.members: dict[str, list[str]] = {}
        self.assignment: dict[str, str] = {}
        self.fb: set[str] = set()
        self.automated: set[str] = set()
        self.core: set[str] = set()
        self.edges: set[tuple[str, str]] = set()
        self.screen: dict[str, str] = {}

    # ---- membership and labels -------------------------------------------------
    def assign(self):
        k = 0
        for s in self.specs:
            ids = [f"u{k + i:06d}" for i in range(s.size)]
            k += s.size
            self.members[s.name] = ids
            fb = _exact_subset(self.rng, ids, round(s.follow_back_ratio * s.size))
            self.fb |= fb
            self.automated |= _exact_subset(self.rng, sorted(fb), round(s.automation_ratio * len(fb)))
        bg = [f"u{k + i:06d}" for i in range(self.n_bg)]
        self.members[BACKGROUND] = bg
        fb = _exact_subset(self.rng, bg, round(self.p.background_fb_ratio * self.n_bg))
        self.fb |= fb
        self.automated |= _exact_subset(self.rng, sorted(fb), round(self.p.background_automation * len(fb)))
        for name, ids in self.members.items():
            for u in ids:
                self.assignment[u] = name
                self.screen[u] = f"{name.lower().replace('-', '')}_{u[1:]}" if name != BACKGROUND else f"acct_{u[1:]}"

    # ---- follow graph ----------------------------------------------------------
    def intra_edges(self):
        for s in self.specs:
            ids = self.members[s.name]
            n = len(ids)
            n_per = int(round(s.peripheral_fraction * n))
            core = ids[: n - n_per]
            periph = ids[n - n_per:]
            c = len(core)
            if c >= 2:
                upper = np.triu(self.rng.random((c, c)) < s.intra_mutual_prob, 1)
                deg = upper.sum(axis=0) + upper.sum(axis=1)
                for i in np.flatnonzero(deg == 0):
                    j = int(self.rng.integers(c - 1))
                    j = j + 1 if j >= i else j
                    upper[min(i, j), max(i, j)] = True
                iu, ju = np.nonzero(upper)
                for i, j in zip(iu.tolist(), ju.tolist()):
                    self.edges.add((core[i], core[j]))
                    self.edges.add((core[j], core[i]))
                mutual_pairs = len(iu)
            else:
                mutual_pairs = 0
            if periph:
                r = s.edge_reciprocity
                n_oneway = int(round(2 * mutual_pairs * (1 - r) / r)) if r < 1 else len(periph)
                n_oneway = max(len(periph), min(n_oneway, c * len(periph)))
                pairs = set()
                for pi, v in enumerate(periph):  # every peripheral member gets one edge
                    pairs.add((int(self.rng.integers(c)), pi))
                while len(pairs) < n_oneway:
                    pairs.add((int(self.rng.integers(c)), int(self.rng.integers(len(periph)))))
                for ci, pi in sorted(pairs):
                    self.edges.add((core[ci], periph[pi]))

    def inter_edges(self):
        comm = [u for s in self.specs for u in self.members[s.name]]
        for s in self.specs:
            src = self.members[s.name]
            others = [u for u in comm if self.assignment[u] != s.name]
            if not others:
                continue
            k = self.rng.binomial(len(src) * len(others), s.inter_edge_prob)
            a = self.rng.integers(len(src), size=k)
            b = self.rng.integers(len(others), size=k)
            for i, j in zip(a.tolist(), b.tolist()):
                u, v = src[i], others[j]
                if (v, u) not in self.edges:
                    self.edges.add((u, v))

    def seed_follower_edges(self):
        if self.p.seed_followers <= 0:
            return
        comm = [u for s in self.specs for u in self.members[s.name]]
        k = min(self.p.seed_followers, len(comm))
        for u in sorted(set(self.members[BACKGROUND]) & self.fb):
            for j in self.rng.choice(len(comm), k, replace=False).tolist():
                self.edges.add((comm[j], u))

    def external_edges(self):
        """Stub contacts that steer each account's Jaccard reciprocity to its target."""
        if not self.p.external_contacts:
            return []
        out: dict[str, set] = {}
        inc: dict[str, set] = {}
        for u, v in self.edges:
            out.setdefault(u, set()).add(v)
            inc.setdefault(v, set()).add(u)
        stub_edges = []
        pool = self.p.stub_pool
        for u in sorted(self.assignment):
            fo, fi = out.get(u, set()), inc.get(u, set())
            m = len(fo & fi)
            nm = len(fo | fi) - m
            g = self.p.fb if u in self.fb else self.p.other
            target = _beta_mean(self.rng, g.reciprocity, self.p.reciprocity_concentration)
            add_mutual = add_oneway = 0
            if m == 0:
                add_mutual = 5 + int(self.rng.poisson(10))
            m2 = m + add_mutual
            if m2 / (m2 + nm) > target:
                add_oneway = int(round(m2 / target - m2 - nm))
            else:
                add_mutual += max(0, int(round(target * nm / (1 - target) - m2)))
            total = add_mutual + add_oneway
            if total == 0:
                continue
            stubs = self.rng.choice(pool, size=min(total, pool), replace=False)
            for i, s in enumerate(stubs.tolist()):
                x = f"x{s:05d}"
                if i < add_mutual:
                    stub_edges += [(u, x), (x, u)]
                elif self.rng.random() < 0.5:
                    stub_edges.append((u, x))
                else:
                    stub_edges.append((x, u))
        return stub_edges

    # ---- accounts --------------------------------------------------------------
    def spec_of(self, u) -> CommunitySpec | None:
        name = self.assignment[u]
        for s in self.specs:
            if s.name == name:
                return s
        return None

    def follow_times(self):
        days = self.rng.uniform(1.0, 60.0, size=len(self.assignment))
        return {u: self.pivot - timedelta(seconds=int(d * 86400) // 300 * 300)
                for u, d in zip(sorted(self.assignment), days)}

    def accounts(self, graph: FollowGraph, followed_at, tweets):
        p = self.p
        accounts = {}
        for u in sorted(self.assignment):
            is_fb = u in self.fb
            g: GroupProfile = p.fb if is_fb else p.other
            s = self.spec_of(u)
            age_med = (s.age_median_years if s else p.background_age_years) * g.age_factor
            age = float(_lognormal(self.rng, age_med, p.age_sigma))
            latest = followed_at[u] - timedelta(days=7)
            if tweets.get(u):
                latest = min(latest, min(t.created_at for t in tweets[u]) - timedelta(days=1))
            created = min(self.pivot - timedelta(seconds=age * SECONDS_PER_YEAR), latest)
            created = created.replace(microsecond=0)
            followings = max(1, int(round(_lognormal(self.rng, g.followings, p.followings_sigma))))
            sigma_r = p.ratio_sigma_fb if is_fb else p.ratio_sigma_other
            followers = int(round(followings * _lognormal(self.rng, g.follower_ratio, sigma_r)))
            followers = max(followers, len(graph.followers(u)))
            followings = max(followings, len(graph.followings(u)))
            statuses = max(int(round(_lognormal(self.rng, g.statuses, p.statuses_sigma))), len(tweets.get(u, ())))
            likes = int(round(_lognormal(self.rng, g.likes, p.likes_sigma)))
            marker = p.separation if is_fb else p.marker_rate_other
            name_len = int(self.rng.integers(4, 16))
            desc = ""
            if self.rng.random() < 0.8:
                words = [f"w{int(i)}" for i in _zipf_index(self.rng, 200, size=int(self.rng.integers(2, 12)))]
                if self.rng.random() < marker:
                    words += list(self.rng.choice(MARKER_WORDS, 2, replace=False))
                desc = " ".join(words)
            accounts[u] = Account(
                id=u,
                screen_name=self.screen[u],
                name="n" * name_len,
                description=desc,
                location="somewhere" if self.rng.random() < 0.55 else "",
                url="https://example.org/" + u if self.rng.random() < (0.2 if is_fb else 0.35) else "",
                created_at=created,
                followers_count=followers,
                followings_count=followings,
                statuses_count=statuses,
                likes_count=likes,
                suspended=bool(self.rng.random() < g.suspension),
                deleted=bool(self.rng.random() < p.deleted_rate),
            )
        return accounts

    # ---- tweets ----------------------------------------------------------------
    def tweets(self, followed_at):
        p = self.p
        out: dict[str, list[Tweet]] = {u: [] for u in sorted(self.assignment)}
        if p.tweets_per_account <= 0:
            return out
        counter = [0]

        def tid():
            counter[0] += 1
            return f"t{counter[0]:08d}"

        group_handles = {name: [self.screen[u] for u in ids] for name, ids in self.members.items()}
        global_pool = 200_000
        for name, ids in self.members.items():
            s = self.spec_of(ids[0]) if ids else None
            pattern = s.coordination_pattern if s else "none"
            core = set()
            core_set = []
            if pattern == "strong-narrow" and len(ids) >= 2:
                k = max(2, int(round(s.coordination_core * len(ids))))
                core = _exact_subset(self.rng, ids, k)
                self.core |= core
                core_set = [f"e{name}_core{i}" for i in range(8)]
            rt_users = [f"p{name.lower()}{i}" for i in range(40)]
            for u in ids:
                is_fb = u in self.fb
                g = p.fb if is_fb else p.other
                n = 0 if self.rng.random() < p.empty_timeline_rate else int(min(200, self.rng.poisson(p.tweets_per_account)))
                if u in core:
                    n = max(n, len(core_set) + 2)
                rt_mean = (s.retweet_ratio_mean if s else 0.37) + g.retweet_shift
                p_rt = _beta_mean(self.rng, rt_mean, 10.0)
                n_rt = len(core_set) if u in core else int(self.rng.binomial(n, p_rt))
                if n > 0 and n_rt >= n:
                    n_rt = n - 1
                t_end = followed_at[u].timestamp()
                times = np.sort(t_end - self.rng.uniform(60, 120 * 86400, size=n))
                kinds = ["rt"] * n_rt + ["orig"] * (n - n_rt)
                kinds = [kinds[i] for i in self.rng.permutation(n)]
                if u in core:
                    engaged = list(core_set)
                elif pattern == "weak-broad":
                    engaged = [f"e{name}_{int(i)}" for i in _zipf_index(self.rng, 400, 1.05, size=n_rt)]
                else:
                    engaged = [f"g{int(i)}" for i in self.rng.integers(global_pool, size=n_rt)]
                marker = p.separation if is_fb else p.marker_rate_other
                texts = []
                for i, kind in enumerate(kinds):
                    when = datetime.fromtimestamp(int(times[i]), tz=self.pivot.tzinfo)
                    if kind == "rt":
                        eid = engaged.pop()
                        ru = rt_users[_stable_int(eid) % len(rt_users)]
                        out[u].append(Tweet(tid(), u, when, f"RT @{ru}: {eid} {name.lower()}w{_stable_int(eid) % 50}",
                                            is_retweet=True, retweeted_user_id=ru, engaged_tweet_id=eid))
                        continue
                    if texts and self.rng.random() < (0.15 if is_fb else 0.03):
                        text = texts[int(self.rng.integers(len(texts)))]
                    else:
                        words = [f"{name.lower()}w{int(i)}" for i in _zipf_index(self.rng, 300, size=int(self.rng.integers(4, 14)))]
                        if self.rng.random() < marker:
                            words += list(self.rng.choice(MARKER_WORDS, 3, replace=False))
                        text = " ".join(words)
                    texts.append(text)
                    tags = [f"{name.lower()}tag{int(i)}" for i in _zipf_index(self.rng, 60, size=int(self.rng.integers(0, 3)))]
                    if self.rng.random() < marker:
                        tags.append(str(self.rng.choice(MARKER_TAGS)))
                    handles = group_handles[name]
                    n_m = min(int(self.rng.poisson(0.4)), 3, len(handles))
                    mentions = tuple(dict.fromkeys(handles[int(j)] for j in self.rng.integers(len(handles), size=n_m)))
                    reply = bool(self.rng.random() < 0.1)
                    if reply and not mentions:
                        mentions = (handles[int(self.rng.integers(len(handles)))],)
                    quote = (not reply) and u not in core and bool(self.rng.random() < 0.03)
                    out[u].append(Tweet(
                        tid(), u, when, text, is_reply=reply, is_quote=quote,
                        mentions=mentions, hashtags=tuple(dict.fromkeys(tags)),
                        engaged_tweet_id=f"q{int(self.rng.integers(global_pool))}" if quote else None,
                    ))
            self._trains(name, ids, s, out, tid, followed_at)
        for u in out:
            self._engagement(u, out[u])
        return out

    def _trains(self, name, ids, s, out, tid, followed_at):
        if s is None or s.train_conducts_mean <= 0 or len(ids) < 2:
            return
        n_trains = int(round(s.train_conducts_mean * len(ids)))
        if n_trains == 0:
            return
        weight = np.array([4.0 if u in self.fb else 1.0 for u in ids])
        conductors = self.rng.choice(len(ids), size=n_trains, p=weight / weight.sum())
        rides_total = int(round(s.train_rides_mean * len(ids)))
        per = np.full(n_trains, rides_total // n_trains)
        per[self.rng.choice(n_trains, rides_total % n_trains, replace=False)] += 1
        ride_w = np.array([3.0 if u in self.fb else 1.0 for u in ids])
        spill = 0
        pad = 0
        for k in range(n_trains):
            c = int(conductors[k])
            want = int(per[k]) + spill
            take = min(want, len(ids) - 1)
            spill = want - take
            w = ride_w.copy()
            w[c] = 0.0
            riders = self.rng.choice(len(ids), size=take, replace=False, p=w / w.sum()) if take else []
            handles = [self.screen[ids[int(r)]] for r in riders]
            while len(handles) < 5:
                pad += 1
                handles.append(f"ext{name.lower().replace('-', '')}{pad}")
            u = ids[c]
            when = followed_at[u] - timedelta(seconds=int(self.rng.uniform(60, 90 * 86400)))
            text = "follow train " + " ".join("@" + h for h in handles)
            out[u].append(Tweet(tid(), u, when.replace(microsecond=0), text, mentions=tuple(handles),
                                hashtags=("followtrain",)))
        out_sorted = {}
        for u in ids:
            out_sorted[u] = sorted(out[u], key=lambda t: (t.created_at, t.id))
        out.update(out_sorted)

    def _engagement(self, u, tweets):
        """Spread the account's received likes and retweets over its original tweets."""
        if not tweets:
            return
        s = self.spec_of(u)
        g = self.p.fb if u in self.fb else self.p.other
        median = (s.engagement_median if s else 356) * g.engagement_factor
        total = int(round(_lognormal(self.rng, median, self.p.engagement_sigma)))
        orig = [i for i, t in enumerate(tweets) if not t.is_retweet]
        if not orig or total == 0:
            return
        share = self.rng.multinomial(total, np.full(len(orig), 1.0 / len(orig)))
        for i, e in zip(orig, share.tolist()):
            rts = int(self.rng.binomial(e, 0.25))
            t = tweets[i]
            tweets[i] = Tweet(t.id, t.user_id, t.created_at, t.text, t.is_retweet, t.is_reply, t.is_quote,
                              t.retweeted_user_id, t.mentions, t.hashtags, e - rts, rts, t.engaged_tweet_id)

    # ---- labels ----------------------------------------------------------------
    def labels(self, followed_at):
        p = self.p
        labels = {}
        for u in sorted(self.assignment):
            bg = self.assignment[u] == BACKGROUND
            sample = "random" if bg else "snowball"
            if u not in self.fb:
                labels[u] = LabelRecord(u, False, followed_at=followed_at[u], sample=sample)
                continue
            if self.rng.random() < p.unsolicited_rate:
                labels[u] = LabelRecord(u, True, None, True, u in self.automated,
                                        followed_at=followed_at[u], sample=sample)
                continue
            s = self.spec_of(u)
            model = delay_model(s.response_time_median_hours if s else p.background_response_hours,
                                p.within_5min, p.within_1h)
            delay = model.sample(self.rng)
            rt = int(observed(delay, p.poll_seconds))
            labels[u] = LabelRecord(u, True, rt, False, u in self.automated,
                                    followed_at=followed_at[u], sample=sample)
        return labels

    def build(self) -> SyntheticCorpus:
        self.assign()
        self.intra_edges()
        self.inter_edges()
        self.seed_follower_edges()
        stub_edges = self.external_edges()
        internal = sorted(self.edges)
        nodes = sorted(self.assignment)
        stubs = sorted({x for e in stub_edges for x in e if x not in self.assignment})
        graph = FollowGraph(nodes + stubs, internal + sorted(stub_edges), external=stubs)
        followed_at = self.follow_times()
        tweets = self.tweets(followed_at)
        accounts = self.accounts(graph, followed_at, tweets)
        labels = self.labels(followed_at)
        corpus = Corpus(accounts, graph, {u: tuple(t) for u, t in tweets.items() if t}, labels)
        planted = Planted(dict(self.assignment), frozenset(self.fb), frozenset(self.automated),
                          frozenset(self.core), self.specs, self.p, self.n_bg, self.seed)
        return SyntheticCorpus(corpus, planted)


def generate(specs: list[CommunitySpec], background_accounts: int = 250, pivot: datetime = DEFAULT_PIVOT,
             seed: int = 42, params: GeneratorParams | None = None) -> SyntheticCorpus:
    """Build a corpus (accounts, follow graph, tweets, labels) plus its planted truth.

    Community members follow each other mutually, communities are linked by
    sparse one-way edges, and the background sample has no in-corpus edges
    (optionally followed by community members, see ``seed_followers``).
    """
    return _Builder(specs, background_accounts, pivot, seed, params or GeneratorParams()).build()
