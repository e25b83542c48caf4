"""Discrete-event simulation of the honeypot follow protocol.

Honeypots follow target accounts under a rolling daily limit and poll their
followers at a fixed interval. An account follows back when its latent
disposition says so, after a delay drawn from its community's delay model;
the follow-back is seen at the first poll after it happens.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from ..graph import Corpus, LabelRecord, format_time
from .delays import delay_model, observed
from .generator import BACKGROUND, Planted, SyntheticCorpus, generate
from .specs import DEFAULT_PIVOT, CommunitySpec, GeneratorParams, default_specs

STRATEGIES = ("random", "snowball", "ratio_filter", "dnfb_pass")
DAY = 86400


@dataclass(frozen=True)
class HoneypotConfig:
    honeypots: int = 5
    daily_limit: int = 400
    poll_seconds: int = 300
    # probability that an account without the follow-back disposition still follows back
    epsilon: float = 0.01
    # probability that a follow-back account responds to a given follow
    follow_back_prob: float = 1.0
    # chance that a follow-back account the protocol never followed follows a honeypot anyway
    unsolicited_prob: float = 0.002
    snowball_seeds: int = 15
    ratio_band: tuple[float, float] = (0.95, 1.0)
    start: datetime = DEFAULT_PIVOT - timedelta(days=500)

    def __post_init__(self):
        if self.honeypots < 1 or self.daily_limit < 1 or self.poll_seconds < 1:
            raise ValueError("honeypots, daily_limit and poll_seconds must be positive")
        if not 0 <= self.epsilon <= 1 or not 0 <= self.follow_back_prob <= 1:
            raise ValueError("probabilities must lie within [0, 1]")


@dataclass
class StageResult:
    strategy: str
    follows: int
    follow_backs: int
    unsolicited: int

    @property
    def rate(self) -> float:
        return self.follow_backs / self.follows if self.follows else 0.0

    def to_json(self) -> dict:
        return {"strategy": self.strategy, "follows": self.follows, "follow_backs": self.follow_backs,
                "rate": self.rate, "unsolicited": self.unsolicited}


@dataclass
class Event:
    time: datetime
    honeypot: int
    kind: str  # follow, follow_back, unsolicited, dnfb_follow, dnfb_follow_back
    user: str
    strategy: str

    def to_json(self) -> dict:
        return {"time": format_time(self.time), "honeypot": self.honeypot, "kind": self.kind,
                "user": self.user, "strategy": self.strategy}


class HoneypotSimulator:
    """Stateful simulator: stages share the clock, rate-limit windows and labels."""

    def __init__(self, corpus: Corpus, planted: Planted, config: HoneypotConfig = HoneypotConfig(),
                 seed: int = 42):
        self.corpus = corpus
        self.planted = planted
        self.config = config
        self.rng = np.random.default_rng(seed)
        users = sorted(planted.assignment)
        # latent dispositions are fixed once per simulator
        draws = self.rng.random(len(users))
        self.disposition = {
            u: bool((u in planted.follow_back and d < config.follow_back_prob)
                    or (u not in planted.follow_back and d < config.epsilon))
            for u, d in zip(users, draws)
        }
        self.followed: set[str] = set()
        self.labels: dict[str, LabelRecord] = {}
        self.events: list[Event] = []
        self.stages: list[StageResult] = []
        # per-honeypot follow counters drive the schedule
        self._count = [0] * config.honeypots
        self._next_hp = 0

    # ---- scheduling ------------------------------------------------------------
    def _slot(self) -> tuple[int, datetime]:
        """Next (honeypot, time) with at most ``daily_limit`` follows per honeypot in any
        closed 24-hour window; follows land on poll ticks."""
        cfg = self.config
        hp = self._next_hp
        self._next_hp = (hp + 1) % cfg.honeypots
        j = self._count[hp]
        self._count[hp] += 1
        ticks_per_day = DAY // cfg.poll_seconds
        tick = (j * (ticks_per_day + 1)) // cfg.daily_limit
        return hp, cfg.start + timedelta(seconds=tick * cfg.poll_seconds)

    def _delay(self, user: str) -> int:
        p = self.planted.params
        model = delay_model(self.planted.response_median(user), p.within_5min, p.within_1h)
        return int(observed(model.sample(self.rng), self.config.poll_seconds))

    def _follow(self, users, strategy: str) -> StageResult:
        backs = 0
        for u in users:
            hp, t = self._slot()
            self.followed.add(u)
            self.events.append(Event(t, hp, "follow", u, strategy))
            if self.disposition[u]:
                rt = self._delay(u)
                backs += 1
                self.events.append(Event(t + timedelta(seconds=rt), hp, "follow_back", u, strategy))
                self.labels[u] = LabelRecord(u, True, rt, False, None, followed_at=t, sample=strategy)
            else:
                self.labels[u] = LabelRecord(u, False, followed_at=t, sample=strategy)
        unsolicited = self._unsolicited(strategy)
        result = StageResult(strategy, len(users), backs, unsolicited)
        self.stages.append(result)
        return result

    def _unsolicited(self, strategy: str) -> int:
        cand = sorted(u for u in self.planted.follow_back
                      if u not in self.followed and u not in self.labels and self.disposition[u])
        if not cand or self.config.unsolicited_prob <= 0:
            return 0
        hits = [u for u, d in zip(cand, self.rng.random(len(cand))) if d < self.config.unsolicited_prob]
        t = self.events[-1].time if self.events else self.config.start
        for u in hits:
            hp = int(self.rng.integers(self.config.honeypots))
            self.events.append(Event(t, hp, "unsolicited", u, strategy))
            self.labels[u] = LabelRecord(u, True, None, True, None, followed_at=t, sample=strategy)
        return len(hits)

    def _pick(self, pool, budget):
        pool = sorted(u for u in set(pool) if u not in self.followed and u not in self.labels)
        if budget > len(pool):
            raise ValueError(f"budget {budget} exceeds the {len(pool)} eligible targets")
        idx = self.rng.choice(len(pool), budget, replace=False)
        return [pool[i] for i in sorted(idx.tolist())]

    # ---- strategies ------------------------------------------------------------
    def positives(self) -> list[str]:
        return sorted(u for u, r in self.labels.items() if r.followed_back)

    def run(self, strategy: str, budget: int | None = None) -> StageResult:
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {strategy!r}")
        if strategy == "dnfb_pass":
            return self._dnfb()
        if budget is None or budget < 1:
            raise ValueError("budget must be at least 1")
        if strategy == "random":
            pool = [u for u, c in self.planted.assignment.items() if c == BACKGROUND]
            return self._follow(self._pick(pool, budget), strategy)
        if strategy == "snowball":
            graph = self.corpus.graph
            seeds = [u for u in self.positives() if u in graph and graph.followers(u)]
            if not seeds:
                raise ValueError("snowball needs discovered follow-back accounts with followers")
            k = min(self.config.snowball_seeds, len(seeds))
            chosen = [seeds[i] for i in sorted(self.rng.choice(len(seeds), k, replace=False).tolist())]
            pool = set()
            for s in chosen:
                pool |= {f for f in graph.followers(s) if f in self.planted.assignment}
            return self._follow(self._pick(pool, budget), strategy)
        lo, hi = self.config.ratio_band
        pool = []
        for u, c in self.planted.assignment.items():
            if c == BACKGROUND:
                continue
            acc = self.corpus.accounts[u]
            if acc.followings_count > 0 and lo <= acc.followers_count / acc.followings_count <= hi:
                pool.append(u)
        return self._follow(self._pick(pool, budget), strategy)

    def _dnfb(self) -> StageResult:
        """Re-follow every positive from the warning accounts; only automated accounts respond."""
        backs = 0
        targets = self.positives()
        for u in targets:
            hp, t = self._slot()
            self.events.append(Event(t, hp, "dnfb_follow", u, "dnfb_pass"))
            auto = u in self.planted.automated and self.disposition[u]
            if auto:
                backs += 1
                self.events.append(Event(t + timedelta(seconds=self._delay(u)), hp, "dnfb_follow_back", u,
                                         "dnfb_pass"))
            r = self.labels[u]
            self.labels[u] = LabelRecord(u, True, r.response_time, r.unsolicited, auto,
                                         followed_at=r.followed_at, sample=r.sample)
        result = StageResult("dnfb_pass", len(targets), backs, 0)
        self.stages.append(result)
        return result

    # ---- outputs ---------------------------------------------------------------
    def response_quantiles(self, cutoffs=(300, 3600)) -> dict[int, float]:
        times = [r.response_time for r in self.labels.values() if r.response_time is not None]
        if not times:
            return {c: 0.0 for c in cutoffs}
        arr = np.asarray(times)
        return {c: float(np.mean(arr <= c)) for c in cutoffs}

    def max_follows_in_window(self, window: int = DAY) -> int:
        """Largest number of follows by one honeypot within any closed window of ``window`` seconds."""
        worst = 0
        by_hp: dict[int, list[float]] = {}
        for e in self.events:
            if e.kind in ("follow", "dnfb_follow"):
                by_hp.setdefault(e.honeypot, []).append(e.time.timestamp())
        for times in by_hp.values():
            times.sort()
            q: deque = deque()
            for t in times:
                q.append(t)
                while q[0] < t - window:
                    q.popleft()
                worst = max(worst, len(q))
        return worst

    def write(self, directory) -> dict[str, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = {"labels": directory / "labels.jsonl", "log": directory / "follow_log.jsonl",
                 "summary": directory / "honeypot.json"}
        with open(paths["labels"], "w", encoding="utf-8") as fh:
            for u in sorted(self.labels):
                fh.write(json.dumps(self.labels[u].to_json(), separators=(",", ":")) + "\n")
        with open(paths["log"], "w", encoding="utf-8") as fh:
            for e in self.events:
                fh.write(json.dumps(e.to_json(), separators=(",", ":")) + "\n")
        q = self.response_quantiles()
        summary = {"stages": [s.to_json() for s in self.stages],
                   "within_5min": q[300], "within_1h": q[3600],
                   "max_follows_per_day": self.max_follows_in_window()}
        paths["summary"].write_text(json.dumps(summary, indent=1), encoding="utf-8")
        return paths


# ---- calibrated honeypot world -----------------------------------------------


def _band_prob(lo, hi, median, sigma):
    a = (math.log(lo) - math.log(median)) / sigma
    b = (math.log(hi) - math.log(median)) / sigma
    return float(ndtr(b) - ndtr(a))


@dataclass(frozen=True)
class WorldTargets:
    random_rate: float = 0.0334
    snowball_rate: float = 0.36
    ratio_filter_rate: float = 0.399
    dnfb_rate: float = 0.44
    background: int = 6000
    scale: float = 4.0
    seed_followers: int = 400
    ratio_sigma_fb: float = 0.03
    expected_positive_purity: float = 0.968


def honeypot_world(seed: int = 42, targets: WorldTargets = WorldTargets(),
                   config: HoneypotConfig = HoneypotConfig()) -> SyntheticCorpus:
    """A large, tweet-free corpus calibrated so the four strategies hit their target rates.

    * background follow-back share s.t. s + (1 - s) * epsilon = random rate;
    * community follow-back ratios rescaled so their size-weighted mean f gives
      f + (1 - f) * epsilon = snowball rate (seed followers are drawn uniformly
      from all community members);
    * follower/followings ratios log-normal around the band centre, the wider
      spread for other accounts solved so the in-band follow-back rate matches;
    * automation share = DNFB rate / expected share of true follow-back accounts
      among positives.
    """
    eps = config.epsilon
    base = default_specs(scale=targets.scale, intra_degree=4.0, inter_prob=0.0002)
    sizes = np.array([s.size for s in base], dtype=float)
    ratios = np.array([s.follow_back_ratio for s in base])
    f_target = (targets.snowball_rate - eps) / (1 - eps)
    ratios = ratios * f_target / (np.dot(sizes, ratios) / sizes.sum())
    auto = min(1.0, targets.dnfb_rate / targets.expected_positive_purity)
    specs = [CommunitySpec(**{**s.to_json(), "follow_back_ratio": float(r), "automation_ratio": auto,
                              "train_rides_mean": 0.0, "train_conducts_mean": 0.0})
             for s, r in zip(base, ratios)]
    lo, hi = config.ratio_band
    centre = math.sqrt(lo * hi)
    f = f_target
    p_fb = _band_prob(lo, hi, centre, targets.ratio_sigma_fb)
    # in-band rate: f p_fb + (1 - f) p_o eps over f p_fb + (1 - f) p_o
    rate = targets.ratio_filter_rate
    p_other = f * p_fb * (1 - rate) / ((1 - f) * (rate - eps))
    sigma_other = brentq(lambda s: _band_prob(lo, hi, centre, s) - p_other, 1e-4, 10.0)
    bg_ratio = (targets.random_rate - eps) / (1 - eps)
    base_params = GeneratorParams()
    params = base_params.with_(
        fb=base_params.fb.__class__(**{**base_params.fb.__dict__, "follower_ratio": centre}),
        other=base_params.other.__class__(**{**base_params.other.__dict__, "follower_ratio": centre}),
        ratio_sigma_fb=targets.ratio_sigma_fb,
        ratio_sigma_other=float(sigma_other),
        followings_sigma=0.3,
        background_fb_ratio=bg_ratio,
        background_automation=auto,
        tweets_per_account=0.0,
        external_contacts=False,
        seed_followers=targets.seed_followers,
    )
    return generate(specs, targets.background, DEFAULT_PIVOT, seed, params)


def run_protocol(world: SyntheticCorpus, budgets: dict[str, int] | None = None, seed: int = 42,
                 config: HoneypotConfig = HoneypotConfig()) -> HoneypotSimulator:
    """Random, snowball, ratio-filter and DNFB stages in order."""
    budgets = budgets or {"random": 4246, "snowball": 3577, "ratio_filter": 2969}
    sim = HoneypotSimulator(world.corpus, world.planted, config, seed)
    for strategy in ("random", "snowball", "ratio_filter"):
        if budgets.get(strategy):
            sim.run(strategy, budgets[strategy])
    sim.run("dnfb_pass")
    return sim
