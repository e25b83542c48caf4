"""Per-community generation targets and global generator parameters."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from datetime import datetime, timezone
from pathlib import Path

PATTERNS = ("weak-broad", "strong-narrow", "none")

DEFAULT_PIVOT = datetime(2021, 11, 12, tzinfo=timezone.utc)


@dataclass(frozen=True)
class CommunitySpec:
    size: int
    follow_back_ratio: float
    automation_ratio: float
    intra_mutual_prob: float
    inter_edge_prob: float
    response_time_median_hours: float = 7.6
    age_median_years: float = 1.83
    engagement_median: int = 356
    retweet_ratio_mean: float = 0.37
    train_rides_mean: float = 0.0
    train_conducts_mean: float = 0.0
    coordination_pattern: str = "none"
    name: str = ""
    # share of members that only receive one-way edges from the core
    peripheral_fraction: float = 0.0
    # target edge reciprocity inside the community (below 1 needs a periphery)
    edge_reciprocity: float = 1.0
    # share of members in the identical-engagement core of a strong-narrow community
    coordination_core: float = 0.10

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("community size must be positive")
        for name in ("follow_back_ratio", "automation_ratio", "intra_mutual_prob", "inter_edge_prob",
                     "retweet_ratio_mean", "peripheral_fraction", "coordination_core"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie within [0, 1], got {v}")
        if self.intra_mutual_prob <= self.inter_edge_prob:
            raise ValueError("intra_mutual_prob must exceed inter_edge_prob")
        if self.coordination_pattern not in PATTERNS:
            raise ValueError(f"unknown coordination pattern {self.coordination_pattern!r}")
        if not 0.0 < self.edge_reciprocity <= 1.0:
            raise ValueError("edge_reciprocity must lie within (0, 1]")
        if self.edge_reciprocity < 1.0 and self.peripheral_fraction <= 0.0:
            raise ValueError("edge_reciprocity below 1 needs a peripheral_fraction")
        if self.peripheral_fraction >= 1.0:
            raise ValueError("peripheral_fraction must leave a core")
        if self.response_time_median_hours <= 1.0:
            raise ValueError("response_time_median_hours must exceed one hour")
        if self.age_median_years <= 0 or self.engagement_median < 0:
            raise ValueError("age and engagement medians must be positive")
        if self.train_rides_mean < 0 or self.train_conducts_mean < 0:
            raise ValueError("train means must be non-negative")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> CommunitySpec:
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown community spec fields: {sorted(unknown)}")
        return cls(**obj)


@dataclass(frozen=True)
class GroupProfile:
    """Median account statistics of one group (follow-back or other)."""
    followings: float
    follower_ratio: float  # median followers / followings
    statuses: float
    likes: float
    age_factor: float  # multiplies the community's age median
    engagement_factor: float  # multiplies the community's engagement median
    retweet_shift: float  # added to the community's retweet-ratio mean
    reciprocity: float  # mean Jaccard reciprocity target
    suspension: float


@dataclass(frozen=True)
class GeneratorParams:
    fb: GroupProfile = GroupProfile(3400, 3200 / 3400, 5500, 10400, 1.0, 1.0, 0.0, 0.83, 0.067)
    other: GroupProfile = GroupProfile(778, 785 / 778, 6100, 7600, 3.58 / 1.83, 141 / 356, 0.05, 0.48, 0.043)
    followings_sigma: float = 1.0
    ratio_sigma_fb: float = 0.15
    ratio_sigma_other: float = 0.5
    statuses_sigma: float = 0.7
    likes_sigma: float = 1.0
    age_sigma: float = 0.6
    engagement_sigma: float = 1.0
    reciprocity_concentration: float = 20.0
    deleted_rate: float = 0.01
    background_fb_ratio: float = 0.2
    background_automation: float = 0.44
    background_age_years: float = 1.83
    background_response_hours: float = 7.6
    tweets_per_account: float = 30.0
    empty_timeline_rate: float = 0.02
    # probability that a follow-back account's original tweet carries follow-back markers
    separation: float = 0.3
    marker_rate_other: float = 0.02
    external_contacts: bool = True
    stub_pool: int = 5000
    # in-corpus followers given to each follow-back account of the background sample
    seed_followers: int = 0
    unsolicited_rate: float = 0.02
    within_5min: float = 0.10
    within_1h: float = 0.22
    poll_seconds: int = 300

    def with_(self, **kw) -> GeneratorParams:
        return replace(self, **kw)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> GeneratorParams:
        obj = dict(obj)
        for g in ("fb", "other"):
            if g in obj and isinstance(obj[g], dict):
                obj[g] = GroupProfile(**obj[g])
        return cls(**obj)


# name, size, follow-back ratio, automation, response median (h), pattern, rides, conducts
_DEFAULT_TABLE = (
    ("TR", 420, 0.45, 0.61, 8.0, "weak-broad", 5.5, 0.8),
    ("JP", 380, 0.58, 0.48, 7.0, "weak-broad", 0.6, 0.1),
    ("US", 330, 0.35, 0.40, 5.0, "weak-broad", 4.0, 0.5),
    ("ID", 290, 0.40, 0.665, 9.0, "strong-narrow", 5.5, 1.0),
    ("IR", 260, 0.62, 0.28, 5.0, "strong-narrow", 0.8, 0.1),
    ("GR", 230, 0.12, 0.24, 10.0, "weak-broad", 0.3, 0.05),
    ("KR", 210, 0.10, 0.02, 6.0, "weak-broad", 0.2, 0.05),
    ("US-FR", 200, 0.14, 0.46, 9.0, "strong-narrow", 0.25, 0.5),
    ("ES", 180, 0.52, 0.40, 7.5, "strong-narrow", 2.2, 0.46),
    ("PK", 160, 0.42, 0.71, 4.0, "strong-narrow", 13.0, 1.5),
    ("RU", 150, 0.30, 0.69, 8.5, "strong-narrow", 0.5, 0.1),
    ("TH", 140, 0.11, 0.28, 8.0, "strong-narrow", 0.3, 0.05),
)

# at the default sizes every core rounds to between 7% and 13% of its community
_CORE_SHARES = {"ID": 0.08, "IR": 0.12, "US-FR": 0.09, "ES": 0.11, "PK": 0.125, "RU": 0.075, "TH": 0.10}


def default_specs(scale: float = 1.0, intra_degree: float = 20.0, inter_prob: float = 0.002
                  ) -> list[CommunitySpec]:
    """Twelve communities shaped after the reported community table.

    Sizes shrink with rank, follow-back ratios range from 0.62 down to 0.10, and
    the Thai-like community has a one-way periphery giving 0.56 edge reciprocity.
    """
    specs = []
    for name, size, ratio, auto, resp, pattern, rides, conducts in _DEFAULT_TABLE:
        n = max(2, int(round(size * scale)))
        thai = name == "TH"
        core = n - int(round(0.25 * n)) if thai else n
        specs.append(CommunitySpec(
            size=n,
            follow_back_ratio=ratio,
            automation_ratio=auto,
            intra_mutual_prob=min(0.9, intra_degree / max(core - 1, 1)),
            inter_edge_prob=inter_prob,
            response_time_median_hours=resp,
            # communities with more follow-back accounts are younger
            age_median_years=round(1.2 + 2.5 * (0.62 - ratio), 3),
            engagement_median=356,
            retweet_ratio_mean=0.37,
            train_rides_mean=rides,
            train_conducts_mean=conducts,
            coordination_pattern=pattern,
            name=name,
            peripheral_fraction=0.25 if thai else 0.0,
            edge_reciprocity=0.56 if thai else 1.0,
            coordination_core=_CORE_SHARES.get(name, 0.10),
        ))
    return specs


def save_specs(path, specs, params: GeneratorParams | None = None, background_accounts: int | None = None
               ) -> None:
    obj = {"communities": [s.to_json() for s in specs]}
    if params is not None:
        obj["params"] = params.to_json()
    if background_accounts is not None:
        obj["background_accounts"] = background_accounts
    Path(path).write_text(json.dumps(obj, indent=1), encoding="utf-8")


def load_specs(path) -> tuple[list[CommunitySpec], GeneratorParams, int | None]:
    """Read ``{"communities": [...], "params": {...}, "background_accounts": n}``
    (a bare list of community specs is accepted too)."""
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(obj, list):
        obj = {"communities": obj}
    specs = [CommunitySpec.from_json(o) for o in obj["communities"]]
    params = GeneratorParams.from_json(obj["params"]) if "params" in obj else GeneratorParams()
    return specs, params, obj.get("background_accounts")
