"""Follow trains, automation and suspension tallies."""

from __future__ import annotations

from collections import Counter
from collections.abc import Mapping
from dataclasses import dataclass

from .community import Partition, automation_ratio
from .graph import Account, Corpus, LabelRecord, Tweet

MIN_HANDLES = 5


def _handle(h: str) -> str:
    return h.lstrip("@").casefold()


def is_follow_train(tweet: Tweet, min_handles: int = MIN_HANDLES) -> bool:
    """A non-reply tweet listing at least ``min_handles`` distinct handles."""
    if tweet.is_reply:
        return False
    return len({_handle(h) for h in tweet.mentions}) >= min_handles


@dataclass(frozen=True)
class TrainStats:
    user_id: str
    conducts: int
    rides: int


def train_stats(corpus: Corpus, partition: Partition, min_handles: int = MIN_HANDLES):
    """Per-user conducts/rides and per-community means.

    Returns ``(per_user, per_community)`` where ``per_community`` maps a
    community id to ``{"mean_conducts", "mean_rides"}``.
    """
    handles = corpus.handle_index
    conducts: Counter = Counter()
    rides: Counter = Counter()
    for tw in corpus.all_tweets():
        if tw.is_retweet or not is_follow_train(tw, min_handles):
            continue
        conducts[tw.user_id] += 1
        for h in {_handle(m) for m in tw.mentions}:
            uid = handles.get(h)
            if uid is not None:
                rides[uid] += 1
    per_user = {
        uid: TrainStats(uid, conducts[uid], rides[uid]) for uid in sorted(corpus.accounts)
    }
    per_comm = {}
    for cid, members in sorted(partition.groups().items()):
        n = len(members)
        per_comm[cid] = {
            "mean_conducts": sum(conducts[u] for u in members) / n if n else 0.0,
            "mean_rides": sum(rides[u] for u in members) / n if n else 0.0,
        }
    return per_user, per_comm


def _rate(num: int, den: int) -> float | None:
    return num / den if den else None


def suspension_stats(accounts: Mapping[str, Account], labels: Mapping[str, LabelRecord],
                     partition: Partition) -> dict:
    """Suspension/deletion tallies and the follow-back vs random-sample rate ratio.

    The baseline is the non-follow-back part of the random sample, taken from
    the ``sample`` field of labels when present and otherwise from the pooled
    "None" community.
    """
    def tally(ids):
        ids = [u for u in ids if u in accounts]
        return {
            "n": len(ids),
            "suspended": sum(accounts[u].suspended for u in ids),
            "deleted": sum(accounts[u].deleted for u in ids),
        }

    fb = [u for u, r in labels.items() if r.followed_back]
    automated = [u for u, r in labels.items() if r.followed_back and r.followed_dnfb]
    none_id = partition.none_id
    community_non_fb = [u for u, c in partition.assignment.items()
                        if c != none_id and not (u in labels and labels[u].followed_back)]
    if any(r.sample is not None for r in labels.values()):
        baseline = [u for u, r in labels.items() if r.sample == "random" and not r.followed_back]
    else:
        baseline = [u for u, c in partition.assignment.items()
                    if c == none_id and not (u in labels and labels[u].followed_back)]
    groups = {
        "overall": tally(list(accounts)),
        "follow_back": tally(fb),
        "automated_follow_back": tally(automated),
        "community_non_follow_back": tally(community_non_fb),
        "random_baseline": tally(baseline),
    }
    for g in groups.values():
        g["suspension_rate"] = _rate(g["suspended"], g["n"])
    fb_rate = groups["follow_back"]["suspension_rate"]
    base_rate = groups["random_baseline"]["suspension_rate"]
    ratio = fb_rate / base_rate if fb_rate is not None and base_rate else None
    return {"groups": groups, "follow_back_vs_baseline": ratio}


def abuse_report(corpus: Corpus, partition: Partition, min_handles: int = MIN_HANDLES) -> dict:
    _, trains = train_stats(corpus, partition, min_handles)
    auto = automation_ratio(partition, corpus.labels)
    return {
        "communities": [
            {
                "id": c.community_id,
                "label": c.label,
                "automation_ratio": auto.get(c.community_id),
                "mean_rides": trains[c.community_id]["mean_rides"],
                "mean_conducts": trains[c.community_id]["mean_conducts"],
            }
            for c in partition.communities
        ],
        "suspensions": suspension_stats(corpus.accounts, corpus.labels, partition),
    }
