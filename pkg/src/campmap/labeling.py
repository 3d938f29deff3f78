"""Binary user-campaign purchase labels from coverage sets and event logs.

A user-campaign pair gets label 1 iff the user purchased any covered pt
strictly after their earliest exposure and no later than exposure + window.
"""

import json
import math
from bisect import bisect_right
from dataclasses import dataclass

from .errors import UnknownCampaign, UnknownPt, UnsortedEvents

WEEK_MS = 7 * 24 * 60 * 60 * 1000


@dataclass(frozen=True)
class ExposureEvent:
    user_id: str
    campaign_id: str
    timestamp: int


@dataclass(frozen=True)
class PurchaseEvent:
    user_id: str
    pt_id: str
    timestamp: int


@dataclass(frozen=True)
class UserCampaignLabel:
    user_id: str
    campaign_id: str
    label: int
    matched_pt_ids: tuple[str, ...]


def load_exposures(path) -> list[ExposureEvent]:
    with open(path, encoding="utf-8") as fh:
        return [ExposureEvent(r["user_id"], r["campaign_id"], int(r["ts"]))
                for r in map(json.loads, filter(str.strip, fh))]


def load_purchases(path) -> list[PurchaseEvent]:
    with open(path, encoding="utf-8") as fh:
        return [PurchaseEvent(r["user_id"], r["pt_id"], int(r["ts"]))
                for r in map(json.loads, filter(str.strip, fh))]


def save_labels(labels, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for lab in labels:
            fh.write(json.dumps({
                "user_id": lab.user_id,
                "campaign_id": lab.campaign_id,
                "label": lab.label,
                "matched_pt_ids": list(lab.matched_pt_ids),
            }) + "\n")


def _validate_sorted(events) -> None:
    last: dict[str, int] = {}
    for ev in events:
        prev = last.get(ev.user_id)
        if prev is not None and ev.timestamp < prev:
            raise UnsortedEvents(ev.user_id)
        last[ev.user_id] = ev.timestamp


def build_labels(coverage: dict[str, set[str]],
                 exposures: list[ExposureEvent],
                 purchases: list[PurchaseEvent],
                 window_ms: float = WEEK_MS,
                 known_pt_ids: set[str] | None = None) -> list[UserCampaignLabel]:
    """One label per (user, campaign) pair, earliest exposure wins.

    A purchase matches when exposure.ts < purchase.ts <= exposure.ts + window
    and its pt is in the campaign's coverage. window_ms may be math.inf.
    Emission order is (user_id, campaign_id) lexicographic.
    """
    if window_ms <= 0:
        raise ValueError("window_ms must be positive")
    _validate_sorted(exposures)
    _validate_sorted(purchases)

    if known_pt_ids is not None:
        for p in purchases:
            if p.pt_id not in known_pt_ids:
                raise UnknownPt(p.pt_id)

    # earliest exposure per (user, campaign); per-user streams are sorted so
    # the first occurrence is the earliest
    first_exposure: dict[tuple[str, str], int] = {}
    for ev in exposures:
        if ev.campaign_id not in coverage:
            raise UnknownCampaign(ev.campaign_id)
        key = (ev.user_id, ev.campaign_id)
        if key not in first_exposure:
            first_exposure[key] = ev.timestamp

    # per-user purchase timeline for windowed lookup
    by_user: dict[str, list[tuple[int, str]]] = {}
    for p in purchases:
        by_user.setdefault(p.user_id, []).append((p.timestamp, p.pt_id))
    for timeline in by_user.values():
        timeline.sort(key=lambda t: t[0])

    labels = []
    for (user_id, campaign_id) in sorted(first_exposure):
        t0 = first_exposure[(user_id, campaign_id)]
        covered = coverage[campaign_id]
        timeline = by_user.get(user_id, [])
        times = [t for t, _ in timeline]
        lo = bisect_right(times, t0)  # strictly after exposure
        if math.isinf(window_ms):
            hi = len(timeline)
        else:
            hi = bisect_right(times, t0 + window_ms)  # boundary included
        matched = sorted({pt for _, pt in timeline[lo:hi] if pt in covered})
        labels.append(UserCampaignLabel(
            user_id=user_id, campaign_id=campaign_id,
            label=1 if matched else 0, matched_pt_ids=tuple(matched)))
    return labels


def coverage_lookup(coverages) -> dict[str, set[str]]:
    """Map campaign_id -> covered pt ids from a list of CoverageSets."""
    return {cov.campaign_id: cov.pt_ids() for cov in coverages}
