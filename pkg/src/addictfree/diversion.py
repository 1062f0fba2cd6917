"""Diversion notifications: interest-matched nearby places on fence entry and
pre-relapse warnings scheduled 10 minutes before the predicted peak hour.

The engine keeps per-user rate-limit and idempotency state; the queue is a
thread-safe priority queue drained by a single dispatcher.
"""

from __future__ import annotations

import csv
import heapq
import threading
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timedelta, timezone
from enum import Enum
from typing import Callable, Optional, Sequence

from .domain import GeoPoint, InterestTheme, UserProfile
from .geo import FenceEvent, FenceEventKind, Geofence, haversine_m

DIVERSION_RADIUS_M = 2000.0
FENCE_NOTIFY_COOLDOWN_S = 3600.0
PRE_RELAPSE_LEAD_S = 600.0
NOTIFICATION_VALIDITY_S = 3600.0

MOTIVATIONAL_QUOTES = (
    "One hour at a time still adds up to years.",
    "Cravings pass; the progress you protect today stays.",
    "You have gotten through every hard hour so far.",
    "A short walk now is a win you can count tonight.",
    "Recovery is built from ordinary moments like this one.",
)


class NotificationKind(str, Enum):
    FENCE_ENTRY_DIVERSION = "fence-entry-diversion"
    PRE_RELAPSE_DIVERSION = "pre-relapse-diversion"
    DWELL_VIOLATION = "dwell-violation"
    MOTIVATIONAL = "motivational"
    FEEDBACK_REQUEST = "feedback-request"


@dataclass(frozen=True)
class PointOfInterest:
    poi_id: str
    name: str
    location: GeoPoint
    theme: InterestTheme
    open: bool = True

    def to_dict(self) -> dict:
        return {
            "poi_id": self.poi_id,
            "name": self.name,
            "location": self.location.to_dict(),
            "theme": self.theme.value,
            "open": self.open,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PointOfInterest":
        return cls(
            poi_id=d["poi_id"],
            name=d["name"],
            location=GeoPoint.from_dict(d["location"]),
            theme=InterestTheme(d["theme"]),
            open=bool(d.get("open", True)),
        )


@dataclass(frozen=True)
class Notification:
    notif_id: str
    user_id: str
    kind: NotificationKind
    body: str
    scheduled_for: datetime
    recommendation: Optional[PointOfInterest] = None
    delivered_at: Optional[datetime] = None
    reason: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.delivered_at is not None and self.delivered_at < self.scheduled_for:
            raise ValueError("delivered_at must be >= scheduled_for")

    def to_dict(self) -> dict:
        return {
            "notif_id": self.notif_id,
            "user_id": self.user_id,
            "kind": self.kind.value,
            "body": self.body,
            "scheduled_for": self.scheduled_for.isoformat(),
            "recommendation": self.recommendation.to_dict() if self.recommendation else None,
            "delivered_at": self.delivered_at.isoformat() if self.delivered_at else None,
            "reason": self.reason,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Notification":
        return cls(
            notif_id=d["notif_id"],
            user_id=d["user_id"],
            kind=NotificationKind(d["kind"]),
            body=d["body"],
            scheduled_for=datetime.fromisoformat(d["scheduled_for"]),
            recommendation=PointOfInterest.from_dict(d["recommendation"]) if d.get("recommendation") else None,
            delivered_at=datetime.fromisoformat(d["delivered_at"]) if d.get("delivered_at") else None,
            reason=d.get("reason", {}),
        )


def load_pois_csv(text: str) -> list[PointOfInterest]:
    """Parse the POI import format: poi_id,name,lat,lon,theme,open."""
    pois = []
    for row in csv.DictReader(text.splitlines()):
        pois.append(
            PointOfInterest(
                poi_id=row["poi_id"],
                name=row["name"],
                location=GeoPoint(float(row["lat"]), float(row["lon"])),
                theme=InterestTheme(row["theme"]),
                open=row.get("open", "true").strip().lower() in ("1", "true", "yes"),
            )
        )
    return pois


def recommend_diversion(
    user: UserProfile, at: GeoPoint, pois: Sequence[PointOfInterest]
) -> Optional[PointOfInterest]:
    """Nearest open POI within 2,000 m whose theme matches a user interest;
    distance ties break on lexicographic poi_id. None when nothing matches."""
    themes = {tag.theme for tag in user.interests}
    best: Optional[tuple[float, str, PointOfInterest]] = None
    for poi in pois:
        if not poi.open or poi.theme not in themes:
            continue
        d = haversine_m(at, poi.location)
        if d > DIVERSION_RADIUS_M:
            continue
        key = (d, poi.poi_id)
        if best is None or key < (best[0], best[1]):
            best = (d, poi.poi_id, poi)
    return best[2] if best else None


class NotificationEngine:
    """Builds notifications from fence events, predictions and the daily
    cadence. Stateful: rate limits and idempotency are per engine instance."""

    def __init__(self, now_fn: Callable[[], datetime]):
        self._now = now_fn
        self._last_fence_notif: dict[tuple[str, str], datetime] = {}
        self._feedback_issued: dict[tuple[str, date], Notification] = {}
        self._quote_issued: dict[tuple[str, date], Notification] = {}

    def on_fence_event(
        self,
        ev: FenceEvent,
        user: UserProfile,
        pois: Sequence[PointOfInterest],
        fence: Optional[Geofence] = None,
    ) -> Optional[Notification]:
        """Entered -> fence-entry diversion (rate-limited to one per fence per
        hour); DwellViolation -> dwell-violation notice; anything else -> None."""
        if ev.kind is FenceEventKind.ENTERED:
            key = (user.user_id, ev.fence_id)
            last = self._last_fence_notif.get(key)
            if last is not None and (ev.at - last).total_seconds() < FENCE_NOTIFY_COOLDOWN_S:
                return None
            self._last_fence_notif[key] = ev.at
            center = fence.center if fence else None
            rec = recommend_diversion(user, center, pois) if center else None
            label = fence.label if fence and fence.label else ev.fence_id
            body = f"You are in {label}, one of your risk zones."
            if rec is not None:
                body += f" How about {rec.name} instead? It is close by."
            return Notification(
                notif_id=f"fence-{user.user_id}-{ev.fence_id}-{int(ev.at.timestamp())}",
                user_id=user.user_id,
                kind=NotificationKind.FENCE_ENTRY_DIVERSION,
                body=body,
                scheduled_for=ev.at,
                recommendation=rec,
                reason={"fence_id": ev.fence_id, "valid_for_s": NOTIFICATION_VALIDITY_S},
            )
        if ev.kind is FenceEventKind.DWELL_VIOLATION:
            return Notification(
                notif_id=f"dwell-{user.user_id}-{ev.fence_id}-{int(ev.at.timestamp())}",
                user_id=user.user_id,
                kind=NotificationKind.DWELL_VIOLATION,
                body="You have stayed in a risk zone longer than planned. Time to move on?",
                scheduled_for=ev.at,
                reason={"fence_id": ev.fence_id},
            )
        return None

    def schedule_prerelapse(
        self,
        predictions: Sequence[tuple[datetime, float]],
        threshold: float,
        user: UserProfile,
    ) -> Optional[Notification]:
        """Warn 10 minutes before the highest-probability hour, if it clears
        the threshold and the warning moment has not already passed."""
        if not predictions:
            raise ValueError("predictions must be non-empty")
        if not (0.0 < threshold < 1.0):
            raise ValueError("threshold must be in (0, 1)")
        # highest probability; ties go to the earliest hour
        peak_start, peak_p = min(predictions, key=lambda hp: (-hp[1], hp[0]))
        if peak_p < threshold:
            return None
        now = self._now()
        if peak_start < now:
            return None
        scheduled = peak_start - timedelta(seconds=PRE_RELAPSE_LEAD_S)
        if scheduled < now:
            return None
        activities = ", ".join(t.subcategory or t.theme.value for t in user.interests[:3])
        body = "A craving is likely in the next hour."
        if activities:
            body += f" Maybe: {activities}?"
        return Notification(
            notif_id=f"pre-{user.user_id}-{int(peak_start.timestamp())}",
            user_id=user.user_id,
            kind=NotificationKind.PRE_RELAPSE_DIVERSION,
            body=body,
            scheduled_for=scheduled,
            reason={
                "peak_hour_start": peak_start.isoformat(),
                "probability": peak_p,
                "valid_for_s": NOTIFICATION_VALIDITY_S,
            },
        )

    def daily_feedback_request(self, user: UserProfile, day: date) -> Notification:
        """Survey prompt at user-local 21:00; idempotent per (user, day)."""
        key = (user.user_id, day)
        existing = self._feedback_issued.get(key)
        if existing is not None:
            return existing
        local_nine_pm = datetime(day.year, day.month, day.day, 21, 0, tzinfo=timezone.utc)
        scheduled = local_nine_pm - timedelta(minutes=user.utc_offset_minutes)
        notif = Notification(
            notif_id=f"fb-{user.user_id}-{day.isoformat()}",
            user_id=user.user_id,
            kind=NotificationKind.FEEDBACK_REQUEST,
            body="How was today? A 30-second check-in keeps your stats honest.",
            scheduled_for=scheduled,
            reason={"date": day.isoformat()},
        )
        self._feedback_issued[key] = notif
        return notif

    def motivational(self, user: UserProfile, day: date) -> Notification:
        """One rotating quote per user per day; idempotent."""
        key = (user.user_id, day)
        existing = self._quote_issued.get(key)
        if existing is not None:
            return existing
        quote = MOTIVATIONAL_QUOTES[day.toordinal() % len(MOTIVATIONAL_QUOTES)]
        local_nine_am = datetime(day.year, day.month, day.day, 9, 0, tzinfo=timezone.utc)
        notif = Notification(
            notif_id=f"quote-{user.user_id}-{day.isoformat()}",
            user_id=user.user_id,
            kind=NotificationKind.MOTIVATIONAL,
            body=quote,
            scheduled_for=local_nine_am - timedelta(minutes=user.utc_offset_minutes),
            reason={"date": day.isoformat()},
        )
        self._quote_issued[key] = notif
        return notif


class NotificationQueue:
    """Min-heap on scheduled_for; producers push from any thread, a single
    dispatcher drains what is due."""

    def __init__(self):
        self._heap: list[tuple[datetime, str, Notification]] = []
        self._lock = threading.Lock()

    def push(self, notif: Notification) -> None:
        with self._lock:
            heapq.heappush(self._heap, (notif.scheduled_for, notif.notif_id, notif))

    def __len__(self) -> int:
        with self._lock:
            return len(self._heap)

    def drain_due(self, now: datetime) -> list[Notification]:
        """Pop every notification scheduled at or before now, marking it
        delivered at now."""
        delivered = []
        with self._lock:
            while self._heap and self._heap[0][0] <= now:
                _, _, notif = heapq.heappop(self._heap)
                delivered.append(replace(notif, delivered_at=now))
        return delivered
