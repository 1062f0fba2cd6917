"""Shared domain vocabulary: users, consumption events, locations, interests
and daily feedback. Every other module depends only on these types.

All timestamps are timezone-aware UTC datetimes; naive datetimes are rejected
at construction so no local-time arithmetic can sneak in.
"""

from __future__ import annotations

import hashlib
import hmac
import math
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timezone
from enum import Enum
from typing import Iterable, Optional


class AddictionKind(str, Enum):
    ALCOHOL = "alcohol"
    TOBACCO = "tobacco"


class RecoveryStage(str, Enum):
    ACTIVE_USE = "active-use"
    EARLY_RECOVERY = "early-recovery"
    SUSTAINED_RECOVERY = "sustained-recovery"
    RECOVERED = "recovered"
    THERAPIST = "therapist"


class InterestTheme(str, Enum):
    FOOD = "food"
    FITNESS = "fitness"
    SHOPPING = "shopping"
    ENTERTAINMENT = "entertainment"
    OTHER = "other"


class EventSource(str, Enum):
    MANUAL = "manual"
    SURVEY_BACKFILL = "survey-backfill"


class RejectionCode(str, Enum):
    """Machine-readable reason codes for rejected consumption events."""

    FUTURE_TIMESTAMP = "FutureTimestamp"
    NEGATIVE_QUANTITY = "NegativeQuantity"
    FRACTIONAL_CIGARETTE = "FractionalCigarette"
    UNKNOWN_USER = "UnknownUser"


class EventRejected(ValueError):
    def __init__(self, code: RejectionCode, detail: str = ""):
        super().__init__(f"{code.value}: {detail}" if detail else code.value)
        self.code = code


def as_utc(at: datetime) -> datetime:
    """Normalize an aware datetime to UTC; naive datetimes are rejected."""
    if at.tzinfo is None:
        raise ValueError("naive datetime; timestamps must be timezone-aware")
    return at.astimezone(timezone.utc)


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0):
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")
        if not (-180.0 <= self.lon <= 180.0):
            raise ValueError(f"longitude {self.lon} outside [-180, 180]")

    def to_dict(self) -> dict:
        return {"lat": self.lat, "lon": self.lon}

    @classmethod
    def from_dict(cls, d: dict) -> "GeoPoint":
        return cls(lat=float(d["lat"]), lon=float(d["lon"]))


@dataclass(frozen=True)
class InterestTag:
    theme: InterestTheme
    subcategory: str = ""

    def __post_init__(self):
        if self.theme is InterestTheme.OTHER and not self.subcategory:
            raise ValueError("subcategory required when theme is 'other'")

    def to_dict(self) -> dict:
        return {"theme": self.theme.value, "subcategory": self.subcategory}

    @classmethod
    def from_dict(cls, d: dict) -> "InterestTag":
        return cls(theme=InterestTheme(d["theme"]), subcategory=d.get("subcategory", ""))


@dataclass(frozen=True)
class UserProfile:
    user_id: str
    display_name: str
    addiction_kinds: frozenset[AddictionKind]
    recovery_stage: RecoveryStage
    interests: tuple[InterestTag, ...] = ()
    home_region: Optional[GeoPoint] = None
    created_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc))
    # Minutes east of UTC; stats and feedback scheduling are user-local.
    utc_offset_minutes: int = 0

    def __post_init__(self):
        if not self.user_id:
            raise ValueError("user_id must be non-empty")
        if not self.addiction_kinds and self.recovery_stage is not RecoveryStage.THERAPIST:
            raise ValueError("addiction_kinds may be empty only for therapists")
        if len(set(self.interests)) != len(self.interests):
            raise ValueError("interests must not contain duplicates")
        object.__setattr__(self, "created_at", as_utc(self.created_at))

    @property
    def is_therapist(self) -> bool:
        return self.recovery_stage is RecoveryStage.THERAPIST

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "display_name": self.display_name,
            "addiction_kinds": sorted(k.value for k in self.addiction_kinds),
            "recovery_stage": self.recovery_stage.value,
            "interests": [t.to_dict() for t in self.interests],
            "home_region": self.home_region.to_dict() if self.home_region else None,
            "created_at": self.created_at.isoformat(),
            "utc_offset_minutes": self.utc_offset_minutes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "UserProfile":
        return cls(
            user_id=d["user_id"],
            display_name=d["display_name"],
            addiction_kinds=frozenset(AddictionKind(k) for k in d["addiction_kinds"]),
            recovery_stage=RecoveryStage(d["recovery_stage"]),
            interests=tuple(InterestTag.from_dict(t) for t in d.get("interests", [])),
            home_region=GeoPoint.from_dict(d["home_region"]) if d.get("home_region") else None,
            created_at=datetime.fromisoformat(d["created_at"]),
            utc_offset_minutes=int(d.get("utc_offset_minutes", 0)),
        )


@dataclass(frozen=True)
class ConsumptionEvent:
    """One logged drink or smoke: ounces for alcohol, cigarette count for tobacco."""

    event_id: str
    user_id: str
    substance: AddictionKind
    quantity: float
    at: datetime
    location: Optional[GeoPoint] = None
    source: EventSource = EventSource.MANUAL

    def __post_init__(self):
        object.__setattr__(self, "at", as_utc(self.at))

    def to_dict(self) -> dict:
        return {
            "event_id": self.event_id,
            "user_id": self.user_id,
            "substance": self.substance.value,
            "quantity": self.quantity,
            "at": self.at.isoformat(),
            "location": self.location.to_dict() if self.location else None,
            "source": self.source.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConsumptionEvent":
        return cls(
            event_id=d["event_id"],
            user_id=d["user_id"],
            substance=AddictionKind(d["substance"]),
            quantity=float(d["quantity"]),
            at=datetime.fromisoformat(d["at"]),
            location=GeoPoint.from_dict(d["location"]) if d.get("location") else None,
            source=EventSource(d.get("source", "manual")),
        )


@dataclass(frozen=True)
class LocationFix:
    user_id: str
    point: GeoPoint
    at: datetime
    accuracy_m: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "at", as_utc(self.at))
        if self.accuracy_m is not None and self.accuracy_m < 0:
            raise ValueError("accuracy_m must be non-negative")

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "point": self.point.to_dict(),
            "at": self.at.isoformat(),
            "accuracy_m": self.accuracy_m,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LocationFix":
        return cls(
            user_id=d["user_id"],
            point=GeoPoint.from_dict(d["point"]),
            at=datetime.fromisoformat(d["at"]),
            accuracy_m=d.get("accuracy_m"),
        )


@dataclass(frozen=True)
class DailyFeedback:
    """End-of-day survey: stress, unlogged consumption and optional backfill."""

    user_id: str
    date: date
    stress_level: int
    consumed_unlogged: bool = False
    backfill_events: tuple[ConsumptionEvent, ...] = ()
    notes: str = ""

    def __post_init__(self):
        if not (1 <= self.stress_level <= 5):
            raise ValueError("stress_level must be in 1..5")

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "date": self.date.isoformat(),
            "stress_level": self.stress_level,
            "consumed_unlogged": self.consumed_unlogged,
            "backfill_events": [e.to_dict() for e in self.backfill_events],
            "notes": self.notes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DailyFeedback":
        return cls(
            user_id=d["user_id"],
            date=date.fromisoformat(d["date"]),
            stress_level=int(d["stress_level"]),
            consumed_unlogged=bool(d.get("consumed_unlogged", False)),
            backfill_events=tuple(
                ConsumptionEvent.from_dict(e) for e in d.get("backfill_events", [])
            ),
            notes=d.get("notes", ""),
        )


def validate_event(
    raw: ConsumptionEvent,
    now: datetime,
    known_users: Optional[Iterable[str]] = None,
) -> ConsumptionEvent:
    """Validate and normalize a candidate event, or raise EventRejected.

    Rejections carry a machine-readable RejectionCode. Idempotent: a value
    that already validated passes through unchanged.
    """
    now = as_utc(now)
    if known_users is not None and raw.user_id not in set(known_users):
        raise EventRejected(RejectionCode.UNKNOWN_USER, raw.user_id)
    if raw.quantity < 0:
        raise EventRejected(RejectionCode.NEGATIVE_QUANTITY, str(raw.quantity))
    if raw.substance is AddictionKind.TOBACCO and not float(raw.quantity).is_integer():
        raise EventRejected(RejectionCode.FRACTIONAL_CIGARETTE, str(raw.quantity))
    if raw.at > now:
        raise EventRejected(RejectionCode.FUTURE_TIMESTAMP, raw.at.isoformat())
    return raw


def _truncate3(x: float) -> float:
    # Truncation toward zero (~110 m grid), not rounding.
    return math.trunc(x * 1000.0) / 1000.0


def pseudonym(user_id: str, key: bytes) -> str:
    """Stable keyed-hash pseudonym for a user id."""
    return hmac.new(key, user_id.encode("utf-8"), hashlib.sha256).hexdigest()[:16]


def anonymize(event: ConsumptionEvent, key: bytes) -> ConsumptionEvent:
    """Copy of the event with a pseudonymous user id and location coarsened
    to 3 decimal places; substance, quantity and timestamps are preserved."""
    coarse = None
    if event.location is not None:
        coarse = GeoPoint(_truncate3(event.location.lat), _truncate3(event.location.lon))
    return replace(event, user_id=pseudonym(event.user_id, key), location=coarse)
