from __future__ import annotations

from datetime import datetime, timedelta, timezone

import pytest

from addictfree.domain import (
    AddictionKind,
    ConsumptionEvent,
    GeoPoint,
    InterestTag,
    InterestTheme,
    RecoveryStage,
    UserProfile,
)

T0 = datetime(2024, 6, 3, 12, 0, tzinfo=timezone.utc)  # a Monday


def ts(days: float = 0, hours: float = 0, minutes: float = 0, seconds: float = 0) -> datetime:
    return T0 + timedelta(days=days, hours=hours, minutes=minutes, seconds=seconds)


def make_user(
    user_id: str = "u1",
    kinds=(AddictionKind.ALCOHOL,),
    stage: RecoveryStage = RecoveryStage.EARLY_RECOVERY,
    interests=(InterestTag(InterestTheme.FOOD, "coffee"),),
    home: GeoPoint | None = GeoPoint(33.58, -101.87),
    utc_offset_minutes: int = 0,
) -> UserProfile:
    return UserProfile(
        user_id=user_id,
        display_name=user_id.upper(),
        addiction_kinds=frozenset(kinds),
        recovery_stage=stage,
        interests=tuple(interests),
        home_region=home,
        created_at=T0,
        utc_offset_minutes=utc_offset_minutes,
    )


def make_event(
    event_id: str = "e1",
    user_id: str = "u1",
    substance: AddictionKind = AddictionKind.ALCOHOL,
    quantity: float = 12.0,
    at: datetime | None = None,
    location: GeoPoint | None = None,
) -> ConsumptionEvent:
    return ConsumptionEvent(
        event_id=event_id,
        user_id=user_id,
        substance=substance,
        quantity=quantity,
        at=at or T0,
        location=location,
    )


@pytest.fixture
def user():
    return make_user()
