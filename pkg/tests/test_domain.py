from __future__ import annotations

import random
from datetime import datetime, timedelta, timezone

import pytest

from addictfree.domain import (
    AddictionKind,
    DailyFeedback,
    EventRejected,
    GeoPoint,
    InterestTag,
    InterestTheme,
    RecoveryStage,
    RejectionCode,
    UserProfile,
    anonymize,
    pseudonym,
    validate_event,
)

from conftest import T0, make_event, make_user, ts

KEY = b"test-anonymization-key"


class TestGeoPoint:
    def test_valid_ranges(self):
        GeoPoint(90, 180)
        GeoPoint(-90, -180)
        GeoPoint(0, 0)

    @pytest.mark.parametrize("lat,lon", [(90.1, 0), (-91, 0), (0, 180.5), (0, -181)])
    def test_out_of_range_rejected(self, lat, lon):
        with pytest.raises(ValueError):
            GeoPoint(lat, lon)


class TestUserProfile:
    def test_therapist_may_have_no_addictions(self):
        u = make_user("t1", kinds=(), stage=RecoveryStage.THERAPIST)
        assert u.is_therapist

    def test_non_therapist_needs_addiction(self):
        with pytest.raises(ValueError):
            make_user("u9", kinds=(), stage=RecoveryStage.EARLY_RECOVERY)

    def test_duplicate_interests_rejected(self):
        tag = InterestTag(InterestTheme.FOOD, "coffee")
        with pytest.raises(ValueError):
            make_user(interests=(tag, tag))

    def test_other_theme_needs_subcategory(self):
        with pytest.raises(ValueError):
            InterestTag(InterestTheme.OTHER, "")

    def test_roundtrip(self):
        u = make_user()
        assert UserProfile.from_dict(u.to_dict()) == u


class TestTimestamps:
    def test_naive_datetime_rejected(self):
        with pytest.raises(ValueError):
            make_event(at=datetime(2024, 6, 3, 12, 0))

    def test_aware_normalized_to_utc(self):
        offset = timezone(timedelta(hours=2))
        e = make_event(at=datetime(2024, 6, 3, 14, 0, tzinfo=offset))
        assert e.at.tzinfo == timezone.utc
        assert e.at == T0


class TestValidateEvent:
    def test_well_formed_accepted_unchanged(self):
        e = make_event(quantity=12.0, at=ts(hours=-1))
        assert validate_event(e, now=T0) == e

    def test_fractional_cigarette_rejected(self):
        e = make_event(substance=AddictionKind.TOBACCO, quantity=2.5, at=ts(hours=-1))
        with pytest.raises(EventRejected) as exc:
            validate_event(e, now=T0)
        assert exc.value.code is RejectionCode.FRACTIONAL_CIGARETTE

    def test_whole_cigarettes_accepted(self):
        e = make_event(substance=AddictionKind.TOBACCO, quantity=3.0, at=ts(hours=-1))
        assert validate_event(e, now=T0) == e

    def test_future_timestamp_rejected(self):
        e = make_event(quantity=5.0, at=ts(hours=1))
        with pytest.raises(EventRejected) as exc:
            validate_event(e, now=T0)
        assert exc.value.code is RejectionCode.FUTURE_TIMESTAMP

    def test_negative_quantity_rejected(self):
        e = make_event(quantity=-1.0, at=ts(hours=-1))
        with pytest.raises(EventRejected) as exc:
            validate_event(e, now=T0)
        assert exc.value.code is RejectionCode.NEGATIVE_QUANTITY

    def test_unknown_user_rejected(self):
        e = make_event(at=ts(hours=-1))
        with pytest.raises(EventRejected) as exc:
            validate_event(e, now=T0, known_users={"someone-else"})
        assert exc.value.code is RejectionCode.UNKNOWN_USER

    def test_idempotent(self):
        e = make_event(at=ts(hours=-1))
        once = validate_event(e, now=T0)
        assert validate_event(once, now=T0) == once


class TestAnonymize:
    def test_pseudonym_stable_across_calls(self):
        e = make_event()
        assert anonymize(e, KEY).user_id == anonymize(e, KEY).user_id
        assert anonymize(e, KEY).user_id != e.user_id

    def test_location_truncated_to_3_decimals(self):
        e = make_event(location=GeoPoint(33.584123, -101.874456))
        a = anonymize(e, KEY)
        assert a.location == GeoPoint(33.584, -101.874)

    def test_substance_quantity_time_preserved(self):
        e = make_event(quantity=7.5)
        a = anonymize(e, KEY)
        assert (a.substance, a.quantity, a.at) == (e.substance, e.quantity, e.at)

    def test_no_collisions_over_many_ids(self):
        rng = random.Random(42)
        ids = {f"user-{rng.getrandbits(64):016x}" for _ in range(10_000)}
        pseudonyms = {pseudonym(i, KEY) for i in ids}
        assert len(pseudonyms) == len(ids)

    def test_distinct_users_distinct_pseudonyms(self):
        a = anonymize(make_event(user_id="alice"), KEY)
        b = anonymize(make_event(user_id="bob"), KEY)
        assert a.user_id != b.user_id


class TestDailyFeedback:
    def test_stress_bounds(self):
        with pytest.raises(ValueError):
            DailyFeedback("u1", T0.date(), stress_level=6)
        with pytest.raises(ValueError):
            DailyFeedback("u1", T0.date(), stress_level=0)

    def test_roundtrip(self):
        fb = DailyFeedback("u1", T0.date(), 3, True, (make_event(),), "rough day")
        assert DailyFeedback.from_dict(fb.to_dict()) == fb
