"""Deterministic synthetic-data generation and brute-force oracles.

The generator produces consumption events, 60 s location fixes along
interpolated waypoint trajectories, and end-of-day feedback, all reproducible
from a seed. oracle_fence_events re-derives fence events by materializing
inside/outside intervals and applying the duration rules post hoc; it is the
reference the incremental geo machine is tested against. oracle_auc is an
exact pairwise AUC used to grade predictor experiments.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Optional, Sequence

from .domain import (
    AddictionKind,
    ConsumptionEvent,
    DailyFeedback,
    GeoPoint,
    LocationFix,
)
from .geo import (
    GAP_RESET_S,
    FenceEvent,
    FenceEventKind,
    Geofence,
    TransitionRule,
    fence_contains,
    haversine_m,
)


class DegenerateLabels(ValueError):
    pass


# ---------------------------------------------------------------------------
# Scenario model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpotVisit:
    """One daily stop: travel to `point`, arriving at `arrive_hour` local to
    the day, and stay for `dwell_min` minutes."""

    point: GeoPoint
    arrive_hour: float
    dwell_min: float

    def to_dict(self) -> dict:
        return {"point": self.point.to_dict(), "arrive_hour": self.arrive_hour, "dwell_min": self.dwell_min}

    @classmethod
    def from_dict(cls, d: dict) -> "SpotVisit":
        return cls(GeoPoint.from_dict(d["point"]), float(d["arrive_hour"]), float(d["dwell_min"]))


@dataclass(frozen=True)
class UserBehavior:
    user_id: str
    substance: AddictionKind = AddictionKind.ALCOHOL
    quantity: float = 12.0
    # hour of day -> probability of one consumption event in that hour
    relapse_hours: dict[int, float] = field(default_factory=dict)
    home: GeoPoint = GeoPoint(33.58, -101.87)
    spots: tuple[SpotVisit, ...] = ()
    speed_mps: float = 10.0

    def __post_init__(self):
        for h, p in self.relapse_hours.items():
            if not (0 <= h <= 23) or not (0.0 <= p <= 1.0):
                raise ValueError(f"bad relapse hour spec {h}: {p}")
        if self.speed_mps <= 0:
            raise ValueError("speed_mps must be positive")

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "substance": self.substance.value,
            "quantity": self.quantity,
            "relapse_hours": {str(h): p for h, p in self.relapse_hours.items()},
            "home": self.home.to_dict(),
            "spots": [s.to_dict() for s in self.spots],
            "speed_mps": self.speed_mps,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "UserBehavior":
        return cls(
            user_id=d["user_id"],
            substance=AddictionKind(d.get("substance", "alcohol")),
            quantity=float(d.get("quantity", 12.0)),
            relapse_hours={int(h): float(p) for h, p in d.get("relapse_hours", {}).items()},
            home=GeoPoint.from_dict(d["home"]) if d.get("home") else GeoPoint(33.58, -101.87),
            spots=tuple(SpotVisit.from_dict(s) for s in d.get("spots", [])),
            speed_mps=float(d.get("speed_mps", 10.0)),
        )


@dataclass(frozen=True)
class Scenario:
    seed: int
    days: int
    users: tuple[UserBehavior, ...]
    # Anchored to midnight UTC of this date so relapse hours and visit
    # arrival hours are calendar hours of day.
    start_at: datetime = datetime(2024, 1, 1, tzinfo=timezone.utc)
    fix_interval_s: float = 60.0

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "days": self.days,
            "users": [u.to_dict() for u in self.users],
            "start_at": self.start_at.isoformat(),
            "fix_interval_s": self.fix_interval_s,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        return cls(
            seed=int(d["seed"]),
            days=int(d["days"]),
            users=tuple(UserBehavior.from_dict(u) for u in d["users"]),
            start_at=datetime.fromisoformat(d["start_at"])
            if d.get("start_at")
            else datetime(2024, 1, 1, tzinfo=timezone.utc),
            fix_interval_s=float(d.get("fix_interval_s", 60.0)),
        )


# ---------------------------------------------------------------------------
# Trajectory + event generation
# ---------------------------------------------------------------------------

# (t_start_s, t_end_s, p_start, p_end); stationary segments have p_start == p_end
_Segment = tuple[float, float, GeoPoint, GeoPoint]


def _build_timeline(user: UserBehavior, days: int) -> list[_Segment]:
    """Piecewise-linear position over the whole scenario, in seconds since
    start. Legs run at user.speed_mps; visits that cannot be reached in time
    simply begin late, so the trajectory is continuous (no teleports)."""
    segments: list[_Segment] = []
    pos = user.home
    cursor = 0.0
    for day in range(days):
        day_start = day * 86400.0
        for visit in sorted(user.spots, key=lambda v: v.arrive_hour):
            arrive = day_start + visit.arrive_hour * 3600.0
            travel = haversine_m(pos, visit.point) / user.speed_mps
            depart = arrive - travel
            if depart < cursor:
                depart = cursor
                arrive = cursor + travel
            if depart > cursor:
                segments.append((cursor, depart, pos, pos))
            if travel > 0:
                segments.append((depart, arrive, pos, visit.point))
            leave = arrive + visit.dwell_min * 60.0
            segments.append((arrive, leave, visit.point, visit.point))
            pos = visit.point
            cursor = leave
        if pos != user.home:
            travel = haversine_m(pos, user.home) / user.speed_mps
            segments.append((cursor, cursor + travel, pos, user.home))
            cursor += travel
            pos = user.home
    horizon = days * 86400.0
    if cursor < horizon:
        segments.append((cursor, horizon, pos, pos))
    return segments


def _position_at(segments: list[_Segment], t_s: float, seg_idx: int) -> tuple[GeoPoint, int]:
    """Evaluate the timeline at t_s; seg_idx is a monotone cursor hint."""
    i = seg_idx
    while i + 1 < len(segments) and t_s >= segments[i][1]:
        i += 1
    t0, t1, p0, p1 = segments[i]
    if p0 == p1 or t1 <= t0:
        return p0, i
    frac = min(1.0, max(0.0, (t_s - t0) / (t1 - t0)))
    return (
        GeoPoint(p0.lat + frac * (p1.lat - p0.lat), p0.lon + frac * (p1.lon - p0.lon)),
        i,
    )


def generate(
    scenario: Scenario,
) -> tuple[list[ConsumptionEvent], list[LocationFix], list[DailyFeedback]]:
    """Deterministic events, fixes and feedback for every user in the scenario.

    Each user draws from an independent seeded stream, so adding a user never
    perturbs the others. Fixes are sampled every fix_interval_s along the
    interpolated trajectory; consumption events are located at the concurrent
    trajectory point.
    """
    start = scenario.start_at.astimezone(timezone.utc).replace(
        hour=0, minute=0, second=0, microsecond=0
    )
    events: list[ConsumptionEvent] = []
    fixes: list[LocationFix] = []
    feedback: list[DailyFeedback] = []
    for user in scenario.users:
        rng = random.Random(f"{scenario.seed}:{user.user_id}")
        segments = _build_timeline(user, scenario.days)
        horizon_s = scenario.days * 86400.0

        seg_idx = 0
        t = 0.0
        while t < horizon_s:
            point, seg_idx = _position_at(segments, t, seg_idx)
            fixes.append(LocationFix(user.user_id, point, start + timedelta(seconds=t)))
            t += scenario.fix_interval_s

        ev_idx = 0
        for day in range(scenario.days):
            for hour in sorted(user.relapse_hours):
                p = user.relapse_hours[hour]
                if rng.random() >= p:
                    continue
                offset_s = day * 86400.0 + hour * 3600.0 + rng.uniform(0.0, 3599.0)
                at = start + timedelta(seconds=offset_s)
                point, _ = _position_at(segments, offset_s, 0)
                events.append(
                    ConsumptionEvent(
                        event_id=f"{user.user_id}-sim-{ev_idx:05d}",
                        user_id=user.user_id,
                        substance=user.substance,
                        quantity=user.quantity,
                        at=at,
                        location=point,
                    )
                )
                ev_idx += 1
            day_date = (start + timedelta(days=day)).date()
            feedback.append(
                DailyFeedback(
                    user_id=user.user_id,
                    date=day_date,
                    stress_level=rng.randint(1, 5),
                )
            )
    events.sort(key=lambda e: (e.at, e.user_id, e.event_id))
    fixes.sort(key=lambda f: (f.at, f.user_id))
    feedback.sort(key=lambda f: (f.date, f.user_id))
    return events, fixes, feedback


# ---------------------------------------------------------------------------
# Brute-force fence-event oracle
# ---------------------------------------------------------------------------


@dataclass
class _Interval:
    fence_id: str
    start: int  # fix indices, inclusive
    end: int
    # how it ended: "observed" (a later fix saw us elsewhere), "gap"
    # (silence > GAP_RESET_S), or "open" (stream ended inside)
    termination: str
    exit_at: Optional[datetime]


def _materialize_intervals(
    containment: list[Optional[str]], times: list[datetime]
) -> list[_Interval]:
    intervals: list[_Interval] = []
    i = 0
    n = len(containment)
    while i < n:
        if containment[i] is None:
            i += 1
            continue
        fid = containment[i]
        j = i
        while (
            j + 1 < n
            and containment[j + 1] == fid
            and (times[j + 1] - times[j]).total_seconds() <= GAP_RESET_S
        ):
            j += 1
        if j + 1 >= n:
            term, exit_at = "open", None
        elif (times[j + 1] - times[j]).total_seconds() > GAP_RESET_S:
            term, exit_at = "gap", times[j]
        else:
            term, exit_at = "observed", times[j + 1]
        intervals.append(_Interval(fid, i, j, term, exit_at))
        i = j + 1
    return intervals


def oracle_fence_events(
    fixes: Sequence[LocationFix],
    fences: Sequence[Geofence],
    transitions: Sequence[TransitionRule] = (),
) -> list[FenceEvent]:
    """Reference fence-event stream computed from materialized intervals.

    Independent of the incremental machine: contiguous inside-intervals are
    extracted from the raw fixes first, then duration and transition rules
    are applied to whole intervals.
    """
    if not fixes:
        return []
    uid = fixes[0].user_id
    times = [f.at for f in fixes]
    containment: list[Optional[str]] = []
    for f in fixes:
        hits = [g.fence_id for g in fences if fence_contains(g, f.point)]
        if len(hits) > 1:
            raise ValueError(f"fix at {f.at} inside multiple fences: {hits}")
        containment.append(hits[0] if hits else None)

    by_id = {g.fence_id: g for g in fences}
    rule_map = {(t.from_fence_id, t.to_fence_id): t.constraint for t in transitions}
    windows: dict[str, float] = {}
    for t in transitions:
        w = windows.get(t.from_fence_id)
        windows[t.from_fence_id] = t.constraint.l_max if w is None else max(w, t.constraint.l_max)

    intervals = _materialize_intervals(containment, times)
    events: list[FenceEvent] = []
    prev: Optional[_Interval] = None

    for itv in intervals:
        entered_at = times[itv.start]
        events.append(FenceEvent(uid, FenceEventKind.ENTERED, entered_at, fence_id=itv.fence_id))

        # Transition bookkeeping relative to the previous interval: alive only
        # after an observed exit, and only if no in-between no-fence fix fell
        # past every configured window for the origin fence.
        if prev is not None and prev.termination == "observed":
            alive = True
            window = windows.get(prev.fence_id)
            if window is not None:
                for k in range(prev.end + 1, itv.start):
                    if containment[k] is None and (times[k] - prev.exit_at).total_seconds() > window:
                        alive = False
                        break
            if alive:
                travel_s = (entered_at - prev.exit_at).total_seconds()
                rule = rule_map.get((prev.fence_id, itv.fence_id))
                ok = rule is None or rule.l_min <= travel_s <= rule.l_max
                kind = FenceEventKind.TRANSIT_COMPLETED if ok else FenceEventKind.TRANSIT_VIOLATION
                events.append(
                    FenceEvent(uid, kind, entered_at, from_fence_id=prev.fence_id, to_fence_id=itv.fence_id)
                )

        constraint = by_id[itv.fence_id].state_constraint
        if constraint is not None:
            for k in range(itv.start, itv.end + 1):
                if (times[k] - entered_at).total_seconds() >= constraint.l_min:
                    events.append(
                        FenceEvent(uid, FenceEventKind.DWELL_CONFIRMED, times[k], fence_id=itv.fence_id)
                    )
                    break
            for k in range(itv.start, itv.end + 1):
                if (times[k] - entered_at).total_seconds() > constraint.l_max:
                    events.append(
                        FenceEvent(uid, FenceEventKind.DWELL_VIOLATION, times[k], fence_id=itv.fence_id)
                    )
                    break

        if itv.termination != "open":
            events.append(FenceEvent(uid, FenceEventKind.EXITED, itv.exit_at, fence_id=itv.fence_id))
        prev = itv

    return events


# ---------------------------------------------------------------------------
# Exact AUC
# ---------------------------------------------------------------------------


def oracle_auc(predictions: Sequence[float], labels: Sequence[float]) -> float:
    """Exact AUC by pairwise comparison; ties count one half.

    Raises DegenerateLabels unless both classes are present.
    """
    if len(predictions) != len(labels):
        raise ValueError("predictions and labels must be the same length")
    pos = [p for p, y in zip(predictions, labels) if y >= 0.5]
    neg = [p for p, y in zip(predictions, labels) if y < 0.5]
    if not pos or not neg:
        raise DegenerateLabels("need at least one positive and one negative label")
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (len(pos) * len(neg))
