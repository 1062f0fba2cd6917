"""Circular geofences with duration constraints, plus the per-user state
machine that consumes location-fix streams and emits confirmed
enter/leave/dwell/transit events.

Semantics are sampled-time: dwell and travel durations are measured between
fix timestamps, and every l_min/l_max comparison happens at the first fix
where the condition is observable. The simulator module carries a brute-force
interval oracle that must agree with step() event-for-event.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import datetime
from enum import Enum
from math import asin, cos, radians, sin, sqrt
from typing import Iterable, Optional, Sequence, Union

from .domain import GeoPoint, LocationFix

EARTH_RADIUS_M = 6_371_000.0

# A fix gap longer than this while inside a fence force-exits the machine at
# the last known fix time (prevents unbounded phantom dwell).
GAP_RESET_S = 1800.0


class FenceKind(str, Enum):
    ALCOHOL_SPOT = "alcohol-spot"
    TOBACCO_SPOT = "tobacco-spot"
    CUSTOM = "custom"


class ConstraintScope(str, Enum):
    FENCE_STATE = "fence-state"
    TRANSITION = "transition"


@dataclass(frozen=True)
class DurationConstraint:
    """Bounds in seconds on a fence dwell or an inter-fence transition.

    Construction is permissive; validity is checked by validate_constraints
    so that ill-formed constraints can be collected and reported.
    """

    l_min: float
    l_max: float
    applies_to: ConstraintScope = ConstraintScope.FENCE_STATE

    def to_dict(self) -> dict:
        return {"l_min": self.l_min, "l_max": self.l_max, "applies_to": self.applies_to.value}

    @classmethod
    def from_dict(cls, d: dict) -> "DurationConstraint":
        return cls(
            l_min=float(d["l_min"]),
            l_max=float(d["l_max"]),
            applies_to=ConstraintScope(d.get("applies_to", "fence-state")),
        )


@dataclass(frozen=True)
class Geofence:
    fence_id: str
    center: GeoPoint
    radius_m: float
    kind: FenceKind
    owner_id: Optional[str] = None  # None means public
    state_constraint: Optional[DurationConstraint] = None
    label: str = ""

    def __post_init__(self):
        if self.radius_m <= 0:
            raise ValueError("radius_m must be positive")

    def to_dict(self) -> dict:
        return {
            "fence_id": self.fence_id,
            "center": self.center.to_dict(),
            "radius_m": self.radius_m,
            "kind": self.kind.value,
            "owner_id": self.owner_id,
            "state_constraint": self.state_constraint.to_dict() if self.state_constraint else None,
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Geofence":
        sc = d.get("state_constraint")
        return cls(
            fence_id=d["fence_id"],
            center=GeoPoint.from_dict(d["center"]),
            radius_m=float(d["radius_m"]),
            kind=FenceKind(d["kind"]),
            owner_id=d.get("owner_id"),
            state_constraint=DurationConstraint.from_dict(sc) if sc else None,
            label=d.get("label", ""),
        )


@dataclass(frozen=True)
class TransitionRule:
    """A duration constraint attached to movement from one fence to another."""

    from_fence_id: str
    to_fence_id: str
    constraint: DurationConstraint


class FenceEventKind(str, Enum):
    ENTERED = "Entered"
    DWELL_CONFIRMED = "DwellConfirmed"
    EXITED = "Exited"
    DWELL_VIOLATION = "DwellViolation"
    TRANSIT_COMPLETED = "TransitCompleted"
    TRANSIT_VIOLATION = "TransitViolation"


@dataclass(frozen=True)
class FenceEvent:
    user_id: str
    kind: FenceEventKind
    at: datetime
    fence_id: Optional[str] = None
    from_fence_id: Optional[str] = None
    to_fence_id: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "kind": self.kind.value,
            "at": self.at.isoformat(),
            "fence_id": self.fence_id,
            "from_fence_id": self.from_fence_id,
            "to_fence_id": self.to_fence_id,
        }


class MachineMode(str, Enum):
    OUTSIDE = "outside"
    INSIDE = "inside"
    TRANSIT = "transit"


@dataclass(frozen=True)
class FenceMachine:
    """Per-user runtime state; step it serially with that user's fixes."""

    user_id: str
    mode: MachineMode = MachineMode.OUTSIDE
    fence_id: Optional[str] = None  # inside: current fence; transit: origin fence
    since: Optional[datetime] = None
    confirmed: bool = False
    dwell_violated: bool = False
    last_fix_at: Optional[datetime] = None


class OutOfOrderFix(ValueError):
    pass


class AmbiguousFences(ValueError):
    pass


def haversine_m(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters on a sphere of radius 6,371,000 m."""
    phi1, phi2 = radians(a.lat), radians(b.lat)
    dphi = phi2 - phi1
    dlam = radians(b.lon - a.lon)
    s = sin(dphi / 2.0) ** 2 + cos(phi1) * cos(phi2) * sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * asin(min(1.0, sqrt(s)))


def fence_contains(fence: Geofence, point: GeoPoint) -> bool:
    """True iff the point is within the fence radius; boundary counts as inside."""
    # Meridional distance alone exceeding the radius is a safe reject, since
    # the great-circle distance is >= R * |dphi|.
    if EARTH_RADIUS_M * abs(radians(point.lat - fence.center.lat)) > fence.radius_m:
        return False
    return haversine_m(fence.center, point) <= fence.radius_m


@dataclass(frozen=True)
class ConstraintViolation:
    scope: ConstraintScope
    index: int
    reason: str
    fence_id: Optional[str] = None


def validate_constraints(
    fences: Sequence[Geofence],
    transitions: Sequence[Union[TransitionRule, DurationConstraint]] = (),
) -> list[ConstraintViolation]:
    """Check every duration constraint against the admission rules.

    Fence-state constraints require l_min >= 0, l_max > 0 and l_min < l_max
    (strict); transition constraints relax the last clause to l_min <= l_max.
    Returns all violations with their indices; an empty list means ok.
    """
    violations: list[ConstraintViolation] = []
    for i, fence in enumerate(fences):
        c = fence.state_constraint
        if c is None:
            continue
        if c.applies_to is not ConstraintScope.FENCE_STATE:
            violations.append(
                ConstraintViolation(
                    ConstraintScope.FENCE_STATE, i, "fence constraint scoped as transition", fence.fence_id
                )
            )
            continue
        for reason in _state_constraint_problems(c):
            violations.append(ConstraintViolation(ConstraintScope.FENCE_STATE, i, reason, fence.fence_id))
    for i, t in enumerate(transitions):
        c = t.constraint if isinstance(t, TransitionRule) else t
        if c.applies_to is not ConstraintScope.TRANSITION:
            violations.append(
                ConstraintViolation(ConstraintScope.TRANSITION, i, "transition constraint scoped as fence-state")
            )
            continue
        for reason in _transition_constraint_problems(c):
            violations.append(ConstraintViolation(ConstraintScope.TRANSITION, i, reason))
    return violations


def _state_constraint_problems(c: DurationConstraint) -> list[str]:
    problems = []
    if c.l_min < 0:
        problems.append("l_min must be >= 0")
    if c.l_max <= 0:
        problems.append("l_max must be > 0")
    if not (c.l_min < c.l_max):
        problems.append("l_min must be strictly less than l_max")
    return problems


def _transition_constraint_problems(c: DurationConstraint) -> list[str]:
    problems = []
    if c.l_min < 0:
        problems.append("l_min must be >= 0")
    if c.l_max <= 0:
        problems.append("l_max must be > 0")
    if c.l_min > c.l_max:
        problems.append("l_min must be <= l_max")
    return problems


def fences_overlap(a: Geofence, b: Geofence) -> bool:
    return haversine_m(a.center, b.center) <= a.radius_m + b.radius_m


def find_overlaps(fences: Sequence[Geofence]) -> list[tuple[str, str]]:
    """Pairs of fence ids whose circles intersect; such sets are rejected
    because the machine has a single inside state."""
    pairs = []
    for i in range(len(fences)):
        for j in range(i + 1, len(fences)):
            if fences_overlap(fences[i], fences[j]):
                pairs.append((fences[i].fence_id, fences[j].fence_id))
    return pairs


def active_fences_for(user, all_fences: Iterable[Geofence]) -> list[Geofence]:
    """Public fences matching the user's addiction kinds plus the user's own
    fences, ordered by fence id."""
    kind_map = {"alcohol": FenceKind.ALCOHOL_SPOT, "tobacco": FenceKind.TOBACCO_SPOT}
    wanted = {kind_map[k.value] for k in user.addiction_kinds if k.value in kind_map}
    active = [
        f
        for f in all_fences
        if (f.owner_id is None and f.kind in wanted) or f.owner_id == user.user_id
    ]
    return sorted(active, key=lambda f: f.fence_id)


def _containing_fence(fences: Sequence[Geofence], point: GeoPoint) -> Optional[Geofence]:
    hits = [f for f in fences if fence_contains(f, point)]
    if len(hits) > 1:
        raise AmbiguousFences(", ".join(f.fence_id for f in hits))
    return hits[0] if hits else None


def _transit_window_s(from_fence_id: str, transitions: Sequence[TransitionRule]) -> Optional[float]:
    windows = [t.constraint.l_max for t in transitions if t.from_fence_id == from_fence_id]
    return max(windows) if windows else None


def _transit_rule(
    from_id: str, to_id: str, transitions: Sequence[TransitionRule]
) -> Optional[TransitionRule]:
    for t in transitions:
        if t.from_fence_id == from_id and t.to_fence_id == to_id:
            return t
    return None


def step(
    machine: FenceMachine,
    fences: Sequence[Geofence],
    fix: LocationFix,
    transitions: Sequence[TransitionRule] = (),
) -> tuple[FenceMachine, list[FenceEvent]]:
    """Advance the machine by one fix and return (new machine, events).

    Event order within one fix: gap-forced Exited (timestamped at the last
    known fix), Exited, Entered, TransitCompleted/TransitViolation,
    DwellConfirmed, DwellViolation.

    Raises OutOfOrderFix when the fix precedes the last one seen, and
    AmbiguousFences when the fix lies inside two or more fences.
    """
    if machine.last_fix_at is not None and fix.at < machine.last_fix_at:
        raise OutOfOrderFix(f"fix at {fix.at} before {machine.last_fix_at}")

    uid = machine.user_id
    events: list[FenceEvent] = []
    m = machine

    # Long silence while inside: force an exit at the last known fix time.
    if (
        m.mode is MachineMode.INSIDE
        and m.last_fix_at is not None
        and (fix.at - m.last_fix_at).total_seconds() > GAP_RESET_S
    ):
        events.append(FenceEvent(uid, FenceEventKind.EXITED, m.last_fix_at, fence_id=m.fence_id))
        m = replace(m, mode=MachineMode.OUTSIDE, fence_id=None, since=None, confirmed=False, dwell_violated=False)

    current = _containing_fence(fences, fix.point)
    fences_by_id = {f.fence_id: f for f in fences}

    if m.mode is MachineMode.OUTSIDE:
        if current is not None:
            m = _enter(m, current, fix.at, events)
            m = _dwell_checks(m, current, fix.at, events)

    elif m.mode is MachineMode.INSIDE:
        if current is not None and current.fence_id == m.fence_id:
            m = _dwell_checks(m, fences_by_id[m.fence_id], fix.at, events)
        else:
            events.append(FenceEvent(uid, FenceEventKind.EXITED, fix.at, fence_id=m.fence_id))
            origin = m.fence_id
            if current is None:
                m = replace(
                    m, mode=MachineMode.TRANSIT, fence_id=origin, since=fix.at, confirmed=False, dwell_violated=False
                )
            else:
                m = _enter(m, current, fix.at, events)
                _emit_transit(uid, origin, current.fence_id, 0.0, fix.at, transitions, events)
                m = _dwell_checks(m, current, fix.at, events)

    else:  # TRANSIT
        if current is None:
            window = _transit_window_s(m.fence_id, transitions)
            if window is not None and (fix.at - m.since).total_seconds() > window:
                # No destination reached within any configured window; this was
                # a plain exit, not a transition.
                m = replace(m, mode=MachineMode.OUTSIDE, fence_id=None, since=None)
        else:
            travel_s = (fix.at - m.since).total_seconds()
            origin = m.fence_id
            m = _enter(m, current, fix.at, events)
            _emit_transit(uid, origin, current.fence_id, travel_s, fix.at, transitions, events)
            m = _dwell_checks(m, current, fix.at, events)

    return replace(m, last_fix_at=fix.at), events


def _enter(m: FenceMachine, fence: Geofence, at: datetime, events: list[FenceEvent]) -> FenceMachine:
    events.append(FenceEvent(m.user_id, FenceEventKind.ENTERED, at, fence_id=fence.fence_id))
    return replace(
        m, mode=MachineMode.INSIDE, fence_id=fence.fence_id, since=at, confirmed=False, dwell_violated=False
    )


def _emit_transit(
    uid: str,
    from_id: str,
    to_id: str,
    travel_s: float,
    at: datetime,
    transitions: Sequence[TransitionRule],
    events: list[FenceEvent],
) -> None:
    rule = _transit_rule(from_id, to_id, transitions)
    if rule is None or rule.constraint.l_min <= travel_s <= rule.constraint.l_max:
        kind = FenceEventKind.TRANSIT_COMPLETED
    else:
        kind = FenceEventKind.TRANSIT_VIOLATION
    events.append(FenceEvent(uid, kind, at, from_fence_id=from_id, to_fence_id=to_id))


def _dwell_checks(
    m: FenceMachine, fence: Geofence, at: datetime, events: list[FenceEvent]
) -> FenceMachine:
    """Emit DwellConfirmed / DwellViolation the first time each threshold is
    observed; on an entry fix the dwell is zero, so l_min = 0 confirms
    immediately."""
    constraint = fence.state_constraint
    if constraint is None:
        return m
    dwell_s = (at - m.since).total_seconds()
    if not m.confirmed and dwell_s >= constraint.l_min:
        events.append(FenceEvent(m.user_id, FenceEventKind.DWELL_CONFIRMED, at, fence_id=fence.fence_id))
        m = replace(m, confirmed=True)
    if not m.dwell_violated and dwell_s > constraint.l_max:
        events.append(FenceEvent(m.user_id, FenceEventKind.DWELL_VIOLATION, at, fence_id=fence.fence_id))
        m = replace(m, dwell_violated=True)
    return m
