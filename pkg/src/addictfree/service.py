"""HTTP facade and process host.

Wires ingestion to the geofence machine and the notification engine, exposes
summaries/predictions/community over JSON endpoints, and runs the hourly tick
that refreshes predictions and schedules pre-relapse diversions. The clock is
injected so tests drive virtual time.

Auth is operator-issued bearer tokens: the operator token (from config) may
act for any user and create accounts; each created user gets their own token
that only reaches that user's data.
"""

from __future__ import annotations

import base64
import json
import logging
import threading
import uuid
from contextlib import asynccontextmanager
from dataclasses import replace
from datetime import date, datetime, timedelta
from typing import Optional

from fastapi import Depends, FastAPI, HTTPException, Query, Request
from pydantic import BaseModel, Field

from . import __version__
from .clock import WallClock
from .community import (
    CommunityBoard,
    EmptyBody,
    EmptyTitle,
    UnknownPost,
    UnknownUser,
    suggest_connections,
)
from .config import ServiceConfig
from .diversion import (
    Notification,
    NotificationEngine,
    NotificationQueue,
    load_pois_csv,
    PointOfInterest,
)
from .domain import (
    AddictionKind,
    ConsumptionEvent,
    DailyFeedback,
    EventRejected,
    EventSource,
    GeoPoint,
    InterestTag,
    LocationFix,
    RecoveryStage,
    UserProfile,
    as_utc,
    validate_event,
)
from .geo import (
    AmbiguousFences,
    ConstraintScope,
    DurationConstraint,
    FenceKind,
    FenceMachine,
    Geofence,
    OutOfOrderFix,
    active_fences_for,
    fences_overlap,
    step,
    validate_constraints,
)
from .lstm import TrainConfig, dumps_params, init_params, loads_params, train
from .predictor import (
    FEATURE_COUNT,
    InsufficientHistory,
    extract_features,
    feature_matrix,
    floor_hour,
    predict_next_hours,
)
from .stats import (
    daily_summary,
    export_month_csv,
    local_date,
    monthly_series,
    weekly_scores,
)
from .store import (
    NS_EVENTS,
    NS_FEEDBACK,
    NS_FENCES,
    NS_FIXES,
    NS_MODELS,
    NS_NOTIFICATIONS,
    NS_POIS,
    NS_TOKENS,
    NS_USERS,
    Store,
    time_key,
)

logger = logging.getLogger("addictfree")

MIN_HISTORY_HOURS = 48


def parse_dt(s: str) -> datetime:
    return as_utc(datetime.fromisoformat(s.replace("Z", "+00:00")))


class AppState:
    """Everything the endpoints share: the store, the clock, per-user fence
    machines and the notification pipeline."""

    def __init__(self, config: ServiceConfig, clock=None, store: Optional[Store] = None):
        self.config = config
        self.clock = clock or WallClock()
        self.store = store or Store(config.store_path)
        self.queue = NotificationQueue()
        self.engine = NotificationEngine(self.clock.now)
        self.machines: dict[str, FenceMachine] = {}
        self._user_locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        if config.poi_csv_path:
            with open(config.poi_csv_path) as fh:
                self.import_pois(fh.read())

    # -- small helpers -----------------------------------------------------

    def user_lock(self, user_id: str) -> threading.Lock:
        with self._locks_guard:
            if user_id not in self._user_locks:
                self._user_locks[user_id] = threading.Lock()
            return self._user_locks[user_id]

    def now(self) -> datetime:
        return self.clock.now()

    def load_user(self, user_id: str) -> Optional[UserProfile]:
        entry = self.store.get(NS_USERS, user_id)
        if entry is None:
            return None
        return UserProfile.from_dict(json.loads(entry[0]))

    def save_user(self, user: UserProfile) -> None:
        self.store.put(NS_USERS, user.user_id, json.dumps(user.to_dict()).encode())

    def all_users(self) -> list[UserProfile]:
        return [UserProfile.from_dict(json.loads(r.value)) for r in self.store.scan(NS_USERS)]

    def user_events(self, user_id: str) -> list[ConsumptionEvent]:
        return [
            ConsumptionEvent.from_dict(json.loads(r.value))
            for r in self.store.scan(NS_EVENTS, f"{user_id}/")
        ]

    def user_feedback(self, user_id: str) -> list[DailyFeedback]:
        return [
            DailyFeedback.from_dict(json.loads(r.value))
            for r in self.store.scan(NS_FEEDBACK, f"{user_id}/")
        ]

    def all_fences(self) -> list[Geofence]:
        return [Geofence.from_dict(json.loads(r.value)) for r in self.store.scan(NS_FENCES)]

    def pois(self) -> list[PointOfInterest]:
        return [PointOfInterest.from_dict(json.loads(r.value)) for r in self.store.scan(NS_POIS)]

    def import_pois(self, csv_text: str) -> int:
        pois = load_pois_csv(csv_text)
        for poi in pois:
            self.store.put(NS_POIS, poi.poi_id, json.dumps(poi.to_dict()).encode())
        return len(pois)

    # -- notifications -----------------------------------------------------

    def notify(self, notif: Notification) -> None:
        """Persist the notification; deliver it now if already due, otherwise
        park it on the queue for the dispatcher."""
        key = time_key(notif.user_id, int(notif.scheduled_for.timestamp()), notif.notif_id)
        if self.store.get(NS_NOTIFICATIONS, key) is not None:
            return  # already issued (idempotent tick)
        now = self.now()
        if notif.scheduled_for <= now:
            notif = replace(notif, delivered_at=now)
        else:
            self.queue.push(notif)
        self.store.put(NS_NOTIFICATIONS, key, json.dumps(notif.to_dict()).encode())

    def pump(self) -> list[Notification]:
        """Deliver whatever became due on the virtual/wall clock."""
        delivered = self.queue.drain_due(self.now())
        for notif in delivered:
            key = time_key(notif.user_id, int(notif.scheduled_for.timestamp()), notif.notif_id)
            self.store.put(NS_NOTIFICATIONS, key, json.dumps(notif.to_dict()).encode())
        return delivered

    def notifications_for(self, user_id: str, since: Optional[datetime] = None) -> list[Notification]:
        self.pump()
        out = []
        for rec in self.store.scan(NS_NOTIFICATIONS, f"{user_id}/"):
            notif = Notification.from_dict(json.loads(rec.value))
            if since is not None and notif.scheduled_for < since:
                continue
            out.append(notif)
        out.sort(key=lambda n: (n.scheduled_for, n.notif_id))
        return out

    # -- ingestion ---------------------------------------------------------

    def ingest_event(self, event: ConsumptionEvent) -> ConsumptionEvent:
        checked = validate_event(event, self.now(), known_users={event.user_id} if self.load_user(event.user_id) else set())
        key = time_key(checked.user_id, int(checked.at.timestamp()), checked.event_id)
        self.store.put(NS_EVENTS, key, json.dumps(checked.to_dict()).encode())
        return checked

    def ingest_fix(self, fix: LocationFix):
        """Step the user's fence machine; per-user serialization keeps fix
        order intact under concurrent ingestion of different users."""
        user = self.load_user(fix.user_id)
        if user is None:
            raise UnknownUser(fix.user_id)
        with self.user_lock(fix.user_id):
            fences = active_fences_for(user, self.all_fences())
            machine = self.machines.get(fix.user_id) or FenceMachine(fix.user_id)
            fence_ids = {f.fence_id for f in fences}
            if machine.fence_id is not None and machine.fence_id not in fence_ids:
                machine = FenceMachine(fix.user_id, last_fix_at=machine.last_fix_at)
            machine, events = step(machine, fences, fix)
            self.machines[fix.user_id] = machine
            key = time_key(fix.user_id, int(fix.at.timestamp()), uuid.uuid4().hex[:8])
            self.store.put(NS_FIXES, key, json.dumps(fix.to_dict()).encode())
            by_id = {f.fence_id: f for f in fences}
            pois = self.pois()
            for ev in events:
                notif = self.engine.on_fence_event(ev, user, pois, by_id.get(ev.fence_id))
                if notif is not None:
                    self.notify(notif)
            return machine, events

    def ingest_feedback(self, fb: DailyFeedback) -> None:
        # validate the whole backfill before persisting anything
        checked = [validate_event(e, self.now()) for e in fb.backfill_events]
        key = f"{fb.user_id}/{fb.date.isoformat()}"
        self.store.put(NS_FEEDBACK, key, json.dumps(fb.to_dict()).encode())
        for event in checked:
            self.ingest_event(event)

    def create_fence(self, fence: Geofence) -> Geofence:
        violations = validate_constraints([fence])
        if violations:
            raise ValueError("; ".join(v.reason for v in violations))
        if fence.owner_id is None:
            others = self.all_fences()
        else:
            others = [f for f in self.all_fences() if f.owner_id in (None, fence.owner_id)]
        clashes = [f.fence_id for f in others if f.fence_id != fence.fence_id and fences_overlap(f, fence)]
        if clashes:
            raise AmbiguousFences(", ".join(clashes))
        self.store.put(NS_FENCES, fence.fence_id, json.dumps(fence.to_dict()).encode())
        return fence

    # -- models ------------------------------------------------------------

    def load_model(self, user_id: str):
        entry = self.store.get(NS_MODELS, user_id)
        if entry is None:
            return None, None
        doc = json.loads(entry[0])
        params, cfg = loads_params(base64.b64decode(doc["checkpoint"]))
        return params, doc

    def save_model(self, user_id: str, params, cfg: TrainConfig, now: datetime, local_day: date) -> None:
        doc = {
            "checkpoint": base64.b64encode(dumps_params(params, cfg)).decode("ascii"),
            "trained_at": now.isoformat(),
            "trained_on_local_date": local_day.isoformat(),
        }
        self.store.put(NS_MODELS, user_id, json.dumps(doc).encode())

    def train_user_model(self, user: UserProfile, now: datetime) -> bool:
        """Train (or retrain) this user's model on their trailing window;
        returns False when history is under 48 hours."""
        events = self.user_events(user.user_id)
        if not events:
            return False
        first_at = min(e.at for e in events)
        if now - first_at < timedelta(hours=MIN_HISTORY_HOURS):
            return False
        cfg = self.config.predictor
        window_end = floor_hour(now)
        available = int((window_end - floor_hour(first_at)).total_seconds() // 3600)
        window = max(2, min(cfg.window_hours, available))
        features, labels = extract_features(
            events, self.user_feedback(user.user_id), window_end, window
        )
        batch = [(feature_matrix(features), labels)]
        p0 = init_params(cfg.hidden_size, FEATURE_COUNT, cfg.seed)
        params = train(p0, batch, cfg)
        self.save_model(user.user_id, params, cfg, now, local_date(now, user.utc_offset_minutes))
        return True

    def predictions_for(self, user: UserProfile, horizon: int) -> list[tuple[datetime, float]]:
        params, _ = self.load_model(user.user_id)
        if params is None:
            raise LookupError("NoModel")
        return predict_next_hours(
            params,
            self.user_events(user.user_id),
            self.user_feedback(user.user_id),
            self.now(),
            horizon_hours=horizon,
            window_hours=self.config.predictor.window_hours,
        )

    # -- scheduler ---------------------------------------------------------

    def hourly_tick(self, now: Optional[datetime] = None) -> None:
        """Per active user: refresh predictions and schedule diversions;
        (re)train nightly at user-local 03:00. Never raises."""
        now = now or self.now()
        for user in self.all_users():
            try:
                self._tick_user(user, now)
            except Exception:
                logger.exception("tick failed for %s", user.user_id)
        self.pump()

    def _tick_user(self, user: UserProfile, now: datetime) -> None:
        if user.is_therapist:
            return
        params, meta = self.load_model(user.user_id)
        local_now = now + timedelta(minutes=user.utc_offset_minutes)
        local_day = local_now.date()
        if params is None:
            self.train_user_model(user, now)
            params, meta = self.load_model(user.user_id)
        elif local_now.hour == 3 and meta.get("trained_on_local_date") != local_day.isoformat():
            self.train_user_model(user, now)
            params, meta = self.load_model(user.user_id)
        if params is not None:
            try:
                predictions = self.predictions_for(user, horizon=24)
            except (InsufficientHistory, LookupError):
                predictions = []
            if predictions:
                notif = self.engine.schedule_prerelapse(
                    predictions, self.config.prediction_threshold, user
                )
                if notif is not None:
                    self.notify(notif)
        self.notify(self.engine.daily_feedback_request(user, local_day))
        self.notify(self.engine.motivational(user, local_day))


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------


class UserCreate(BaseModel):
    display_name: str
    addiction_kinds: list[str] = Field(default_factory=list)
    recovery_stage: str = "early-recovery"
    interests: list[dict] = Field(default_factory=list)
    home_region: Optional[dict] = None
    utc_offset_minutes: int = 0


class EventCreate(BaseModel):
    substance: str
    quantity: float
    at: str
    location: Optional[dict] = None
    source: str = "manual"
    event_id: Optional[str] = None


class FixCreate(BaseModel):
    lat: float
    lon: float
    at: str
    accuracy_m: Optional[float] = None


class FeedbackCreate(BaseModel):
    date: str
    stress_level: int
    consumed_unlogged: bool = False
    backfill_events: list[EventCreate] = Field(default_factory=list)
    notes: str = ""


class FenceCreate(BaseModel):
    fence_id: Optional[str] = None
    owner: str = "public"  # "public" or a user id
    lat: float
    lon: float
    radius_m: float
    kind: str = "alcohol-spot"
    label: str = ""
    l_min_s: Optional[float] = None
    l_max_s: Optional[float] = None


class PostCreate(BaseModel):
    title: str
    body: str


class CommentCreate(BaseModel):
    body: str


class AuthContext:
    def __init__(self, user_id: Optional[str], is_operator: bool):
        self.user_id = user_id
        self.is_operator = is_operator

    def require_user(self, user_id: str) -> None:
        if not self.is_operator and self.user_id != user_id:
            raise HTTPException(403, detail="token does not grant access to this user")


def create_app(config: ServiceConfig, clock=None, store: Optional[Store] = None) -> FastAPI:
    state = AppState(config, clock=clock, store=store)
    run_scheduler = clock is None  # virtual-clock tests drive ticks themselves

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        stop = threading.Event()
        worker = None
        if run_scheduler:
            worker = threading.Thread(
                target=_scheduler_loop, args=(state, stop), name="addictfree-scheduler", daemon=True
            )
            worker.start()
        yield
        stop.set()
        if worker is not None:
            worker.join(timeout=5)
        state.pump()
        state.store.close()

    app = FastAPI(title="addictfree", version=__version__, lifespan=lifespan)
    app.state.app_state = state

    def auth(request: Request) -> AuthContext:
        header = request.headers.get("authorization", "")
        if not header.lower().startswith("bearer "):
            raise HTTPException(401, detail="missing bearer token")
        token = header.split(" ", 1)[1].strip()
        if token == config.operator_token:
            return AuthContext(None, True)
        entry = state.store.get(NS_TOKENS, token)
        if entry is None:
            raise HTTPException(401, detail="unknown token")
        return AuthContext(entry[0].decode(), False)

    # -- health ------------------------------------------------------------

    @app.get("/health")
    def health():
        return {"ok": True, "version": __version__}

    # -- users ---------------------------------------------------------------

    @app.post("/v1/users", status_code=201)
    def create_user(body: UserCreate, ctx: AuthContext = Depends(auth)):
        if not ctx.is_operator:
            raise HTTPException(403, detail="only the operator creates accounts")
        user_id = "u-" + uuid.uuid4().hex[:10]
        try:
            user = UserProfile(
                user_id=user_id,
                display_name=body.display_name,
                addiction_kinds=frozenset(AddictionKind(k) for k in body.addiction_kinds),
                recovery_stage=RecoveryStage(body.recovery_stage),
                interests=tuple(InterestTag.from_dict(t) for t in body.interests),
                home_region=GeoPoint.from_dict(body.home_region) if body.home_region else None,
                created_at=state.now(),
                utc_offset_minutes=body.utc_offset_minutes,
            )
        except ValueError as exc:
            raise HTTPException(400, detail=str(exc))
        state.save_user(user)
        token = uuid.uuid4().hex
        state.store.put(NS_TOKENS, token, user_id.encode())
        return {"user": user.to_dict(), "token": token}

    @app.get("/v1/users/{user_id}")
    def get_user(user_id: str, ctx: AuthContext = Depends(auth)):
        ctx.require_user(user_id)
        user = state.load_user(user_id)
        if user is None:
            raise HTTPException(404, detail="UnknownUser")
        return user.to_dict()

    # -- ingestion -----------------------------------------------------------

    @app.post("/v1/users/{user_id}/events", status_code=201)
    def post_event(user_id: str, body: EventCreate, ctx: AuthContext = Depends(auth)):
        ctx.require_user(user_id)
        if state.load_user(user_id) is None:
            raise HTTPException(404, detail="UnknownUser")
        try:
            event = ConsumptionEvent(
                event_id=body.event_id or "e-" + uuid.uuid4().hex[:10],
                user_id=user_id,
                substance=AddictionKind(body.substance),
                quantity=body.quantity,
                at=parse_dt(body.at),
                location=GeoPoint.from_dict(body.location) if body.location else None,
                source=EventSource(body.source),
            )
            event = state.ingest_event(event)
        except EventRejected as exc:
            raise HTTPException(400, detail=exc.code.value)
        except ValueError as exc:
            raise HTTPException(400, detail=str(exc))
        return event.to_dict()

    @app.post("/v1/users/{user_id}/fixes", status_code=201)
    def post_fix(user_id: str, body: FixCreate, ctx: AuthContext = Depends(auth)):
        ctx.require_user(user_id)
        try:
            fix = LocationFix(user_id, GeoPoint(body.lat, body.lon), parse_dt(body.at), body.accuracy_m)
            machine, events = state.ingest_fix(fix)
        except UnknownUser:
            raise HTTPException(404, detail="UnknownUser")
        except OutOfOrderFix:
            raise HTTPException(409, detail="OutOfOrderFix")
        except AmbiguousFences as exc:
            raise HTTPException(409, detail=f"AmbiguousFences: {exc}")
        except ValueError as exc:
            raise HTTPException(400, detail=str(exc))
        return {
            "mode": machine.mode.value,
            "fence_id": machine.fence_id,
            "events": [e.to_dict() for e in events],
        }

    @app.post("/v1/users/{user_id}/feedback", status_code=201)
    def post_feedback(user_id: str, body: FeedbackCreate, ctx: AuthContext = Depends(auth)):
        ctx.require_user(user_id)
        if state.load_user(user_id) is None:
            raise HTTPException(404, detail="UnknownUser")
        try:
            fb = DailyFeedback(
                user_id=user_id,
                date=date.fromisoformat(body.date),
                stress_level=body.stress_level,
                consumed_unlogged=body.consumed_unlogged,
                backfill_events=tuple(
                    ConsumptionEvent(
                        event_id=e.event_id or "e-" + uuid.uuid4().hex[:10],
                        user_id=user_id,
                        substance=AddictionKind(e.substance),
                        quantity=e.quantity,
                        at=parse_dt(e.at),
                        location=GeoPoint.from_dict(e.location) if e.location else None,
                        source=EventSource.SURVEY_BACKFILL,
                    )
                    for e in body.backfill_events
                ),
                notes=body.notes,
            )
            state.ingest_feedback(fb)
        except EventRejected as exc:
            raise HTTPException(400, detail=exc.code.value)
        except ValueError as exc:
            raise HTTPException(400, detail=str(exc))
        return fb.to_dict()

    # -- fences --------------------------------------------------------------

    @app.post("/v1/fences", status_code=201)
    def post_fence(body: FenceCreate, ctx: AuthContext = Depends(auth)):
        owner_id = None if body.owner == "public" else body.owner
        if owner_id is None and not ctx.is_operator:
            raise HTTPException(403, detail="public fences are operator-managed")
        if owner_id is not None:
            ctx.require_user(owner_id)
        constraint = None
        if body.l_min_s is not None or body.l_max_s is not None:
            constraint = DurationConstraint(
                l_min=body.l_min_s or 0.0,
                l_max=body.l_max_s if body.l_max_s is not None else 0.0,
                applies_to=ConstraintScope.FENCE_STATE,
            )
        try:
            fence = Geofence(
                fence_id=body.fence_id or "f-" + uuid.uuid4().hex[:10],
                center=GeoPoint(body.lat, body.lon),
                radius_m=body.radius_m,
                kind=FenceKind(body.kind),
                owner_id=owner_id,
                state_constraint=constraint,
                label=body.label,
            )
            state.create_fence(fence)
        except AmbiguousFences as exc:
            raise HTTPException(409, detail=f"OverlappingFences: {exc}")
        except ValueError as exc:
            raise HTTPException(400, detail=str(exc))
        return fence.to_dict()

    @app.get("/v1/users/{user_id}/fences")
    def get_fences(user_id: str, ctx: AuthContext = Depends(auth)):
        ctx.require_user(user_id)
        user = state.load_user(user_id)
        if user is None:
            raise HTTPException(404, detail="UnknownUser")
        return [f.to_dict() for f in active_fences_for(user, state.all_fences())]

    @app.delete("/v1/fences/{fence_id}")
    def delete_fence(fence_id: str, ctx: AuthContext = Depends(auth)):
        entry = state.store.get(NS_FENCES, fence_id)
        if entry is None:
            raise HTTPException(404, detail="UnknownFence")
        fence = Geofence.from_dict(json.loads(entry[0]))
        if fence.owner_id is None:
            if not ctx.is_operator:
                raise HTTPException(403, detail="public fences are operator-managed")
        else:
            ctx.require_user(fence.owner_id)
        state.store.delete(NS_FENCES, fence_id)
        return {"deleted": fence_id}

    # -- summaries -----------------------------------------------------------

    def _user_or_404(user_id: str) -> UserProfile:
        user = state.load_user(user_id)
        if user is None:
            raise HTTPException(404, detail="UnknownUser")
        return user

    @app.get("/v1/users/{user_id}/summary/daily")
    def get_daily(user_id: str, date_: str = Query(alias="date"), ctx: AuthContext = Depends(auth)):
        ctx.require_user(user_id)
        user = _user_or_404(user_id)
        day = date.fromisoformat(date_)
        return daily_summary(state.user_events(user_id), day, user.utc_offset_minutes).to_dict()

    @app.get("/v1/users/{user_id}/summary/weekly")
    def get_weekly(user_id: str, week_start: str, ctx: AuthContext = Depends(auth)):
        ctx.require_user(user_id)
        user = _user_or_404(user_id)
        try:
            scores = weekly_scores(
                state.user_events(user_id),
                state.user_feedback(user_id),
                date.fromisoformat(week_start),
                user.utc_offset_minutes,
            )
        except ValueError as exc:
            raise HTTPException(400, detail=str(exc))
        return scores.to_dict()

    @app.get("/v1/users/{user_id}/summary/monthly")
    def get_monthly(user_id: str, month: str, ctx: AuthContext = Depends(auth)):
        ctx.require_user(user_id)
        user = _user_or_404(user_id)
        try:
            series = monthly_series(state.user_events(user_id), month, user.utc_offset_minutes)
        except ValueError as exc:
            raise HTTPException(400, detail=str(exc))
        return series.to_dict()

    @app.get("/v1/users/{user_id}/summary/monthly.csv")
    def get_monthly_csv(user_id: str, month: str, ctx: AuthContext = Depends(auth)):
        ctx.require_user(user_id)
        user = _user_or_404(user_id)
        series = monthly_series(state.user_events(user_id), month, user.utc_offset_minutes)
        return {"csv": export_month_csv(series)}

    # -- predictions ---------------------------------------------------------

    @app.get("/v1/users/{user_id}/prediction")
    def get_prediction(user_id: str, horizon: int = 24, ctx: AuthContext = Depends(auth)):
        ctx.require_user(user_id)
        user = _user_or_404(user_id)
        try:
            predictions = state.predictions_for(user, horizon)
        except LookupError:
            raise HTTPException(409, detail="NoModel")
        except InsufficientHistory:
            raise HTTPException(409, detail="InsufficientHistory")
        peak = min(predictions, key=lambda hp: (-hp[1], hp[0]))
        return {
            "hours": [{"hour_start": h.isoformat(), "probability": p} for h, p in predictions],
            "peak": {"hour_start": peak[0].isoformat(), "probability": peak[1]},
        }

    # -- notifications -------------------------------------------------------

    @app.get("/v1/users/{user_id}/notifications")
    def get_notifications(user_id: str, since: Optional[str] = None, ctx: AuthContext = Depends(auth)):
        ctx.require_user(user_id)
        _user_or_404(user_id)
        since_dt = parse_dt(since) if since else None
        return [n.to_dict() for n in state.notifications_for(user_id, since_dt)]

    # -- community -----------------------------------------------------------

    @app.post("/v1/posts", status_code=201)
    def create_post(body: PostCreate, ctx: AuthContext = Depends(auth)):
        if ctx.user_id is None:
            raise HTTPException(403, detail="posting requires a user token")
        board = CommunityBoard(state.store)
        try:
            post = board.create_post(ctx.user_id, body.title, body.body, state.now())
        except EmptyTitle:
            raise HTTPException(400, detail="EmptyTitle")
        except EmptyBody:
            raise HTTPException(400, detail="EmptyBody")
        except UnknownUser:
            raise HTTPException(404, detail="UnknownUser")
        return post.to_dict()

    @app.get("/v1/posts")
    def list_posts(ctx: AuthContext = Depends(auth)):
        return [p.to_dict() for p in CommunityBoard(state.store).list_feed()]

    @app.post("/v1/posts/{post_id}/comments", status_code=201)
    def add_comment(post_id: str, body: CommentCreate, ctx: AuthContext = Depends(auth)):
        if ctx.user_id is None:
            raise HTTPException(403, detail="commenting requires a user token")
        board = CommunityBoard(state.store)
        try:
            comment = board.add_comment(post_id, ctx.user_id, body.body, state.now())
        except EmptyBody:
            raise HTTPException(400, detail="EmptyBody")
        except UnknownPost:
            raise HTTPException(404, detail="UnknownPost")
        except UnknownUser:
            raise HTTPException(404, detail="UnknownUser")
        return comment.to_dict()

    @app.get("/v1/users/{user_id}/connections")
    def get_connections(user_id: str, k: int = 5, ctx: AuthContext = Depends(auth)):
        ctx.require_user(user_id)
        user = _user_or_404(user_id)
        suggestions = suggest_connections(user, state.all_users(), k)
        return [s.to_dict() for s in suggestions]

    return app


def _scheduler_loop(state: AppState, stop: threading.Event) -> None:
    """Single periodic loop: deliver due notifications every few seconds and
    run the hourly tick once per wall-clock hour."""
    last_tick_hour = None
    while not stop.wait(2.0):
        try:
            state.pump()
            now = state.now()
            hour = now.replace(minute=0, second=0, microsecond=0)
            if hour != last_tick_hour:
                last_tick_hour = hour
                state.hourly_tick(now)
        except Exception:
            logger.exception("scheduler loop iteration failed")


def serve(config: ServiceConfig) -> None:
    """Run until shutdown; flushes the queue and closes the store on exit."""
    import uvicorn

    logging.basicConfig(level=config.log_level.upper())
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level=config.log_level.lower())
