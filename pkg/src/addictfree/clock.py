"""Injected clock: wall time in production, manual time in tests, so
notification timing and geofence dwell are deterministic under test."""

from __future__ import annotations

import threading
from datetime import datetime, timedelta, timezone


class WallClock:
    def now(self) -> datetime:
        return datetime.now(timezone.utc)


class ManualClock:
    """Thread-safe virtual clock; advances only when told to."""

    def __init__(self, start: datetime):
        if start.tzinfo is None:
            raise ValueError("start must be timezone-aware")
        self._now = start.astimezone(timezone.utc)
        self._lock = threading.Lock()

    def now(self) -> datetime:
        with self._lock:
            return self._now

    def advance(self, seconds: float) -> datetime:
        with self._lock:
            self._now += timedelta(seconds=seconds)
            return self._now

    def set(self, at: datetime) -> None:
        if at.tzinfo is None:
            raise ValueError("at must be timezone-aware")
        with self._lock:
            self._now = at.astimezone(timezone.utc)
