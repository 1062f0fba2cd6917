"""Hourly feature extraction and next-hours relapse prediction.

Feature layout per hour bucket (m = 5, all finite, calendar terms in [0,1]):

    [alcohol_oz, cigarettes, hour_of_day/23, day_of_week/6, stress/5]

stress comes from the day's feedback survey and is 0 when no feedback exists.
The label for bucket t is 1 iff any consumption event falls in bucket t+1, so
a window of T hours yields T-1 labels.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Sequence

import numpy as np

from .domain import AddictionKind, ConsumptionEvent, DailyFeedback, as_utc
from .lstm import FEATURE_COUNT, LstmParams, forward


class EmptyWindow(ValueError):
    pass


class InsufficientHistory(ValueError):
    pass


@dataclass(frozen=True)
class FeatureVector:
    hour_index: int
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != FEATURE_COUNT:
            raise ValueError(f"expected {FEATURE_COUNT} features, got {len(self.values)}")


def floor_hour(at: datetime) -> datetime:
    at = as_utc(at)
    return at.replace(minute=0, second=0, microsecond=0)


def _calendar_features(bucket_start: datetime) -> tuple[float, float]:
    return bucket_start.hour / 23.0, bucket_start.weekday() / 6.0


def _bucket_values(
    bucket_start: datetime,
    alcohol_oz: float,
    cigarettes: float,
    stress_by_date: dict,
) -> tuple[float, ...]:
    hod, dow = _calendar_features(bucket_start)
    stress = stress_by_date.get(bucket_start.date(), 0.0)
    return (alcohol_oz, cigarettes, hod, dow, stress)


def extract_features(
    events: Sequence[ConsumptionEvent],
    feedback: Sequence[DailyFeedback],
    window_end: datetime,
    window_hours: int = 720,
) -> tuple[list[FeatureVector], list[float]]:
    """One FeatureVector per hour of [window_end - window_hours, window_end).

    Quantities are summed per bucket per substance. Returns (features,
    labels); labels has window_hours - 1 entries since the last bucket has no
    successor inside the window.
    """
    if window_hours < 2:
        raise EmptyWindow(f"window_hours={window_hours}; need at least 2")
    window_end = as_utc(window_end)
    window_start = window_end - timedelta(hours=window_hours)

    alcohol = np.zeros(window_hours)
    cigarettes = np.zeros(window_hours)
    consumed = np.zeros(window_hours, dtype=bool)
    for e in events:
        if not (window_start <= e.at < window_end):
            continue
        t = int((e.at - window_start).total_seconds() // 3600)
        consumed[t] = True
        if e.substance is AddictionKind.ALCOHOL:
            alcohol[t] += e.quantity
        else:
            cigarettes[t] += e.quantity

    stress_by_date = {fb.date: fb.stress_level / 5.0 for fb in feedback}

    features = []
    for t in range(window_hours):
        bucket_start = window_start + timedelta(hours=t)
        features.append(
            FeatureVector(t, _bucket_values(bucket_start, alcohol[t], cigarettes[t], stress_by_date))
        )
    labels = [1.0 if consumed[t + 1] else 0.0 for t in range(window_hours - 1)]
    return features, labels


def feature_matrix(features: Sequence[FeatureVector]) -> np.ndarray:
    return np.array([f.values for f in features], dtype=float)


def predict_next_hours(
    p: LstmParams,
    events: Sequence[ConsumptionEvent],
    feedback: Sequence[DailyFeedback],
    now: datetime,
    horizon_hours: int = 24,
    window_hours: int = 720,
) -> list[tuple[datetime, float]]:
    """Autoregressive rollout of next-hour relapse probabilities.

    The first entry is the model's output on real features up to now; later
    hours feed zero consumption with advancing calendar features. Requires at
    least 48 hours of history before now.
    """
    if horizon_hours < 1:
        raise ValueError("horizon_hours must be >= 1")
    now = as_utc(now)
    if not events:
        raise InsufficientHistory("no consumption history")
    first_at = min(e.at for e in events)
    if (now - first_at) < timedelta(hours=48):
        raise InsufficientHistory(f"history starts {first_at.isoformat()}, < 48 h before now")

    # Window ends at the next hour boundary so the current partial hour is the
    # final real bucket and the first prediction targets the next full hour.
    window_end = floor_hour(now)
    if window_end < now:
        window_end += timedelta(hours=1)

    features, _ = extract_features(events, feedback, window_end, window_hours)
    xs = feature_matrix(features)
    future = []
    for j in range(horizon_hours - 1):
        bucket_start = window_end + timedelta(hours=j)
        future.append(_bucket_values(bucket_start, 0.0, 0.0, {}))
    if future:
        xs = np.vstack([xs, np.array(future)])

    probs = forward(p, xs)
    out = []
    for j in range(horizon_hours):
        hour_start = window_end + timedelta(hours=j)
        out.append((hour_start, float(probs[window_hours - 1 + j])))
    return out
