"""Recovery summaries: daily counts, monthly trend series and the weekly
1-10 normalized alcohol/smoking/fitness scores.

Aggregation is by calendar date in the user's configured UTC offset. The 1-10
normalization is artifact-defined: a clean day scores exactly 10, a day at or
above the personal baseline scores 1, linear in between. The baseline is the
mean daily quantity over the user's first 14 days that logged the substance
(floored at one unit).
"""

from __future__ import annotations

import calendar
import io
from dataclasses import dataclass
from datetime import date, timedelta, timezone, datetime
from typing import Optional, Sequence

from .domain import AddictionKind, ConsumptionEvent, DailyFeedback


def local_date(at: datetime, utc_offset_minutes: int = 0) -> date:
    return (at.astimezone(timezone.utc) + timedelta(minutes=utc_offset_minutes)).date()


@dataclass(frozen=True)
class DailySummary:
    date: date
    alcohol_times: int = 0
    alcohol_oz: float = 0.0
    tobacco_times: int = 0
    cigarettes: float = 0.0

    def to_dict(self) -> dict:
        return {
            "date": self.date.isoformat(),
            "alcohol_times": self.alcohol_times,
            "alcohol_oz": self.alcohol_oz,
            "tobacco_times": self.tobacco_times,
            "cigarettes": self.cigarettes,
        }


@dataclass(frozen=True)
class DayScores:
    date: date
    alcohol_score: float
    smoking_score: float
    fitness_score: float

    def to_dict(self) -> dict:
        return {
            "date": self.date.isoformat(),
            "alcohol_score": self.alcohol_score,
            "smoking_score": self.smoking_score,
            "fitness_score": self.fitness_score,
        }


@dataclass(frozen=True)
class WeeklyScores:
    week_start: date
    days: tuple[DayScores, ...]

    def to_dict(self) -> dict:
        return {"week_start": self.week_start.isoformat(), "days": [d.to_dict() for d in self.days]}


@dataclass(frozen=True)
class MonthlySeries:
    month: str  # "YYYY-MM"
    days: tuple[DailySummary, ...]

    def to_dict(self) -> dict:
        return {"month": self.month, "days": [d.to_dict() for d in self.days]}


def daily_summary(
    events: Sequence[ConsumptionEvent], day: date, utc_offset_minutes: int = 0
) -> DailySummary:
    """Totals for one local calendar date; zeros when nothing was logged."""
    alcohol_times = tobacco_times = 0
    alcohol_oz = cigarettes = 0.0
    for e in events:
        if local_date(e.at, utc_offset_minutes) != day:
            continue
        if e.substance is AddictionKind.ALCOHOL:
            alcohol_times += 1
            alcohol_oz += e.quantity
        else:
            tobacco_times += 1
            cigarettes += e.quantity
    return DailySummary(day, alcohol_times, alcohol_oz, tobacco_times, cigarettes)


def personal_baseline(
    events: Sequence[ConsumptionEvent],
    substance: AddictionKind,
    utc_offset_minutes: int = 0,
) -> float:
    """Mean daily quantity over the first 14 local dates that logged this
    substance, floored at one unit."""
    per_day: dict[date, float] = {}
    for e in events:
        if e.substance is not substance:
            continue
        d = local_date(e.at, utc_offset_minutes)
        per_day[d] = per_day.get(d, 0.0) + e.quantity
    if not per_day:
        return 1.0
    first_days = sorted(per_day)[:14]
    mean = sum(per_day[d] for d in first_days) / len(first_days)
    return max(1.0, mean)


def _substance_score(consumed: float, baseline: float) -> float:
    return 10.0 - 9.0 * min(1.0, consumed / baseline)


def _fitness_score(fb: Optional[DailyFeedback]) -> float:
    score = 1.0
    if fb is not None:
        score += 9.0 * 0.5
        if fb.stress_level <= 2:
            score += 4.5
    return min(10.0, max(1.0, score))


def weekly_scores(
    events: Sequence[ConsumptionEvent],
    feedback: Sequence[DailyFeedback],
    week_start: date,
    utc_offset_minutes: int = 0,
) -> WeeklyScores:
    """Per-day alcohol/smoking/fitness scores for the Monday-started week."""
    if week_start.weekday() != 0:
        raise ValueError(f"week_start {week_start} is not a Monday")
    alcohol_base = personal_baseline(events, AddictionKind.ALCOHOL, utc_offset_minutes)
    tobacco_base = personal_baseline(events, AddictionKind.TOBACCO, utc_offset_minutes)
    fb_by_date = {fb.date: fb for fb in feedback}
    days = []
    for offset in range(7):
        d = week_start + timedelta(days=offset)
        summary = daily_summary(events, d, utc_offset_minutes)
        days.append(
            DayScores(
                date=d,
                alcohol_score=_substance_score(summary.alcohol_oz, alcohol_base),
                smoking_score=_substance_score(summary.cigarettes, tobacco_base),
                fitness_score=_fitness_score(fb_by_date.get(d)),
            )
        )
    return WeeklyScores(week_start, tuple(days))


def month_days(month: str) -> list[date]:
    year, mon = month.split("-")
    n = calendar.monthrange(int(year), int(mon))[1]
    return [date(int(year), int(mon), d) for d in range(1, n + 1)]


def monthly_series(
    events: Sequence[ConsumptionEvent], month: str, utc_offset_minutes: int = 0
) -> MonthlySeries:
    """Per-day (times, quantity) for each substance over a calendar month;
    days with no events are zero rows."""
    days = tuple(daily_summary(events, d, utc_offset_minutes) for d in month_days(month))
    return MonthlySeries(month, days)


def export_month_csv(series: MonthlySeries) -> str:
    """CSV with columns date,substance,times,quantity (one row per substance per day)."""
    buf = io.StringIO()
    buf.write("date,substance,times,quantity\n")
    for d in series.days:
        buf.write(f"{d.date.isoformat()},alcohol,{d.alcohol_times},{d.alcohol_oz:g}\n")
        buf.write(f"{d.date.isoformat()},tobacco,{d.tobacco_times},{d.cigarettes:g}\n")
    return buf.getvalue()
