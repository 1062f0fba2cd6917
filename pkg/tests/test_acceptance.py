"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line. Run with `pytest tests/test_acceptance.py -s` to see them.
"""

from __future__ import annotations

import json
import math
import random
import time
from datetime import date, datetime, timedelta, timezone

import numpy as np
import pytest
from fastapi.testclient import TestClient

from addictfree.clock import ManualClock
from addictfree.domain import AddictionKind, DailyFeedback, GeoPoint
from addictfree.geo import (
    EARTH_RADIUS_M,
    ConstraintScope,
    DurationConstraint,
    FenceKind,
    FenceMachine,
    Geofence,
    haversine_m,
    step,
    validate_constraints,
)
from addictfree.lstm import TrainConfig, gradient, init_params, train
from addictfree.predictor import extract_features, feature_matrix, predict_next_hours
from addictfree.service import create_app, parse_dt
from addictfree.simulator import (
    Scenario,
    UserBehavior,
    generate,
    oracle_auc,
    oracle_fence_events,
)
from addictfree.stats import daily_summary, monthly_series, weekly_scores
from addictfree.store import Store

from conftest import T0, make_event, ts
from equiv_helpers import random_fence_world
from test_lstm import finite_difference_gradient, flatten
from test_service import OP, POI_CSV, create_user, feed_history, make_config
from test_store import TornFile


def report(criterion: int, description: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    line = f"[{status}] criterion {criterion}: {description}"
    if detail:
        line += f" ({detail})"
    print(line)
    assert ok, line


class TestCriterion1GeofenceOracleEquivalence:
    def test_thousand_scenarios_byte_for_byte(self):
        t0 = time.monotonic()
        checked_events = 0
        for seed in range(1000):
            fences, transitions, fixes = random_fence_world(seed)
            machine = FenceMachine("u1")
            got = []
            for fix in fixes:
                machine, events = step(machine, fences, fix, transitions)
                got.extend(events)
            expected = oracle_fence_events(fixes, fences, transitions)
            got_bytes = json.dumps([e.to_dict() for e in got])
            expected_bytes = json.dumps([e.to_dict() for e in expected])
            assert got_bytes == expected_bytes, f"scenario {seed} diverged"
            checked_events += len(expected)
        elapsed = time.monotonic() - t0
        report(
            1,
            "geo-engine equals brute-force oracle on 1000 scenarios",
            elapsed < 60.0,
            f"{checked_events} events compared in {elapsed:.1f}s",
        )


class TestCriterion2ConstraintValidation:
    def test_ten_thousand_random_tuples(self):
        rng = random.Random(20240603)
        interesting = [-1.0, 0.0, 1e-9, 60.0, 300.0, 300.0, 3600.0]
        checked = 0
        for _ in range(10_000):
            l_min = rng.choice(interesting + [rng.uniform(-10, 4000)])
            l_max = rng.choice(interesting + [rng.uniform(-10, 4000)])
            state_ok = l_min >= 0 and l_max > 0 and l_min < l_max
            trans_ok = l_min >= 0 and l_max > 0 and l_min <= l_max
            f = Geofence(
                "x", GeoPoint(0, 0), 50, FenceKind.CUSTOM,
                state_constraint=DurationConstraint(l_min, l_max, ConstraintScope.FENCE_STATE),
            )
            t = DurationConstraint(l_min, l_max, ConstraintScope.TRANSITION)
            assert (validate_constraints([f]) == []) == state_ok, (l_min, l_max)
            assert (validate_constraints([], [t]) == []) == trans_ok, (l_min, l_max)
            checked += 1
        report(2, "duration-constraint validation matches the admission clauses", checked == 10_000,
               f"{checked} tuples")


class TestCriterion3GradientCheck:
    def test_analytic_vs_central_differences(self):
        t0 = time.monotonic()
        p = init_params(3, 5, seed=3)
        rng = np.random.default_rng(103)
        xs = rng.uniform(0, 2, (12, 5))
        ys = rng.integers(0, 2, 11).astype(float)
        batch = [(xs, ys)]
        analytic = flatten(gradient(p, batch))
        numeric = finite_difference_gradient(p, batch, step_size=1e-5)
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
        max_rel = float(np.max(np.abs(analytic - numeric) / denom))
        elapsed = time.monotonic() - t0
        report(3, "BPTT gradient matches finite differences",
               max_rel < 1e-4 and elapsed < 10.0,
               f"max rel err {max_rel:.2e} in {elapsed:.1f}s")


class TestCriterion4PlantedPatternLearnability:
    def test_hour18_pattern_recovered(self):
        t0 = time.monotonic()
        relapse_hours = {18: 0.9}
        for h in range(24):
            if h != 18:
                relapse_hours[h] = 0.02
        scenario = Scenario(
            seed=1, days=74,
            users=(UserBehavior(user_id="u0", substance=AddictionKind.ALCOHOL,
                                relapse_hours=relapse_hours),),
        )
        events, _, _ = generate(scenario)
        start = datetime(2024, 1, 1, tzinfo=timezone.utc)
        features, labels = extract_features(events, [], start + timedelta(days=74), 74 * 24)
        X = feature_matrix(features)
        y = np.array(labels)
        train_steps = 60 * 24
        batch = [(X[i : i + 240], y[i : i + 239]) for i in range(0, train_steps, 240)]
        cfg = TrainConfig(learning_rate=0.1, epochs=1200, seed=0, gradient_clip=5.0, hidden_size=16)
        params = train(init_params(16, 5, seed=cfg.seed), batch, cfg)

        # Held-out next-hour AUC: forward over real features (14 warmup days
        # of state, then the 14 test days), graded against the planted
        # schedule. The 2% noise events are irreducible by construction, so
        # recovery of the plant is what is scored.
        from addictfree.lstm import forward

        warmup = 336
        eval_X = X[train_steps - warmup :]
        probs = forward(params, eval_X)
        preds, pattern_labels = [], []
        for k in range(len(eval_X) - 1):
            target = (train_steps - warmup) + k + 1
            if target < train_steps:
                continue
            preds.append(probs[k])
            pattern_labels.append(1.0 if target % 24 == 18 else 0.0)
        auc = oracle_auc(preds, pattern_labels)

        # Peak-hour identification: the product's autoregressive rollout, run
        # each test morning.
        hits = 0
        for day in range(60, 74):
            now = start + timedelta(days=day)
            history = [e for e in events if e.at < now]
            rollout = predict_next_hours(params, history, [], now, horizon_hours=24, window_hours=720)
            peak_hour, _ = max(rollout, key=lambda hp: hp[1])
            hits += peak_hour.hour == 18
        elapsed = time.monotonic() - t0
        report(4, "planted 18:00 pattern learned from 60 noisy days",
               auc >= 0.9 and hits >= math.ceil(0.9 * 14) and elapsed < 300.0,
               f"AUC {auc:.3f}, argmax 18 on {hits}/14 test days, {elapsed:.0f}s")


class TestCriterion5PreRelapseTiming:
    def test_scheduled_exactly_600s_before_peak(self, tmp_path):
        clock = ManualClock(ts(minutes=5))
        config = make_config(tmp_path)
        app = create_app(config, clock=clock)
        with TestClient(app) as client:
            uid, h = create_user(client)
            feed_history(client, uid, h)
            app.state.app_state.hourly_tick(clock.now())
            pred = client.get(f"/v1/users/{uid}/prediction", params={"horizon": 24}, headers=h).json()
            feed = client.get(f"/v1/users/{uid}/notifications", headers=h).json()
            pre = [n for n in feed if n["kind"] == "pre-relapse-diversion"]
            assert len(pre) == 1
            peak = parse_dt(pred["peak"]["hour_start"])
            scheduled = parse_dt(pre[0]["scheduled_for"])
            delta = (peak - scheduled).total_seconds()
            report(5, "pre-relapse notification lands exactly 600 s before the peak",
                   delta == 600.0, f"delta {delta:.0f}s")


class TestCriterion6StatsConservationAndBounds:
    def test_thousand_random_streams(self):
        rng = random.Random(77)
        month_first = date(2024, 6, 1)
        week_monday = date(2024, 6, 3)
        for trial in range(1000):
            events = []
            for i in range(rng.randint(0, 40)):
                substance = rng.choice(list(AddictionKind))
                quantity = float(rng.randint(0, 30)) if substance is AddictionKind.TOBACCO else rng.uniform(0, 40)
                at = T0 + timedelta(
                    days=rng.randint(-10, 20), hours=rng.randint(0, 23), minutes=rng.randint(0, 59)
                )
                events.append(make_event(f"s{trial}-{i}", substance=substance, quantity=quantity, at=at))
            feedback = [
                DailyFeedback("u1", week_monday + timedelta(days=d), rng.randint(1, 5))
                for d in range(7)
                if rng.random() < 0.5
            ]
            series = monthly_series(events, "2024-06")
            for row in series.days:
                assert row == daily_summary(events, row.date), "conservation violated"
            scores = weekly_scores(events, feedback, week_monday)
            for day in scores.days:
                for v in (day.alcohol_score, day.smoking_score, day.fitness_score):
                    assert 1.0 <= v <= 10.0, "score out of bounds"
        clean = weekly_scores([], [], week_monday)
        all_ten = all(d.alcohol_score == 10.0 and d.smoking_score == 10.0 for d in clean.days)
        report(6, "monthly totals conserve daily sums; weekly scores bounded; clean week = 10",
               all_ten, "1000 streams")


class TestCriterion7StoreCrashSafety:
    def test_hundred_injected_interruptions(self, tmp_path):
        old, new = b'{"v":"old"}' * 4, b'{"v":"new-longer"}' * 5
        torn_reads = 0
        outcomes = {"old": 0, "new": 0}
        for i in range(100):
            path = tmp_path / f"c{i}.db"
            store = Store(path)
            store.put("users", "k", old)
            if i % 5 == 4:
                # record fully written, crash before fsync returns
                torn = TornFile(store._fh, 10_000)
                torn.fileno = lambda: (_ for _ in ()).throw(OSError("crash before fsync"))
                store._fh = torn
            else:
                # crash partway through the record bytes
                store._fh = TornFile(store._fh, (i * 13) % 120)
            with pytest.raises(OSError):
                store.put("users", "k", new)
            store._fh._fh.close()
            recovered = Store(path)
            value, _ = recovered.get("users", "k")
            if value == old:
                outcomes["old"] += 1
            elif value == new:
                outcomes["new"] += 1
            else:
                torn_reads += 1
            recovered.close()
        report(7, "100 mid-write crashes leave old or new value, never torn",
               torn_reads == 0 and outcomes["old"] > 0 and outcomes["new"] > 0
               and outcomes["old"] + outcomes["new"] == 100,
               f"{outcomes['old']} old / {outcomes['new']} new / {torn_reads} torn")


class TestCriterion8EndToEndService:
    def test_fence_entry_diversion_via_http(self, tmp_path):
        clock = ManualClock(T0)
        config = make_config(tmp_path)
        app = create_app(config, clock=clock)
        with TestClient(app) as client:
            state = app.state.app_state
            uid, h = create_user(client)
            state.import_pois(POI_CSV)
            r = client.post(
                "/v1/fences",
                json={"fence_id": "bar1", "lat": 33.58, "lon": -101.87, "radius_m": 120,
                      "kind": "alcohol-spot", "label": "Joe's Bar"},
                headers=OP,
            )
            assert r.status_code == 201

            # simulator fixture: approach then enter
            scenario = Scenario(
                seed=5, days=1,
                users=(UserBehavior(user_id=uid, home=GeoPoint(33.60, -101.87)),),
                start_at=T0,
            )
            _, fixes, _ = generate(scenario)
            inside_at = None
            for fix in fixes[:3]:
                clock.set(fix.at)
                client.post(
                    f"/v1/users/{uid}/fixes",
                    json={"lat": fix.point.lat, "lon": fix.point.lon, "at": fix.at.isoformat()},
                    headers=h,
                )
            # now walk into the fence
            enter_at = fixes[3].at
            clock.set(enter_at)
            r = client.post(
                f"/v1/users/{uid}/fixes",
                json={"lat": 33.58, "lon": -101.87, "at": enter_at.isoformat()},
                headers=h,
            )
            assert r.status_code == 201
            assert [e["kind"] for e in r.json()["events"]] == ["Entered"]

            feed = client.get(f"/v1/users/{uid}/notifications", headers=h).json()
            entries = [n for n in feed if n["kind"] == "fence-entry-diversion"]
            assert len(entries) == 1, "diversion must appear within one fix of entering"
            rec = entries[0]["recommendation"]
            assert rec is not None
            poi_point = GeoPoint(rec["location"]["lat"], rec["location"]["lon"])
            dist = haversine_m(GeoPoint(33.58, -101.87), poi_point)
            ok = rec["theme"] == "food" and rec["open"] is True and dist <= 2000.0
            report(8, "fence entry over HTTP yields a theme-matched open POI within 2 km",
                   ok, f"poi {rec['poi_id']} at {dist:.0f} m")

    def test_tick_scales_to_hundred_users(self, tmp_path):
        clock = ManualClock(T0)
        config = make_config(tmp_path)
        app = create_app(config, clock=clock)
        with TestClient(app) as client:
            state = app.state.app_state
            tokens = {}
            for n in range(100):
                uid, h = create_user(client, f"user{n}")
                tokens[uid] = h
            # a handful have enough history for models
            for uid in list(tokens)[:5]:
                feed_history(client, uid, tokens[uid])
            state.hourly_tick(clock.now())  # trains the 5 models
            t0 = time.monotonic()
            state.hourly_tick(clock.now() + timedelta(hours=1))
            elapsed = time.monotonic() - t0
            report(8, "steady-state hourly tick for 100 users stays under 5 s",
                   elapsed < 5.0, f"{elapsed:.2f}s")


class TestCriterion9Haversine:
    def test_equatorial_degree_symmetry_and_triangle(self):
        d = haversine_m(GeoPoint(0, 0), GeoPoint(0, 1))
        closed_form = EARTH_RADIUS_M * math.pi / 180.0
        value_ok = abs(d - 111_194.93) <= 0.01 and abs(d - closed_form) < 1e-6

        rng = random.Random(9)
        symmetric = True
        for _ in range(100):
            a = GeoPoint(rng.uniform(-90, 90), rng.uniform(-180, 180))
            b = GeoPoint(rng.uniform(-90, 90), rng.uniform(-180, 180))
            if haversine_m(a, b) != haversine_m(b, a):
                symmetric = False
        triangle = True
        for _ in range(500):
            pts = [GeoPoint(rng.uniform(-89, 89), rng.uniform(-179, 179)) for _ in range(3)]
            ab = haversine_m(pts[0], pts[1])
            bc = haversine_m(pts[1], pts[2])
            ac = haversine_m(pts[0], pts[2])
            if ac > (ab + bc) * (1 + 1e-6) + 1e-9:
                triangle = False
        report(9, "haversine: equator degree 111,194.93 m, symmetric, triangle inequality",
               value_ok and symmetric and triangle, f"degree = {d:.2f} m")
