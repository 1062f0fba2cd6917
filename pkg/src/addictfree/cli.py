"""Operator CLI: serve the API, import POIs, seed simulated data, train a
user's model and export monthly CSVs. The config file comes from --config or
the ADDICTFREE_CONFIG environment variable."""

from __future__ import annotations

import json

import click

from .config import load_config
from .service import AppState, serve
from .simulator import Scenario, generate


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="Path to the JSON config (default: $ADDICTFREE_CONFIG).")
@click.pass_context
def main(ctx, config_path):
    ctx.obj = load_config(config_path)


@main.command("serve")
@click.pass_obj
def serve_cmd(config):
    """Run the HTTP service until interrupted."""
    serve(config)


@main.command("import-pois")
@click.argument("csv_path", type=click.Path(exists=True))
@click.pass_obj
def import_pois_cmd(config, csv_path):
    """Load the POI database from a poi_id,name,lat,lon,theme,open CSV."""
    state = AppState(config)
    with open(csv_path) as fh:
        n = state.import_pois(fh.read())
    state.store.close()
    click.echo(f"imported {n} POIs")


@main.command("simulate")
@click.argument("scenario_path", type=click.Path(exists=True))
@click.pass_obj
def simulate_cmd(config, scenario_path):
    """Generate a scenario's events, fixes and feedback into the store,
    creating profiles for any scenario users that do not exist yet."""
    from addictfree.domain import InterestTag, InterestTheme, RecoveryStage, UserProfile

    scenario = Scenario.from_dict(json.loads(open(scenario_path).read()))
    events, fixes, feedback = generate(scenario)
    state = AppState(config)
    known = {u.user_id for u in state.all_users()}
    created = 0
    for behavior in scenario.users:
        if behavior.user_id in known:
            continue
        state.save_user(
            UserProfile(
                user_id=behavior.user_id,
                display_name=behavior.user_id,
                addiction_kinds=frozenset({behavior.substance}),
                recovery_stage=RecoveryStage.EARLY_RECOVERY,
                interests=(InterestTag(InterestTheme.FOOD),),
                home_region=behavior.home,
                created_at=state.now(),
            )
        )
        created += 1
    for e in events:
        state.ingest_event(e)
    for fb in feedback:
        state.ingest_feedback(fb)
    for fx in fixes:
        state.ingest_fix(fx)
    state.pump()
    state.store.close()
    click.echo(
        f"created {created} users; ingested {len(events)} events, "
        f"{len(fixes)} fixes, {len(feedback)} feedback entries"
    )


@main.command("train-user")
@click.argument("user_id")
@click.pass_obj
def train_user_cmd(config, user_id):
    """Train (or retrain) one user's relapse model from their history."""
    state = AppState(config)
    user = state.load_user(user_id)
    if user is None:
        raise click.ClickException(f"unknown user {user_id}")
    ok = state.train_user_model(user, state.now())
    state.store.close()
    if not ok:
        raise click.ClickException("insufficient history (< 48 h)")
    click.echo(f"model trained for {user_id}")


@main.command("export-month")
@click.argument("user_id")
@click.argument("month")  # YYYY-MM
@click.pass_obj
def export_month_cmd(config, user_id, month):
    """Print the month's consumption series as CSV."""
    from .stats import export_month_csv, monthly_series

    state = AppState(config)
    user = state.load_user(user_id)
    if user is None:
        raise click.ClickException(f"unknown user {user_id}")
    series = monthly_series(state.user_events(user_id), month, user.utc_offset_minutes)
    state.store.close()
    click.echo(export_month_csv(series), nl=False)


if __name__ == "__main__":
    main()
