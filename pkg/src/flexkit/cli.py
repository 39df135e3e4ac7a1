"""Batch CLI for the flexibility toolkit.

Exit codes: 0 success, 1 domain error (validation, missing data, solver
preconditions), 2 usage error.  Commands that produce tabular results
take ``--output csv|document``; ``document`` emits JSON for scripting.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from . import pipeline
from .baseline import flexibility_band
from .errors import FlexError
from .pipeline import forecast_from_doc
from .spectral import dft, dominant_periods
from .storage import AssetRecord, Store
from .synth import SyntheticScenario, generate_synthetic
from .timeseries import fill_gaps, slice_month
from .vpp import (
    Contract,
    MeteredReading,
    dr_event_from_doc,
    solve_allocation,
    track_fulfillment,
)


def domain_errors(fn):
    """Map FlexError onto exit code 1 with the machine-readable code."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except FlexError as exc:
            click.echo(f"error [{exc.code}]: {exc}", err=True)
            sys.exit(1)

    return wrapper


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


def _store(data_dir: str) -> Store:
    return Store(Path(data_dir) / "flexkit.db")


@click.group()
def main():
    """Demand-response flexibility toolkit."""


# -- synth ----------------------------------------------------------------------

@main.command()
@click.option("--scenario", type=click.Choice(["industrial_park", "apartment_block"]), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", required=True, help="Directory for generated CSV files.")
@click.option("--days", type=int, default=None, help="Override scenario duration.")
@click.option("--n-buildings", type=int, default=None)
@click.option("--n-units", type=int, default=None)
@click.option("--output", type=click.Choice(["csv", "document"]), default="csv", show_default=True)
@domain_errors
def synth(scenario, seed, out_dir, days, n_buildings, n_units, output):
    """Generate a deterministic synthetic dataset."""
    params = {}
    if days is not None:
        params["days"] = days
    if n_buildings is not None:
        params["n_buildings"] = n_buildings
    if n_units is not None:
        params["n_units"] = n_units
    written = generate_synthetic(SyntheticScenario(seed, scenario, params), out_dir)
    if output == "document":
        _emit(json.dumps({"files": written}, indent=2) + "\n", None)
    else:
        for path in written:
            click.echo(path)


# -- assets & ingestion -----------------------------------------------------------

@main.group()
def asset():
    """Manage assets in the local store."""


@asset.command("add")
@click.option("--data-dir", envvar="FLEXKIT_DATA_DIR", default="./data", show_default=True)
@click.option("--id", "asset_id", required=True)
@click.option("--kind", type=click.Choice(["building_meter", "hvac_unit"]), required=True)
@click.option("--rated-kw", type=float, default=None)
@click.option("--location", default="")
@domain_errors
def asset_add(data_dir, asset_id, kind, rated_kw, location):
    """Register an asset."""
    store = _store(data_dir)
    created = store.add_asset(AssetRecord(asset_id, kind, rated_kw, location))
    click.echo(f"{'created' if created else 'exists'} {asset_id}")


@asset.command("list")
@click.option("--data-dir", envvar="FLEXKIT_DATA_DIR", default="./data", show_default=True)
@domain_errors
def asset_list(data_dir):
    for a in _store(data_dir).list_assets():
        click.echo(f"{a.asset_id},{a.kind},{a.rated_power_kw or ''}")


@main.command()
@click.option("--data-dir", envvar="FLEXKIT_DATA_DIR", default="./data", show_default=True)
@click.option("--asset", "asset_id", required=True)
@click.option("--output", type=click.Choice(["csv", "document"]), default="csv", show_default=True)
@click.argument("csv_file", type=click.Path(exists=True))
@domain_errors
def ingest(data_dir, asset_id, output, csv_file):
    """Ingest a telemetry CSV for an existing asset."""
    report = _store(data_dir).ingest_csv(csv_file, asset_id)
    if output == "document":
        _emit(
            json.dumps(
                {"rows_stored": report.rows_stored, "errors": [list(e) for e in report.errors]},
                indent=2,
            )
            + "\n",
            None,
        )
    else:
        click.echo(f"stored,{report.rows_stored}")
        for line, code, message in report.errors:
            click.echo(f"error,{line},{code},{message}")


# -- spectrum ----------------------------------------------------------------------

@main.command()
@click.option("--data-dir", envvar="FLEXKIT_DATA_DIR", default="./data", show_default=True)
@click.option("--asset", "asset_id", required=True)
@click.option("--month", required=True, help="Calendar month YYYY-MM (UTC).")
@click.option("--max-peaks", type=int, default=5, show_default=True)
@click.option("--min-relative-power", type=float, default=0.05, show_default=True)
@click.option("--detrend", type=click.Choice(["none", "remove_mean"]), default="remove_mean")
@click.option("--whole-history", is_flag=True, help="Analyze all stored data, not one month.")
@click.option("--svg", "svg_path", default=None, help="Optional magnitude plot output.")
@click.option("--output", type=click.Choice(["csv", "document"]), default="csv", show_default=True)
@click.option("--out", default=None, help="Write to file instead of stdout.")
@domain_errors
def spectrum(data_dir, asset_id, month, max_peaks, min_relative_power, detrend,
             whole_history, svg_path, output, out):
    """Emit the dominant spectral peaks of a meter series."""
    series = _store(data_dir).load_meter_series(asset_id)
    chunk = series if whole_history else slice_month(series, month)
    if chunk.gaps:
        chunk = fill_gaps(chunk, "linear_interp")
    spec = dft(chunk, detrend)
    peaks = dominant_periods(spec, max_peaks, min_relative_power)

    if svg_path:
        _write_spectrum_svg(spec, svg_path)

    if output == "document":
        doc = [
            {
                "frequency_hz": p.frequency_hz,
                "period_s": p.period_s,
                "magnitude": p.magnitude,
                "relative_power": p.relative_power,
            }
            for p in peaks
        ]
        _emit(json.dumps(doc, indent=2) + "\n", out)
    else:
        lines = ["frequency_hz,period_s,magnitude,relative_power"]
        for p in peaks:
            lines.append(
                f"{p.frequency_hz:.12e},{p.period_s:.3f},{p.magnitude:.6f},{p.relative_power:.6f}"
            )
        _emit("\n".join(lines) + "\n", out)


def _write_spectrum_svg(spec, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    mags = spec.magnitudes()
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(spec.frequencies[1:], mags[1:])
    ax.set_xlabel("frequency (Hz)")
    ax.set_ylabel("magnitude")
    ax.set_title("magnitude spectrum (DC excluded)")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


# -- baselines -----------------------------------------------------------------------

@main.group()
def baseline():
    """Baseline and flexibility-band computation."""


@baseline.command("compute")
@click.option("--data-dir", envvar="FLEXKIT_DATA_DIR", default="./data", show_default=True)
@click.option("--asset", "asset_id", required=True)
@click.option("--month", required=True)
@click.option("--epsilon", default="auto", show_default=True,
              help="DBSCAN radius in kWh, or 'auto' for k-distance elbow tuning.")
@click.option("--min-points", type=int, default=5, show_default=True)
@click.option("--floor-wh", type=float, default=500.0, show_default=True,
              help="Clusters with mean below this are essential load, excluded.")
@click.option("--medium", type=click.Choice(["median", "mean"]), default="median")
@click.option("--direction", type=click.Choice(["downward", "upward"]), default="downward")
@click.option("--fraction", type=float, default=0.10, show_default=True)
@click.option("--output", type=click.Choice(["csv", "document"]), default="csv", show_default=True)
@click.option("--out", default=None, help="Baselines CSV path (stdout otherwise).")
@click.option("--band-out", default=None, help="Flexibility band CSV path.")
@domain_errors
def baseline_compute(data_dir, asset_id, month, epsilon, min_points, floor_wh,
                     medium, direction, fraction, output, out, band_out):
    """Derive per-slot baselines and the flexibility band for one month."""
    store = _store(data_dir)
    series = store.load_meter_series(asset_id)
    epsilon_wh = None if epsilon == "auto" else float(epsilon) * 1000.0
    baselines = pipeline.compute_baselines(
        series, month, epsilon_wh, min_points, floor_wh, medium
    )
    band = flexibility_band(baselines, direction, fraction)
    store.save_artifact(
        asset_id, "baselines", month,
        pipeline.baselines_to_doc(baselines, params={
            "epsilon_wh": epsilon_wh, "min_points": min_points, "low_load_floor_wh": floor_wh,
        }),
    )
    store.save_artifact(asset_id, "band", f"{month}/{direction}", pipeline.band_to_doc(band))

    if output == "document":
        doc = pipeline.baselines_to_doc(baselines)
        doc["band"] = pipeline.band_to_doc(band)
        _emit(json.dumps(doc, indent=2) + "\n", out)
        return
    lines = ["slot,min_wh,medium_wh,max_wh,fallback"]
    for s in baselines.slots:
        lines.append(
            f"{s.slot},{s.min_wh:.3f},{s.medium_wh:.3f},{s.max_wh:.3f},{str(s.fallback).lower()}"
        )
    _emit("\n".join(lines) + "\n", out)
    band_lines = ["slot,available_flex_wh"]
    for slot, value in enumerate(band.available_flex_wh):
        band_lines.append(f"{slot},{value:.3f}")
    if band_out:
        _emit("\n".join(band_lines) + "\n", band_out)
    elif not out:
        _emit("\n".join(band_lines) + "\n", None)


# -- HVAC ------------------------------------------------------------------------------

@main.command("train-hvac")
@click.option("--data-dir", envvar="FLEXKIT_DATA_DIR", default="./data", show_default=True)
@click.option("--asset", "asset_id", required=True)
@click.option("--step-s", type=int, default=900, show_default=True)
@click.option("--n-trees", type=int, default=100, show_default=True)
@click.option("--max-depth", type=int, default=12, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--output", type=click.Choice(["csv", "document"]), default="csv", show_default=True)
@domain_errors
def train_hvac(data_dir, asset_id, step_s, n_trees, max_depth, seed, output):
    """Train the thermal/state model pair from stored telemetry."""
    doc = pipeline.train_hvac_models(
        _store(data_dir), asset_id, step_s=step_s, n_trees=n_trees,
        max_depth=max_depth, seed=seed,
    )
    thermal, state = doc["thermal"]["metrics"], doc["state"]["metrics"]
    if output == "document":
        _emit(json.dumps({"thermal": thermal, "state": state}, indent=2) + "\n", None)
    else:
        click.echo("model,metric,value")
        click.echo(f"thermal,mae_c,{thermal['mae_c']:.6f}")
        click.echo(f"thermal,r2,{thermal['r2']:.6f}")
        click.echo(f"state,accuracy,{state['accuracy']:.6f}")
        click.echo(f"state,f1,{state['f1']:.6f}")


@main.command("forecast-flex")
@click.option("--data-dir", envvar="FLEXKIT_DATA_DIR", default="./data", show_default=True)
@click.option("--asset", "asset_id", required=True)
@click.option("--horizon", type=int, default=12, show_default=True)
@click.option("--step-s", type=int, default=900, show_default=True)
@click.option("--baseline-set", type=float, required=True)
@click.option("--flex-set", type=float, required=True)
@click.option("--direction", type=click.Choice(["downward", "upward"]), default="downward")
@click.option("--output", type=click.Choice(["csv", "document"]), default="csv", show_default=True)
@click.option("--out", default=None)
@domain_errors
def forecast_flex(data_dir, asset_id, horizon, step_s, baseline_set, flex_set,
                  direction, output, out):
    """Forecast per-step available flexibility for one HVAC asset."""
    fc = pipeline.forecast_for_asset(
        _store(data_dir), asset_id, horizon, step_s, baseline_set, flex_set, direction
    )
    if output == "document":
        _emit(json.dumps(pipeline.forecast_to_doc(fc), indent=2) + "\n", out)
    else:
        lines = ["step,available_flex_kw"]
        for step, kw in enumerate(fc.available_flex_kw):
            lines.append(f"{step},{kw:.6f}")
        _emit("\n".join(lines) + "\n", out)


# -- events -------------------------------------------------------------------------------

@main.command("solve-event")
@click.option("--event", "event_file", type=click.Path(exists=True), required=True,
              help="DR event wire document (JSON).")
@click.option("--contracts", "contracts_file", type=click.Path(exists=True), required=True,
              help="JSON list of contract documents.")
@click.option("--forecasts", "forecasts_file", type=click.Path(exists=True), required=True,
              help="JSON list of flexibility forecast documents.")
@click.option("--policy", type=click.Choice(["proportional", "greedy_cheapest_first"]),
              default="proportional", show_default=True)
@click.option("--mode", type=click.Choice(["event_total", "per_step"]), default="event_total")
@click.option("--output", type=click.Choice(["csv", "document"]), default="csv", show_default=True)
@click.option("--out", default=None)
@domain_errors
def solve_event(event_file, contracts_file, forecasts_file, policy, mode, output, out):
    """Solve a DR event allocation from fixture files (no store needed)."""
    event = dr_event_from_doc(json.loads(Path(event_file).read_text()))
    contracts = [
        Contract(
            occupant_id=c["occupant_id"],
            max_flex_kw=c["max_flex_kw"],
            baseline_set_temp_c=c.get("baseline_set_temp_c", 24.0),
            flex_set_temp_c=c.get("flex_set_temp_c", 26.0),
            active=c.get("active", True),
            asset_id=c.get("asset_id", ""),
        )
        for c in json.loads(Path(contracts_file).read_text())
    ]
    forecasts = [forecast_from_doc(d) for d in json.loads(Path(forecasts_file).read_text())]
    plan = solve_allocation(event, contracts, forecasts, policy=policy, mode=mode)

    if output == "document":
        doc = {
            "event_id": plan.event_id,
            "occupant_ids": list(plan.occupant_ids),
            "delivered_power_kw": [list(r) for r in plan.delivered_power_kw],
            "residual_kw": plan.residual_kw,
            "status": plan.status,
            "objective_kw2": plan.objective_kw2,
            "policy": plan.policy,
            "mode": plan.mode,
            "requested_power_kw": event.requested_power_kw,
        }
        _emit(json.dumps(doc, indent=2) + "\n", out)
        return
    steps = len(plan.delivered_power_kw[0]) if plan.delivered_power_kw else 0
    lines = ["occupant_id," + ",".join(f"step_{t}" for t in range(steps))]
    for occ, row in zip(plan.occupant_ids, plan.delivered_power_kw):
        lines.append(occ + "," + ",".join(f"{v:.6f}" for v in row))
    lines.append(f"# residual_kw,{plan.residual_kw:.6f}")
    lines.append(f"# status,{plan.status}")
    _emit("\n".join(lines) + "\n", out)


@main.command()
@click.option("--plan", "plan_file", type=click.Path(exists=True), required=True,
              help="Plan document from solve-event --output document.")
@click.option("--actuals", "actuals_file", type=click.Path(exists=True), required=True,
              help="CSV: occupant_id,step,actual_kw.")
@click.option("--output", type=click.Choice(["csv", "document"]), default="csv", show_default=True)
@click.option("--out", default=None)
@domain_errors
def report(plan_file, actuals_file, output, out):
    """Fulfillment report: requested vs planned vs metered actuals."""
    from .vpp import AllocationPlan

    doc = json.loads(Path(plan_file).read_text())
    plan = AllocationPlan(
        event_id=doc["event_id"],
        occupant_ids=tuple(doc["occupant_ids"]),
        delivered_power_kw=tuple(tuple(r) for r in doc["delivered_power_kw"]),
        residual_kw=doc["residual_kw"],
        status=doc["status"],
        objective_kw2=doc["objective_kw2"],
        policy=doc["policy"],
        mode=doc["mode"],
    )
    metered = []
    lines = Path(actuals_file).read_text().strip().splitlines()
    for line in lines[1:]:
        occ, step, kw = line.split(",")
        metered.append(MeteredReading(occ, int(step), float(kw)))
    result = track_fulfillment(plan, metered, doc["requested_power_kw"])

    if output == "document":
        _emit(
            json.dumps(
                {
                    "event_id": result.event_id,
                    "steps": [vars(s) for s in result.steps],
                    "per_occupant_deviation_kw": result.per_occupant_deviation_kw,
                    "missing": [list(m) for m in result.missing],
                    "aggregate_deviation_kw": result.aggregate_deviation_kw(),
                },
                indent=2,
            )
            + "\n",
            out,
        )
        return
    out_lines = ["step,requested_kw,planned_kw,actual_kw,deviation_kw"]
    for s in result.steps:
        out_lines.append(
            f"{s.step},{s.requested_kw:.6f},{s.planned_kw:.6f},"
            f"{s.actual_kw:.6f},{s.deviation_kw:.6f}"
        )
    _emit("\n".join(out_lines) + "\n", out)


@main.command()
@click.option("--data-dir", envvar="FLEXKIT_DATA_DIR", default="./data", show_default=True)
@click.option("--bind", envvar="FLEXKIT_BIND", default="127.0.0.1:8000", show_default=True)
def serve(data_dir, bind):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    host, _, port = bind.partition(":")
    uvicorn.run(create_app(data_dir), host=host, port=int(port or 8000))


if __name__ == "__main__":
    main()
