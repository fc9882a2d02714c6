"""Command-line entry point: train, predict, simulate, eval, and sweep pipelines."""

from __future__ import annotations

import json
import logging
import os
from pathlib import Path

import click
import numpy as np

from . import __version__
from .motion import MotionSequence, compute_features, synth_reach_dataset
from .predict import predict_motion, save_predictor, load_predictor
from .report import emit_csv, emit_svg, eval_csv, render_run_figures, render_sweep_figure
from .scenarios import BUILTIN_SCENARIOS
from .simulate import (
    build_playback,
    load_scenario,
    metrics_report,
    prediction_noise_eval,
    run_scenario,
    trained_bundle,
)

log = logging.getLogger("intentplan")

SWEEP_PARAMS = {
    "noise": (("human", "noise_sigma"), ("prediction", "sigma")),
    "delta_cl": (("planner", "delta_cl"),),
    "speed": (("human", "speed"),),
}


def _setup_logging():
    level = os.environ.get("INTENTPLAN_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _load_config(config: str):
    if config in BUILTIN_SCENARIOS:
        return load_scenario(BUILTIN_SCENARIOS[config]())
    path = Path(config)
    if not path.exists():
        raise click.ClickException(f"config not found: {config}")
    try:
        return load_scenario(path)
    except (json.JSONDecodeError, ValueError) as e:
        raise click.ClickException(f"invalid config {config}: {e}")


def _outdir(out: str) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


@click.group()
@click.version_option(__version__)
def main():
    """Intention-aware motion planning toolkit."""
    _setup_logging()


@main.command()
@click.option("--config", required=True, help="scenario config path or builtin name")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, help="output directory")
def train(config, seed, out):
    """Train prediction models for a scenario and archive them."""
    scenario = _load_config(config)
    outdir = _outdir(out)
    bundle = trained_bundle(scenario)
    path = outdir / "model.json"
    save_predictor(bundle, path)
    click.echo(f"wrote {path}")


@main.command()
@click.option("--config", required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True)
@click.option("--model", "model_path", default=None, help="trained model archive (JSON)")
def predict(config, seed, out, model_path):
    """Predict over a held-out playback and write the per-step results."""
    scenario = _load_config(config)
    outdir = _outdir(out)
    bundle = load_predictor(model_path) if model_path else trained_bundle(scenario)
    playback = build_playback(scenario, seed)
    from .gp import NoisyInputParams

    noisy = NoisyInputParams(
        sigma=float(scenario.raw["prediction"].get("sigma", 0.0)),
        velocity_limit=float(scenario.raw["prediction"].get("velocity_limit", 1.0)),
    )
    num_actions = len(scenario.task_spec().human_actions)
    records = []
    t = 0.5
    while t < playback.end_time:
        ts, pos = playback.window_frames(t, bundle.config.n_p)
        feats = compute_features(MotionSequence(frame_times=ts, joint_positions=pos)).values
        pred = predict_motion(bundle, feats, playback.completed_human(t, num_actions), noisy)
        action, weight = pred.dominant()
        records.append({
            "t": t,
            "true_action": playback.action_at(t),
            "predicted_action": action,
            "weight": weight,
            "weights": pred.weights.tolist(),
            "fallback": pred.fallback,
        })
        t += 0.5
    path = outdir / "predictions.json"
    path.write_text(json.dumps(records, sort_keys=True) + "\n", encoding="utf-8")
    click.echo(f"wrote {path}")


@main.command()
@click.option("--config", required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True)
@click.option("--models", default="noisy-prediction",
              help="comma list: no-prediction,prediction,noisy-prediction")
@click.option("--csv/--no-csv", "write_csv", default=True, show_default=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
@click.option("--timing", is_flag=True, help="include wall-clock prediction_ms in the CSV")
def simulate(config, seed, out, models, write_csv, figures, timing):
    """Run a scenario once per requested model; write trace, metrics, figures."""
    scenario = _load_config(config)
    outdir = _outdir(out)
    label_to_mode = {"no-prediction": "off", "prediction": "plain",
                     "noisy-prediction": "noisy"}
    rows = []
    timing_info = {}
    for label in [m.strip() for m in models.split(",") if m.strip()]:
        if label not in label_to_mode:
            raise click.ClickException(f"unknown model {label!r}")
        raw = json.loads(json.dumps(scenario.raw))
        raw["prediction"]["mode"] = label_to_mode[label]
        trace = run_scenario(raw, seed)
        m = metrics_report(trace, load_scenario(raw).human_alone_seconds())
        rows.append(m)
        tag = label.replace("-", "_")
        (outdir / f"trace_{tag}_{seed}.json").write_text(
            trace.canonical_json() + "\n", encoding="utf-8"
        )
        if trace.prediction_latency_s:
            timing_info[label] = {
                "mean_ms": float(np.mean(trace.prediction_latency_s) * 1e3),
                "max_ms": float(np.max(trace.prediction_latency_s) * 1e3),
                "calls": len(trace.prediction_latency_s),
            }
        if figures:
            render_run_figures(trace, outdir)
    if write_csv:
        emit_csv(rows, outdir / "metrics.csv", include_timing=timing)
    if timing_info:
        (outdir / "timing.json").write_text(
            json.dumps(timing_info, sort_keys=True) + "\n", encoding="utf-8"
        )
    click.echo(f"wrote {outdir}/metrics.csv" if write_csv else "done")


@main.command("eval")
@click.option("--config", required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True)
@click.option("--noise", type=float, default=0.0, show_default=True)
def eval_cmd(config, seed, out, noise):
    """Evaluate prediction quality on held-out windows."""
    scenario = _load_config(config)
    outdir = _outdir(out)
    ev = prediction_noise_eval(scenario, noise, seed)
    row = {
        "scenario": scenario.name,
        "param": "noise",
        "value": noise,
        "classification_precision": ev.classification_precision,
        "regression_precision": ev.regression_precision,
        "regression_accuracy": ev.regression_accuracy,
    }
    eval_csv([row], outdir / "eval.csv")
    click.echo(f"wrote {outdir}/eval.csv")


@main.command()
@click.option("--config", required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True)
@click.option("--param", required=True, help="NAME=V1,V2,... (noise, delta_cl, speed)")
@click.option("--models", default="noisy-prediction")
@click.option("--svg/--no-svg", "write_svg", default=True, show_default=True)
def sweep(config, seed, out, param, models, write_svg):
    """Sweep one parameter; emit rows per value plus combined charts."""
    scenario = _load_config(config)
    if "=" not in param:
        raise click.ClickException("--param must look like name=v1,v2,...")
    name, _, raw_values = param.partition("=")
    name = name.strip()
    if name not in SWEEP_PARAMS:
        raise click.ClickException(f"unknown sweep parameter {name!r}")
    try:
        values = [float(v) for v in raw_values.split(",") if v.strip()]
    except ValueError:
        raise click.ClickException("sweep values must be numbers")
    if not values:
        raise click.ClickException("no sweep values given")
    outdir = _outdir(out)

    if name == "noise":
        rows = []
        for v in values:
            raw = json.loads(json.dumps(scenario.raw))
            for section, key in SWEEP_PARAMS[name]:
                raw[section][key] = v
            ev = prediction_noise_eval(raw, v, seed)
            rows.append({
                "scenario": scenario.name, "param": name, "value": v,
                "classification_precision": ev.classification_precision,
                "regression_precision": ev.regression_precision,
                "regression_accuracy": ev.regression_accuracy,
            })
        eval_csv(rows, outdir / "sweep.csv")
        curves = {
            "classification precision": [r["classification_precision"] for r in rows],
            "regression precision": [r["regression_precision"] for r in rows],
            "regression accuracy": [r["regression_accuracy"] for r in rows],
        }
        if write_svg:
            emit_svg(
                [(values, curves["classification precision"]),],
                ["classification precision"],
                outdir / "sweep_precision.svg", xlabel="input noise (m)",
                ylabel="precision",
            )
            emit_svg(
                [(values, curves["regression accuracy"]),],
                ["regression accuracy"],
                outdir / "sweep_accuracy.svg", xlabel="input noise (m)",
                ylabel="ellipsoid volume integral",
            )
        render_sweep_figure(values, curves, outdir / "sweep.png", xlabel="input noise (m)")
    else:
        label_to_mode = {"no-prediction": "off", "prediction": "plain",
                         "noisy-prediction": "noisy"}
        rows = []
        for v in values:
            for label in [m.strip() for m in models.split(",") if m.strip()]:
                raw = json.loads(json.dumps(scenario.raw))
                for section, key in SWEEP_PARAMS[name]:
                    raw[section][key] = v
                raw["prediction"]["mode"] = label_to_mode[label]
                trace = run_scenario(raw, seed)
                rows.append(metrics_report(trace, load_scenario(raw).human_alone_seconds()))
        emit_csv(rows, outdir / "sweep.csv")
        dist = [r.min_distance_m for r in rows]
        if write_svg:
            emit_svg([(values[: len(dist)], dist[: len(values)])], ["min distance"],
                     outdir / "sweep_distance.svg", xlabel=name, ylabel="min distance (m)")
        render_sweep_figure(values[: len(dist)], {"min_distance_m": dist[: len(values)]},
                            outdir / "sweep.png", xlabel=name)
    click.echo(f"wrote {outdir}/sweep.csv")


if __name__ == "__main__":
    main()
