"""CSV, SVG, and matplotlib figure artifacts for runs and sweeps."""

from __future__ import annotations

import csv
import math
import os
import tempfile
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import __version__
from .simulate import Metrics, RunTrace

CSV_COLUMNS = (
    "scenario", "seed", "model", "prediction_ms", "mhd_m",
    "smoothness", "jerkiness", "min_distance_m", "efficiency",
)


def _fmt(value) -> str:
    if value is None:
        return "NA"
    if isinstance(value, float):
        if math.isnan(value):
            return "NA"
        return format(value, ".9g")
    return str(value)


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8", newline="") as fp:
        fp.write(text)
    os.replace(tmp, path)


def emit_csv(rows, path, include_timing: bool = False) -> Path:
    """Metrics rows in the fixed column order; timing only on request.

    Rows repeat byte-identically for identical runs because wall-clock timing
    stays out unless include_timing is set.
    """
    path = Path(path)
    rows = list(rows)
    lines = [",".join(CSV_COLUMNS)]
    for m in rows:
        if not isinstance(m, Metrics):
            raise ValueError("emit_csv expects Metrics rows")
        values = {
            "scenario": m.scenario,
            "seed": m.seed,
            "model": m.model,
            "prediction_ms": m.prediction_ms if include_timing else float("nan"),
            "mhd_m": m.mhd_m,
            "smoothness": m.smoothness,
            "jerkiness": m.jerkiness,
            "min_distance_m": m.min_distance_m,
            "efficiency": m.efficiency,
        }
        lines.append(",".join(_fmt(values[c]) for c in CSV_COLUMNS))
    _atomic_write(path, "\n".join(lines) + "\n")
    return path


def read_csv(path) -> list:
    with open(path, "r", encoding="utf-8", newline="") as fp:
        return list(csv.DictReader(fp))


def eval_csv(rows, path) -> Path:
    """Prediction-evaluation rows (noise sweeps and eval runs)."""
    path = Path(path)
    cols = ("scenario", "param", "value", "classification_precision",
            "regression_precision", "regression_accuracy")
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join(_fmt(r[c]) for c in cols))
    _atomic_write(path, "\n".join(lines) + "\n")
    return path


# ---------------------------------------------------------------------------
# Hand-rolled SVG line charts (deterministic output)
# ---------------------------------------------------------------------------

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_W, _H = 640, 480
_ML, _MR, _MT, _MB = 70, 20, 20, 50


def emit_svg(series, labels, path, xlabel: str = "", ylabel: str = "") -> Path:
    """Standards-conformant SVG line chart with axes and a legend.

    `series` is a list of (x, y) pairs of equal-length 1-D arrays; output is
    byte-stable apart from the version comment.
    """
    series = [(np.asarray(x, dtype=float), np.asarray(y, dtype=float)) for x, y in series]
    if not series:
        raise ValueError("no series to plot")
    for x, y in series:
        if x.size == 0 or x.shape != y.shape:
            raise ValueError("series must be non-empty with matching lengths")
    if len(labels) != len(series):
        raise ValueError("one label per series required")

    xs = np.concatenate([x for x, _ in series])
    ys = np.concatenate([y for _, y in series])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 - x0 < 1e-12:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def sx(v):
        return _ML + (v - x0) / (x1 - x0) * (_W - _ML - _MR)

    def sy(v):
        return _H - _MB - (v - y0) / (y1 - y0) * (_H - _MT - _MB)

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f"<!-- intentplan {__version__} -->",
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" '
        'stroke="black" stroke-width="1"/>',
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" '
        'stroke="black" stroke-width="1"/>',
    ]
    for i in range(5):
        fx = x0 + (x1 - x0) * i / 4
        fy = y0 + (y1 - y0) * i / 4
        parts.append(
            f'<text x="{sx(fx):.2f}" y="{_H - _MB + 18}" font-size="11" '
            f'text-anchor="middle">{fx:.4g}</text>'
        )
        parts.append(
            f'<text x="{_ML - 8}" y="{sy(fy):.2f}" font-size="11" '
            f'text-anchor="end">{fy:.4g}</text>'
        )
    if xlabel:
        parts.append(
            f'<text x="{(_ML + _W - _MR) / 2:.1f}" y="{_H - 12}" font-size="13" '
            f'text-anchor="middle">{xlabel}</text>'
        )
    if ylabel:
        parts.append(
            f'<text x="16" y="{(_MT + _H - _MB) / 2:.1f}" font-size="13" '
            f'text-anchor="middle" transform="rotate(-90 16 {(_MT + _H - _MB) / 2:.1f})">'
            f"{ylabel}</text>"
        )
    for k, ((x, y), label) in enumerate(zip(series, labels)):
        color = _PALETTE[k % len(_PALETTE)]
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{pts}"/>'
        )
        ly = _MT + 16 + 16 * k
        parts.append(
            f'<line x1="{_W - _MR - 130}" y1="{ly}" x2="{_W - _MR - 104}" y2="{ly}" '
            f'stroke="{color}" stroke-width="1.8"/>'
        )
        parts.append(
            f'<text x="{_W - _MR - 98}" y="{ly + 4}" font-size="12">{label}</text>'
        )
    parts.append("</svg>")
    path = Path(path)
    _atomic_write(path, "\n".join(parts) + "\n")
    return path


def svg_polyline_points(svg_text: str) -> list:
    """Parse polyline point lists back out of an emitted chart (for checks)."""
    out = []
    for chunk in svg_text.split("<polyline")[1:]:
        attr = chunk.split('points="')[1].split('"')[0]
        pts = [tuple(map(float, p.split(","))) for p in attr.split()]
        out.append(pts)
    return out


# ---------------------------------------------------------------------------
# matplotlib report figures
# ---------------------------------------------------------------------------

def render_run_figures(trace: RunTrace, outdir) -> list:
    """Clearance and joint-trajectory figures for one run."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []

    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    t = [c.sim_time for c in trace.cycles]
    clear = [c.min_clearance * 100 for c in trace.cycles]
    ax.plot(t, clear, "-o", ms=3, label="clearance")
    ax.axhline(0.0, color="red", lw=0.8, ls="--")
    waits = [c.sim_time for c in trace.cycles if c.waited]
    if waits:
        ax.plot(waits, [0] * len(waits), "rx", label="wait")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("min clearance (cm)")
    ax.set_title(f"{trace.scenario} seed {trace.seed} ({trace.prediction_mode})")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    p = outdir / f"clearance_{trace.prediction_mode}_{trace.seed}.png"
    fig.savefig(p, dpi=110)
    plt.close(fig)
    paths.append(p)

    t, q = trace.executed()
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    for j in range(q.shape[1]):
        ax.plot(t, q[:, j], label=f"joint {j}")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("joint angle (rad)")
    ax.set_title("executed trajectory")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    p = outdir / f"trajectory_{trace.prediction_mode}_{trace.seed}.png"
    fig.savefig(p, dpi=110)
    plt.close(fig)
    paths.append(p)
    return paths


def render_sweep_figure(values, curves: dict, path, xlabel: str) -> Path:
    """One matplotlib panel per metric across swept values."""
    fig, axes = plt.subplots(1, len(curves), figsize=(4.0 * len(curves), 3.2))
    if len(curves) == 1:
        axes = [axes]
    for ax, (name, ys) in zip(axes, curves.items()):
        ax.plot(values, ys, "-o")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(name)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path
