"""Trajectory and prediction quality metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def second_derivatives(values: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Per-frame second time derivatives via the 3-point nonuniform stencil.

    Exact for quadratics on any grid; endpoints copy their interior neighbor.
    """
    values = np.asarray(values, dtype=float)
    times = np.asarray(times, dtype=float)
    if values.shape[0] != times.shape[0]:
        raise ValueError("values and times must share the frame count")
    if values.shape[0] < 3:
        raise ValueError("need at least 3 frames")
    v = values if values.ndim > 1 else values[:, None]
    dt0 = (times[1:-1] - times[:-2])[:, None]
    dt1 = (times[2:] - times[1:-1])[:, None]
    acc = 2.0 * ((v[2:] - v[1:-1]) / dt1 - (v[1:-1] - v[:-2]) / dt0) / (dt0 + dt1)
    out = np.vstack([acc[:1], acc, acc[-1:]])
    return out if values.ndim > 1 else out[:, 0]


def smoothness(waypoints: np.ndarray, times: np.ndarray) -> float:
    """Duration-normalized integral of summed squared joint accelerations."""
    acc = second_derivatives(waypoints, times)
    if acc.ndim == 1:
        acc = acc[:, None]
    integrand = (acc**2).sum(axis=1)
    duration = float(times[-1] - times[0])
    if duration <= 0:
        raise ValueError("times must span a positive duration")
    return float(np.trapz(integrand, times) / duration)


def jerkiness(waypoints: np.ndarray, times: np.ndarray) -> float:
    """Maximum over frames of summed squared joint accelerations."""
    acc = second_derivatives(waypoints, times)
    if acc.ndim == 1:
        acc = acc[:, None]
    return float((acc**2).sum(axis=1).max())


def mhd(points_a: np.ndarray, points_b: np.ndarray) -> float:
    """Modified Hausdorff distance: max of the two mean directed distances."""
    a = np.atleast_2d(np.asarray(points_a, dtype=float))
    b = np.atleast_2d(np.asarray(points_b, dtype=float))
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("point sets must be non-empty")
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    return float(max(d.min(axis=1).mean(), d.min(axis=0).mean()))


@dataclass(frozen=True)
class PredictionSample:
    """One evaluation point: a prediction against the ground truth that followed."""

    weights: np.ndarray        # (m,) class weights
    actions: tuple
    mean: np.ndarray           # mixture mean (n_f, J, 3)
    variance: np.ndarray       # mixture variance (n_f, J, 3)
    offsets: np.ndarray        # (n_f,) seconds
    true_action: int
    true_next: np.ndarray      # (n_f, J, 3)


@dataclass(frozen=True)
class PredictionEval:
    classification_precision: float
    regression_precision: float
    regression_accuracy: float
    confident_fraction: float
    n_samples: int


def eval_prediction(samples) -> PredictionEval:
    """Score prediction samples.

    Classification precision counts only samples whose dominant class
    probability exceeds 50%. Regression precision integrates the squared
    mean-to-truth distance summed over joints across the prediction window;
    regression accuracy integrates the summed Gaussian ellipsoid volumes
    (determinant of the per-joint diagonal covariance).
    """
    samples = list(samples)
    if not samples:
        raise ValueError("no samples to evaluate")
    correct = confident = 0
    precisions, accuracies = [], []
    for s in samples:
        i = int(np.argmax(s.weights))
        if s.weights[i] > 0.5:
            confident += 1
            if s.actions[i] == s.true_action:
                correct += 1
        err = ((s.mean - s.true_next) ** 2).sum(axis=(1, 2))      # (n_f,)
        vol = np.prod(s.variance, axis=2).sum(axis=1)             # det of diag cov
        if len(s.offsets) >= 2:
            precisions.append(np.trapz(err, s.offsets))
            accuracies.append(np.trapz(vol, s.offsets))
        else:
            precisions.append(float(err[0]))
            accuracies.append(float(vol[0]))
    return PredictionEval(
        classification_precision=correct / confident if confident else float("nan"),
        regression_precision=float(np.mean(precisions)),
        regression_accuracy=float(np.mean(accuracies)),
        confident_fraction=confident / len(samples),
        n_samples=len(samples),
    )
