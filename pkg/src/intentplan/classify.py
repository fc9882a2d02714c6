"""Kernel multinomial logistic classification with greedy import-point selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky
from scipy.optimize import minimize

from .dtw import dtw_distance_matrix, kernel_from_distances


@dataclass(frozen=True)
class IvmParams:
    """Training knobs: kernel scale, penalty, import budget, and stop tolerance."""

    gamma: float | None = None      # DTW kernel length scale; None = median heuristic
    band: int | None = None
    reg_weight: float = 1e-3
    max_imports: int | None = None  # None = min(50, ceil(N / 4))
    gain_tol: float = 1e-4
    screen_top_k: int = 3           # candidates refit per greedy step

    def __post_init__(self):
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.reg_weight < 0:
            raise ValueError("reg_weight must be >= 0")


@dataclass
class ImportVectorClassifier:
    """Softmax over per-class kernel expansions on a selected import set."""

    import_points: np.ndarray   # (S, n_p, d)
    alpha: np.ndarray           # (S, n_classes)
    classes: tuple              # action indices, sorted
    gamma: float
    band: int | None
    window_shape: tuple

    def scores(self, f_prev: np.ndarray) -> np.ndarray:
        f_prev = np.asarray(f_prev, dtype=float)
        if f_prev.shape != self.window_shape:
            raise ValueError(f"window must be {self.window_shape}, got {f_prev.shape}")
        if self.import_points.shape[0] == 0:
            return np.zeros(len(self.classes))
        dist = dtw_distance_matrix(f_prev[None], self.import_points, self.band)[0]
        k = kernel_from_distances(dist, self.gamma)
        return k @ self.alpha


def softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max()
    e = np.exp(z)
    return e / e.sum()


def ivm_classify(clf: ImportVectorClassifier, f_prev: np.ndarray) -> dict:
    """Probability for each action class; values sum to 1."""
    probs = softmax(clf.scores(f_prev))
    return {c: float(p) for c, p in zip(clf.classes, probs)}


def _objective(alpha_flat, k_ns, y_onehot, reg):
    # ridge penalty on the coefficients: the DTW kernel is not PSD, so the
    # RKHS-norm penalty would not be convex
    s, m = k_ns.shape[1], y_onehot.shape[1]
    alpha = alpha_flat.reshape(s, m)
    scores = k_ns @ alpha
    scores -= scores.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(scores).sum(axis=1))
    loglik = (scores * y_onehot).sum() - log_z.sum()
    penalty = 0.5 * reg * (alpha * alpha).sum()
    p = np.exp(scores - log_z[:, None])
    grad = k_ns.T @ (p - y_onehot) + reg * alpha
    return -(loglik - penalty), grad.ravel()


def _fit_alpha(k_ns, y_onehot, reg, alpha0=None, maxiter=200, tight=False):
    s, m = k_ns.shape[1], y_onehot.shape[1]
    x0 = np.zeros(s * m) if alpha0 is None else alpha0.ravel()
    options = {"maxiter": maxiter}
    if tight:
        options.update({"ftol": 1e-14, "gtol": 1e-10})
    res = minimize(
        _objective, x0, args=(k_ns, y_onehot, reg),
        jac=True, method="L-BFGS-B", options=options,
    )
    alpha = res.x.reshape(s, m)
    return alpha, -res.fun


def _train_single(windows, params: IvmParams, seed) -> ImportVectorClassifier:
    classes = tuple(sorted({w.current_action for w in windows}))
    x = np.stack([w.prev_features for w in windows])
    window_shape = x.shape[1:]
    if len(classes) == 1:
        return ImportVectorClassifier(
            import_points=np.zeros((0,) + window_shape),
            alpha=np.zeros((0, 1)),
            classes=classes,
            gamma=1.0 if params.gamma is None else params.gamma,
            band=params.band,
            window_shape=window_shape,
        )

    n = len(windows)
    labels = np.array([classes.index(w.current_action) for w in windows])
    y_onehot = np.eye(len(classes))[labels]

    dist = dtw_distance_matrix(x, band=params.band)
    if params.gamma is None:
        pos = dist[dist > 0]
        gamma = float(np.median(pos)) if pos.size else 1.0
    else:
        gamma = params.gamma
    gram = kernel_from_distances(dist, gamma)

    budget = params.max_imports if params.max_imports is not None else min(50, max(1, -(-n // 4)))
    budget = min(budget, n)

    selected: list[int] = []
    alpha = np.zeros((0, len(classes)))
    best_obj = float(np.log(1.0 / len(classes)) * n)  # empty-model log likelihood
    while len(selected) < budget:
        scores = gram[:, selected] @ alpha if selected else np.zeros((n, len(classes)))
        scores = scores - scores.max(axis=1, keepdims=True)
        p = np.exp(scores)
        p /= p.sum(axis=1, keepdims=True)
        resid = y_onehot - p
        gain_score = np.linalg.norm(gram.T @ resid, axis=1)
        gain_score[selected] = -np.inf
        order = np.argsort(gain_score)[::-1]
        top = [int(i) for i in order[: params.screen_top_k] if np.isfinite(gain_score[i])]
        if not top:
            break

        best_cand, best_cand_obj, best_cand_alpha = None, -np.inf, None
        for cand in top:
            trial = selected + [cand]
            warm = np.vstack([alpha, np.zeros((1, len(classes)))])
            a, obj = _fit_alpha(
                gram[:, trial], y_onehot, params.reg_weight, alpha0=warm, maxiter=60,
            )
            if obj > best_cand_obj:
                best_cand, best_cand_obj, best_cand_alpha = cand, obj, a
        if best_cand_obj - best_obj < params.gain_tol and selected:
            break
        selected.append(best_cand)
        alpha, best_obj = best_cand_alpha, best_cand_obj

    alpha, _ = _fit_alpha(
        gram[:, selected], y_onehot, params.reg_weight, alpha0=alpha, maxiter=500,
        tight=True,
    )
    return ImportVectorClassifier(
        import_points=x[selected],
        alpha=alpha,
        classes=classes,
        gamma=gamma,
        band=params.band,
        window_shape=window_shape,
    )


def ivm_train(windows_by_state: dict, params: IvmParams, seed) -> dict:
    """Train one classifier per progress state from grouped TrainingWindows."""
    if not windows_by_state:
        raise ValueError("no training groups")
    out = {}
    for i, (state, windows) in enumerate(sorted(windows_by_state.items())):
        if not windows:
            raise ValueError(f"empty training group for state {state}")
        out[state] = _train_single(list(windows), params, seed)
    return out
