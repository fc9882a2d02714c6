"""Sparse pseudo-input GP regression over feature windows with a DTW kernel.

Each output channel (one future-frame joint coordinate) is an independent GP;
channels share the kernel and its hyperparameters and keep their own weight
vectors and target scaling. Input noise enters as an effective output-noise
term derived from the joint velocity limit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky, solve_triangular

from .dtw import dtw_distance_matrix, kernel_from_distances

_BASE_JITTER = 1e-6


def _shifted_cholesky(k: np.ndarray, base: float):
    """Cholesky of k + jitter I; escalates to a spectral shift for indefinite DTW grams."""
    n = k.shape[0]
    try:
        return cholesky(k + base * np.eye(n), lower=True), base
    except np.linalg.LinAlgError:
        lam_min = float(np.linalg.eigvalsh(k).min())
        jitter = base - 1.05 * lam_min
        return cholesky(k + jitter * np.eye(n), lower=True), jitter


@dataclass(frozen=True)
class NoisyInputParams:
    """Input noise std (m) and the joint velocity limit (m/s) that bounds its effect."""

    sigma: float = 0.0
    velocity_limit: float = 0.0

    def __post_init__(self):
        if self.sigma < 0 or self.velocity_limit < 0:
            raise ValueError("sigma and velocity_limit must be >= 0")

    @property
    def extra_noise_var(self) -> float:
        return self.sigma**2 * self.velocity_limit**2


@dataclass(frozen=True)
class SpgpHyperparams:
    gamma: float
    signal_var: float
    noise_var: float

    def __post_init__(self):
        if min(self.gamma, self.signal_var, self.noise_var) <= 0:
            raise ValueError("hyperparameters must be positive")


@dataclass
class SparseGpModel:
    """Trained sparse GP: pseudo-input kernel blocks plus per-channel weights."""

    pseudo_inputs: np.ndarray   # (M, n_p, d)
    hyper: SpgpHyperparams
    band: int | None
    k_mm: np.ndarray            # (M, M) kernel block, no jitter
    k_mn: np.ndarray            # (M, N)
    diag_corr: np.ndarray       # (N,) k_nn - diag(Q_nn), >= 0
    y_norm: np.ndarray          # (N, C) standardized targets
    y_mean: np.ndarray          # (C,)
    y_scale: np.ndarray         # (C,)
    channel_shape: tuple        # (n_f, J, 3)
    next_offsets: np.ndarray    # (n_f,) representative prediction-frame offsets
    jitter: float = _BASE_JITTER
    clamped: bool = False
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def num_pseudo(self) -> int:
        return self.pseudo_inputs.shape[0]

    @property
    def num_channels(self) -> int:
        return self.y_norm.shape[1]


def _solve_blocks(model: SparseGpModel, noise_var: float):
    """Factorizations and weight matrix for one effective noise level (cached)."""
    key = float(noise_var)
    hit = model._cache.get(key)
    if hit is not None:
        return hit
    m = model.num_pseudo
    lam = model.diag_corr + noise_var
    L = cholesky(model.k_mm + model.jitter * np.eye(m), lower=True)
    v = solve_triangular(L, model.k_mn, lower=True) / np.sqrt(lam)[None, :]
    a = np.eye(m) + v @ v.T
    La = cholesky(a, lower=True)
    u = model.y_norm / np.sqrt(lam)[:, None]
    w_inner = solve_triangular(La, v @ u, lower=True)
    # weights such that mean = k_*^T L^{-T} La^{-T} w_inner
    weights = solve_triangular(L.T, solve_triangular(La.T, w_inner, lower=False), lower=False)
    blocks = {"L": L, "La": La, "weights": weights}
    model._cache[key] = blocks
    return blocks


def _posterior(model: SparseGpModel, query: np.ndarray, noise_var: float):
    blocks = _solve_blocks(model, noise_var)
    dist = dtw_distance_matrix(query[None, :, :], model.pseudo_inputs, model.band)[0]
    k_star = model.hyper.signal_var * kernel_from_distances(dist, model.hyper.gamma)
    mean_norm = k_star @ blocks["weights"]
    lk = solve_triangular(blocks["L"], k_star, lower=True)
    lak = solve_triangular(blocks["La"], lk, lower=True)
    var_norm = model.hyper.signal_var - float(lk @ lk) + float(lak @ lak)
    var_norm = max(var_norm, 1e-12)
    mean = model.y_mean + model.y_scale * mean_norm
    var = np.maximum(model.y_scale**2 * var_norm, 1e-18)
    return mean, var


def spgp_predict(model: SparseGpModel, f_prev: np.ndarray):
    """Posterior (mean, variance) per channel at the trained noise level."""
    f_prev = _check_query(model, f_prev)
    return _posterior(model, f_prev, model.hyper.noise_var)


def spgp_predict_noisy(model: SparseGpModel, f_prev: np.ndarray, noisy: NoisyInputParams):
    """Posterior with input noise folded in: effective noise sigma_y^2 + sigma^2 * |v|^2.

    The extra term is given in meters^2 and converts into the model's
    normalized target units.
    """
    f_prev = _check_query(model, f_prev)
    extra = noisy.extra_noise_var / float(model.y_scale[0]) ** 2
    return _posterior(model, f_prev, model.hyper.noise_var + extra)


def _check_query(model: SparseGpModel, f_prev: np.ndarray) -> np.ndarray:
    f_prev = np.asarray(f_prev, dtype=float)
    if f_prev.shape != model.pseudo_inputs.shape[1:]:
        raise ValueError(
            f"query window must be {model.pseudo_inputs.shape[1:]}, got {f_prev.shape}"
        )
    return f_prev


def _log_marginal(k_mm, k_mn, diag_corr, noise_var, y_norm, jitter):
    """FITC log marginal likelihood summed over channels."""
    m, n = k_mn.shape
    lam = diag_corr + noise_var
    L = cholesky(k_mm + jitter * np.eye(m), lower=True)
    v = solve_triangular(L, k_mn, lower=True) / np.sqrt(lam)[None, :]
    a = np.eye(m) + v @ v.T
    La = cholesky(a, lower=True)
    logdet = 2.0 * np.log(np.diag(La)).sum() + np.log(lam).sum()
    u = y_norm / np.sqrt(lam)[:, None]
    t = solve_triangular(La, v @ u, lower=True)
    quad = (u * u).sum(axis=0) - (t * t).sum(axis=0)
    c = y_norm.shape[1]
    return float(-0.5 * quad.sum() - 0.5 * c * logdet - 0.5 * c * n * np.log(2 * np.pi))


def _grid_search(d_mm, d_nm, y_norm, start: SpgpHyperparams):
    pos = d_nm[d_nm > 0]
    med = float(np.median(pos)) if pos.size else 1.0
    var_scale = max(float(np.median(y_norm.var(axis=0))), 1e-8)
    grids = {
        "gamma": med * np.logspace(-1.0, 1.0, 7),
        "signal_var": var_scale * np.logspace(-1.0, 1.0, 5),
        "noise_var": var_scale * np.logspace(-4.0, -0.5, 6),
    }
    cur = {"gamma": start.gamma, "signal_var": start.signal_var, "noise_var": start.noise_var}

    def score(p):
        k_mm = p["signal_var"] * kernel_from_distances(d_mm, p["gamma"])
        k_mn = p["signal_var"] * kernel_from_distances(d_nm.T, p["gamma"])
        try:
            _, jitter = _shifted_cholesky(k_mm, _BASE_JITTER * p["signal_var"])
            diag_corr = _diag_correction(k_mm, k_mn, jitter)
            return _log_marginal(k_mm, k_mn, diag_corr, p["noise_var"], y_norm, jitter)
        except np.linalg.LinAlgError:
            return -np.inf

    best = score(cur)
    for _ in range(2):
        for name, cands in grids.items():
            for c in cands:
                trial = dict(cur)
                trial[name] = float(c)
                s = score(trial)
                if s > best + 1e-9:
                    best, cur = s, trial
    return SpgpHyperparams(**cur), best


def _diag_correction(k_mm, k_mn, jitter):
    m = k_mm.shape[0]
    L = cholesky(k_mm + jitter * np.eye(m), lower=True)
    v = solve_triangular(L, k_mn, lower=True)
    signal_var = float(k_mm[0, 0])
    return np.maximum(signal_var - (v * v).sum(axis=0), 0.0)


def spgp_train(
    windows,
    num_pseudo: int,
    seed,
    band: int | None = None,
    fixed_hyperparams: SpgpHyperparams | None = None,
) -> SparseGpModel:
    """Train one sparse GP on a group of TrainingWindows.

    Pseudo-inputs are a seeded uniform subsample of the group; hyperparameters
    come from a coordinate-wise grid search on the log marginal likelihood
    unless fixed ones are supplied. num_pseudo larger than the group is clamped
    with a warning.
    """
    windows = list(windows)
    if not windows:
        raise ValueError("empty training group")
    if num_pseudo < 1:
        raise ValueError("num_pseudo must be >= 1")
    n = len(windows)
    clamped = False
    if num_pseudo > n:
        warnings.warn(f"num_pseudo {num_pseudo} exceeds group size {n}; clamped")
        num_pseudo, clamped = n, True

    x = np.stack([w.prev_features for w in windows])          # (N, n_p, d)
    targets = np.stack([w.next_positions for w in windows])   # (N, n_f, J, 3)
    channel_shape = targets.shape[1:]
    y = targets.reshape(n, -1)
    y_mean = y.mean(axis=0)
    # one shared scale (meters) for every channel: far-from-data queries then
    # revert to a prior whose std reflects the real motion spread, and the
    # sigma^2 |v|^2 input-noise term converts consistently across channels
    centered = y - y_mean
    s_global = float(np.sqrt(np.mean(centered**2)))
    s_global = max(s_global, 1e-6)
    y_scale = np.full_like(y_mean, s_global)
    y_norm = centered / s_global

    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(n, size=num_pseudo, replace=False))
    pseudo = x[idx]

    d_mm = dtw_distance_matrix(pseudo, band=band)
    d_nm = dtw_distance_matrix(x, pseudo, band=band)

    if fixed_hyperparams is None:
        pos = d_nm[d_nm > 0]
        var_scale = max(float(np.median(y_norm.var(axis=0))), 1e-8)
        start = SpgpHyperparams(
            gamma=float(np.median(pos)) if pos.size else 1.0,
            signal_var=var_scale,
            noise_var=var_scale / 100.0,
        )
        hyper, _ = _grid_search(d_mm, d_nm, y_norm, start)
    else:
        hyper = fixed_hyperparams

    k_mm = hyper.signal_var * kernel_from_distances(d_mm, hyper.gamma)
    k_mn = hyper.signal_var * kernel_from_distances(d_nm.T, hyper.gamma)
    # positive definiteness after jitter is a training-time invariant; the DTW
    # kernel is not PSD in general so the jitter escalates to a spectral shift
    _, jitter = _shifted_cholesky(k_mm, _BASE_JITTER * hyper.signal_var)
    diag_corr = _diag_correction(k_mm, k_mn, jitter)

    offsets = np.asarray(windows[0].next_offsets, dtype=float)
    return SparseGpModel(
        pseudo_inputs=x[idx],
        hyper=hyper,
        band=band,
        k_mm=k_mm,
        k_mn=k_mn,
        diag_corr=diag_corr,
        y_norm=y_norm,
        y_mean=y_mean,
        y_scale=y_scale,
        channel_shape=channel_shape,
        next_offsets=offsets,
        jitter=jitter,
        clamped=clamped,
    )


def model_to_dict(model: SparseGpModel) -> dict:
    return {
        "pseudo_inputs": model.pseudo_inputs.tolist(),
        "gamma": model.hyper.gamma,
        "signal_var": model.hyper.signal_var,
        "noise_var": model.hyper.noise_var,
        "band": model.band,
        "k_mm": model.k_mm.tolist(),
        "k_mn": model.k_mn.tolist(),
        "diag_corr": model.diag_corr.tolist(),
        "y_norm": model.y_norm.tolist(),
        "y_mean": model.y_mean.tolist(),
        "y_scale": model.y_scale.tolist(),
        "channel_shape": list(model.channel_shape),
        "next_offsets": model.next_offsets.tolist(),
        "jitter": model.jitter,
        "clamped": model.clamped,
    }


def model_from_dict(d: dict) -> SparseGpModel:
    model = SparseGpModel(
        pseudo_inputs=np.asarray(d["pseudo_inputs"], dtype=float),
        hyper=SpgpHyperparams(d["gamma"], d["signal_var"], d["noise_var"]),
        band=d["band"],
        k_mm=np.asarray(d["k_mm"], dtype=float),
        k_mn=np.asarray(d["k_mn"], dtype=float),
        diag_corr=np.asarray(d["diag_corr"], dtype=float),
        y_norm=np.asarray(d["y_norm"], dtype=float),
        y_mean=np.asarray(d["y_mean"], dtype=float),
        y_scale=np.asarray(d["y_scale"], dtype=float),
        channel_shape=tuple(d["channel_shape"]),
        next_offsets=np.asarray(d["next_offsets"], dtype=float),
        jitter=float(d["jitter"]),
        clamped=bool(d["clamped"]),
    )
    # re-verify invariants on load
    if model.num_pseudo < 1:
        raise ValueError("archive has no pseudo-inputs")
    if np.any(model.diag_corr < 0) or np.any(model.y_scale <= 0):
        raise ValueError("archive violates model invariants")
    cholesky(model.k_mm + model.jitter * np.eye(model.num_pseudo), lower=True)
    return model
