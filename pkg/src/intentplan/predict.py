"""Short-term human motion prediction: classifier-weighted mixture of GP posteriors."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .classify import ImportVectorClassifier, IvmParams, ivm_classify, ivm_train
from .gp import (
    NoisyInputParams,
    SparseGpModel,
    SpgpHyperparams,
    model_from_dict,
    model_to_dict,
    spgp_predict_noisy,
    spgp_train,
)
from .motion import MotionDatabase, extract_windows


@dataclass(frozen=True)
class MotionPrediction:
    """Per-action weights and per-channel Gaussians over the next n_f frames."""

    actions: tuple
    weights: np.ndarray        # (m,) sums to 1
    means: np.ndarray          # (m, C)
    variances: np.ndarray      # (m, C) all > 0
    channel_shape: tuple       # (n_f, J, 3)
    frame_offsets: np.ndarray  # (n_f,) seconds from the query anchor
    state_used: tuple
    fallback: bool = False

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be a distribution")
        if np.any(np.asarray(self.variances) <= 0):
            raise ValueError("variances must be positive")

    def class_frames(self, i: int):
        """(means, variances) of class i reshaped to (n_f, J, 3)."""
        return (
            self.means[i].reshape(self.channel_shape),
            self.variances[i].reshape(self.channel_shape),
        )

    def mixture_mean(self) -> np.ndarray:
        """Moment-matched mixture mean, shape (n_f, J, 3)."""
        return (self.weights[:, None] * self.means).sum(axis=0).reshape(self.channel_shape)

    def mixture_variance(self) -> np.ndarray:
        """Moment-matched per-channel mixture variance, shape (n_f, J, 3)."""
        mean = (self.weights[:, None] * self.means).sum(axis=0)
        second = (self.weights[:, None] * (self.variances + self.means**2)).sum(axis=0)
        return np.maximum(second - mean**2, 1e-18).reshape(self.channel_shape)

    def dominant(self):
        """(action, probability) of the highest-weight class."""
        i = int(np.argmax(self.weights))
        return self.actions[i], float(self.weights[i])


@dataclass(frozen=True)
class PredictorConfig:
    """Training configuration for the prediction stack."""

    n_p: int = 10
    n_f: int = 10
    num_pseudo: int = 50
    window_stride: int = 2
    gp_windows_per_class: int = 120
    classifier_windows_per_class: int = 40
    band: int | None = None
    ivm_reg: float = 1e-3
    ivm_max_imports: int | None = None
    counting_progress: bool = False
    speeds: tuple = (1.0,)             # speed-scaled copies augment the training set
    gp_gamma: float | None = None      # fixed GP hyperparameters when all three set
    gp_signal_var: float | None = None
    gp_noise_var: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "speeds", tuple(self.speeds))

    def fixed_gp_hyperparams(self) -> SpgpHyperparams | None:
        vals = (self.gp_gamma, self.gp_signal_var, self.gp_noise_var)
        if all(v is not None for v in vals):
            return SpgpHyperparams(*vals)
        return None

    def hash(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class PredictorBundle:
    """Trained per-state classifiers and per-(state, action) GP regressors."""

    classifiers: dict          # progress tuple -> ImportVectorClassifier
    gps: dict                  # (progress tuple, action) -> SparseGpModel
    config: PredictorConfig
    joint_count: int
    num_actions: int
    config_hash: str = ""

    def __post_init__(self):
        if not self.config_hash:
            self.config_hash = self.config.hash()

    @property
    def states(self):
        return sorted(self.classifiers.keys())


def _subsample(rng, items, cap):
    if len(items) <= cap:
        return list(items)
    idx = np.sort(rng.choice(len(items), size=cap, replace=False))
    return [items[i] for i in idx]


def train_predictor(db: MotionDatabase, config: PredictorConfig, seed) -> PredictorBundle:
    """Extract windows, group them by progress state, and train all models.

    Each demonstration also contributes windows at every configured playback
    speed so the models cover fast and slow executions of the same motions.
    """
    from .motion import LabeledDemonstration, compute_features, time_scale

    by_state: dict = {}
    by_group: dict = {}
    for demo in db.demonstrations:
        variants = []
        for speed in config.speeds:
            if speed == 1.0:
                variants.append(demo)
            else:
                motion = time_scale(demo.motion, speed)
                variants.append(LabeledDemonstration(
                    motion=motion, features=compute_features(motion), actions=demo.actions,
                ))
        for variant in variants:
            for w in extract_windows(
                variant, config.n_p, config.n_f,
                num_actions=db.num_actions,
                stride=config.window_stride,
                counting=config.counting_progress,
            ):
                by_state.setdefault(w.progress, {}).setdefault(w.current_action, []).append(w)
                by_group.setdefault((w.progress, w.current_action), []).append(w)
    if not by_group:
        raise ValueError("no training windows; demonstrations shorter than n_p + n_f?")

    root = np.random.SeedSequence(seed)
    clf_seed, gp_seed = root.spawn(2)
    clf_rng = np.random.default_rng(clf_seed)

    clf_groups = {}
    for state in sorted(by_state):
        pooled = []
        for action in sorted(by_state[state]):
            pooled.extend(
                _subsample(clf_rng, by_state[state][action], config.classifier_windows_per_class)
            )
        clf_groups[state] = pooled
    params = IvmParams(band=config.band, reg_weight=config.ivm_reg,
                       max_imports=config.ivm_max_imports)
    classifiers = ivm_train(clf_groups, params, seed)

    gps = {}
    gp_children = np.random.SeedSequence((seed, 1)).spawn(len(by_group))
    fixed = config.fixed_gp_hyperparams()
    for child, key in zip(gp_children, sorted(by_group)):
        rng = np.random.default_rng(child)
        group = _subsample(rng, by_group[key], config.gp_windows_per_class)
        gps[key] = spgp_train(
            group, config.num_pseudo, child, band=config.band, fixed_hyperparams=fixed
        )
    return PredictorBundle(
        classifiers=classifiers,
        gps=gps,
        config=config,
        joint_count=db.joint_count,
        num_actions=db.num_actions,
    )


def _nearest_state(states, progress):
    """Closest trained state by Hamming distance, lexicographic tie-break."""
    def key(s):
        ham = sum(1 for a, b in zip(s, progress) if a != b) + abs(len(s) - len(progress))
        return (ham, s)
    return min(states, key=key)


def predict_motion(
    bundle: PredictorBundle,
    f_prev: np.ndarray,
    progress: tuple,
    noisy: NoisyInputParams = NoisyInputParams(),
) -> MotionPrediction:
    """Weighted mixture over action classes of noisy-input GP posteriors.

    Unseen progress states fall back to the nearest trained state and are
    flagged on the result.
    """
    progress = tuple(progress)
    fallback = progress not in bundle.classifiers
    state = _nearest_state(bundle.states, progress) if fallback else progress
    clf = bundle.classifiers[state]
    probs = ivm_classify(clf, f_prev)

    actions = tuple(sorted(probs))
    weights = np.array([probs[a] for a in actions])
    weights = weights / weights.sum()

    means, variances = [], []
    offsets = None
    shape = None
    for action in actions:
        model = bundle.gps[(state, action)]
        mean, var = spgp_predict_noisy(model, f_prev, noisy)
        means.append(mean)
        variances.append(var)
        offsets = model.next_offsets
        shape = model.channel_shape
    return MotionPrediction(
        actions=actions,
        weights=weights,
        means=np.stack(means),
        variances=np.stack(variances),
        channel_shape=shape,
        frame_offsets=offsets,
        state_used=state,
        fallback=fallback,
    )


# ---------------------------------------------------------------------------
# Model archive
# ---------------------------------------------------------------------------

def _clf_to_dict(clf: ImportVectorClassifier) -> dict:
    return {
        "import_points": clf.import_points.tolist(),
        "alpha": clf.alpha.tolist(),
        "classes": list(clf.classes),
        "gamma": clf.gamma,
        "band": clf.band,
        "window_shape": list(clf.window_shape),
    }


def _clf_from_dict(d: dict) -> ImportVectorClassifier:
    clf = ImportVectorClassifier(
        import_points=np.asarray(d["import_points"], dtype=float).reshape(
            (-1,) + tuple(d["window_shape"])
        ),
        alpha=np.asarray(d["alpha"], dtype=float).reshape(
            len(d["import_points"]), len(d["classes"])
        ),
        classes=tuple(d["classes"]),
        gamma=float(d["gamma"]),
        band=d["band"],
        window_shape=tuple(d["window_shape"]),
    )
    if clf.gamma <= 0:
        raise ValueError("archive classifier has invalid kernel scale")
    return clf


def save_predictor(bundle: PredictorBundle, path) -> None:
    doc = {
        "config": asdict(bundle.config),
        "config_hash": bundle.config_hash,
        "joint_count": bundle.joint_count,
        "num_actions": bundle.num_actions,
        "classifiers": [
            {"state": list(state), "model": _clf_to_dict(clf)}
            for state, clf in sorted(bundle.classifiers.items())
        ],
        "gps": [
            {"state": list(state), "action": action, "model": model_to_dict(gp)}
            for (state, action), gp in sorted(bundle.gps.items())
        ],
    }
    with open(path, "w", encoding="utf-8") as fp:
        json.dump(doc, fp, sort_keys=True)


def load_predictor(path) -> PredictorBundle:
    with open(path, "r", encoding="utf-8") as fp:
        doc = json.load(fp)
    config = PredictorConfig(**doc["config"])
    bundle = PredictorBundle(
        classifiers={
            tuple(item["state"]): _clf_from_dict(item["model"]) for item in doc["classifiers"]
        },
        gps={
            (tuple(item["state"]), item["action"]): model_from_dict(item["model"])
            for item in doc["gps"]
        },
        config=config,
        joint_count=int(doc["joint_count"]),
        num_actions=int(doc["num_actions"]),
        config_hash=doc["config_hash"],
    )
    if bundle.config_hash != config.hash():
        raise ValueError("archive config hash mismatch")
    for state in bundle.classifiers:
        for action in bundle.classifiers[state].classes:
            if (state, action) not in bundle.gps:
                raise ValueError("archive missing a GP for a classifier class")
    return bundle
