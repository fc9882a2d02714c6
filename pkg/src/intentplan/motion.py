"""Motion dataset model, feature extraction, and a synthetic reach-motion generator."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MotionSequence:
    """Tracked joint positions over time.

    frame_times are seconds, strictly increasing; joint_positions has shape
    (T, J, 3) in meters with a fixed joint count J.
    """

    frame_times: np.ndarray
    joint_positions: np.ndarray

    def __post_init__(self):
        t = _readonly(self.frame_times)
        p = _readonly(self.joint_positions)
        if t.ndim != 1 or p.ndim != 3 or p.shape[2] != 3:
            raise ValueError("expected frame_times (T,) and joint_positions (T, J, 3)")
        if p.shape[0] != t.shape[0]:
            raise ValueError("frame count mismatch between times and positions")
        if t.shape[0] == 0:
            raise ValueError("empty motion sequence")
        if not np.all(np.diff(t) > 0):
            raise ValueError("frame_times must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(p))):
            raise ValueError("non-finite values in motion sequence")
        object.__setattr__(self, "frame_times", t)
        object.__setattr__(self, "joint_positions", p)

    @property
    def frame_count(self) -> int:
        return self.frame_times.shape[0]

    @property
    def joint_count(self) -> int:
        return self.joint_positions.shape[1]

    @property
    def duration(self) -> float:
        return float(self.frame_times[-1] - self.frame_times[0])


@dataclass(frozen=True)
class FeatureSequence:
    """Per-frame concatenation of joint positions, velocities, and accelerations (9J)."""

    frame_times: np.ndarray
    values: np.ndarray  # (T, 9J)
    joint_count: int

    def __post_init__(self):
        t = _readonly(self.frame_times)
        v = _readonly(self.values)
        if v.ndim != 2 or v.shape[0] != t.shape[0]:
            raise ValueError("feature values must be (T, D) matching frame_times")
        if v.shape[1] != 9 * self.joint_count:
            raise ValueError("feature dimension must be 9 * joint_count")
        object.__setattr__(self, "frame_times", t)
        object.__setattr__(self, "values", v)

    @property
    def frame_count(self) -> int:
        return self.frame_times.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class LabeledDemonstration:
    """One demonstration: motion, derived features, and a per-frame action label."""

    motion: MotionSequence
    features: FeatureSequence
    actions: np.ndarray  # (T,) int action indices

    def __post_init__(self):
        a = np.ascontiguousarray(self.actions, dtype=int)
        a.setflags(write=False)
        if a.ndim != 1 or a.shape[0] != self.motion.frame_count:
            raise ValueError("actions length must equal frame count")
        if np.any(a < 0):
            raise ValueError("action indices must be non-negative")
        if self.features.frame_count != self.motion.frame_count:
            raise ValueError("features and motion must share frame count")
        if self.features.joint_count != self.motion.joint_count:
            raise ValueError("features and motion must share joint count")
        object.__setattr__(self, "actions", a)

    @property
    def frame_count(self) -> int:
        return self.motion.frame_count


@dataclass(frozen=True)
class MotionDatabase:
    """Labeled demonstrations sharing one joint layout and action vocabulary."""

    demonstrations: tuple
    action_names: tuple
    joint_names: tuple

    def __post_init__(self):
        demos = tuple(self.demonstrations)
        names = tuple(self.action_names)
        joints = tuple(self.joint_names)
        if not demos:
            raise ValueError("database needs at least one demonstration")
        j = demos[0].motion.joint_count
        for d in demos:
            if d.motion.joint_count != j:
                raise ValueError("all demonstrations must share the joint count")
            if len(joints) != j:
                raise ValueError("joint_names must match joint count")
            if int(d.actions.max(initial=0)) >= len(names):
                raise ValueError("action label outside the action vocabulary")
        object.__setattr__(self, "demonstrations", demos)
        object.__setattr__(self, "action_names", names)
        object.__setattr__(self, "joint_names", joints)

    @property
    def joint_count(self) -> int:
        return self.demonstrations[0].motion.joint_count

    @property
    def num_actions(self) -> int:
        return len(self.action_names)


@dataclass(frozen=True)
class TrainingWindow:
    """A (past features, progress, current action, future motion) training sample."""

    prev_features: np.ndarray   # (n_p, 9J)
    progress: tuple             # completed-action counters over the human action set
    current_action: int
    next_positions: np.ndarray  # (n_f, J, 3)
    next_offsets: np.ndarray    # (n_f,) seconds after the window anchor frame
    demo_index: int = -1
    frame_index: int = -1       # 0-based anchor frame s

    def __post_init__(self):
        object.__setattr__(self, "prev_features", _readonly(self.prev_features))
        object.__setattr__(self, "next_positions", _readonly(self.next_positions))
        object.__setattr__(self, "next_offsets", _readonly(self.next_offsets))


def compute_features(motion: MotionSequence) -> FeatureSequence:
    """Derive the 9J feature matrix: positions plus finite-difference velocities and accelerations.

    Central differences on interior frames, one-sided at the boundaries.
    """
    if motion.frame_count < 3:
        raise ValueError("need at least 3 frames to differentiate")
    t = motion.frame_times
    flat = motion.joint_positions.reshape(motion.frame_count, -1)
    vel = np.gradient(flat, t, axis=0)
    acc = np.gradient(vel, t, axis=0)
    values = np.concatenate([flat, vel, acc], axis=1)
    return FeatureSequence(frame_times=t, values=values, joint_count=motion.joint_count)


def progress_from_prefix(labels: np.ndarray, num_actions: int, counting: bool = False) -> tuple:
    """Completion counters implied by a label prefix.

    A run of some action counts as completed once a different label follows it
    within the prefix. Binary flags by default; `counting` keeps integer counts
    for tasks whose actions repeat.
    """
    counts = [0] * num_actions
    labels = np.asarray(labels, dtype=int)
    for i in range(len(labels) - 1):
        if labels[i + 1] != labels[i]:
            if counting:
                counts[labels[i]] += 1
            else:
                counts[labels[i]] = 1
    return tuple(counts)


def extract_windows(
    demo: LabeledDemonstration,
    n_p: int,
    n_f: int,
    num_actions: int | None = None,
    stride: int = 1,
    counting: bool = False,
) -> list[TrainingWindow]:
    """Slide a (n_p past, n_f future) window over a demonstration.

    Anchors s run over every frame with n_p history and n_f future frames
    available; a too-short demonstration yields an empty list.
    """
    if n_p < 1 or n_f < 1:
        raise ValueError("n_p and n_f must be >= 1")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    T = demo.frame_count
    if T < n_p + n_f:
        return []
    if num_actions is None:
        num_actions = int(demo.actions.max()) + 1
    t = demo.motion.frame_times
    windows = []
    # 1-based anchor s in [n_p, T - n_f] maps to 0-based s0 in [n_p - 1, T - n_f - 1]
    for s0 in range(n_p - 1, T - n_f, stride):
        windows.append(
            TrainingWindow(
                prev_features=demo.features.values[s0 - n_p + 1 : s0 + 1],
                progress=progress_from_prefix(demo.actions[: s0 + 1], num_actions, counting),
                current_action=int(demo.actions[s0]),
                next_positions=demo.motion.joint_positions[s0 + 1 : s0 + 1 + n_f],
                next_offsets=t[s0 + 1 : s0 + 1 + n_f] - t[s0],
                demo_index=-1,
                frame_index=s0,
            )
        )
    return windows


def inject_noise(motion: MotionSequence, sigma: float, seed) -> MotionSequence:
    """Add i.i.d. zero-mean Gaussian noise (std sigma, meters) to every coordinate."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return MotionSequence(motion.frame_times, motion.joint_positions)
    rng = np.random.default_rng(seed)
    noisy = motion.joint_positions + rng.normal(0.0, sigma, motion.joint_positions.shape)
    return MotionSequence(motion.frame_times, noisy)


def time_scale(motion: MotionSequence, factor: float) -> MotionSequence:
    """Speed the motion up by `factor` (> 1 is faster): frame times divide by it."""
    if factor <= 0:
        raise ValueError("factor must be > 0")
    return MotionSequence(motion.frame_times / factor, motion.joint_positions)


# ---------------------------------------------------------------------------
# Synthetic reach dataset
# ---------------------------------------------------------------------------

UPPER_BODY_JOINTS = (
    "pelvis", "torso", "neck", "head",
    "left_shoulder", "left_elbow", "left_hand",
    "right_shoulder", "right_elbow", "right_hand",
)


def default_upper_body_pose() -> np.ndarray:
    """Seated upper-body rest pose (10 joints, meters), facing +x."""
    return np.array([
        [0.00, 0.00, 0.55],   # pelvis
        [0.00, 0.00, 0.85],   # torso
        [0.00, 0.00, 1.05],   # neck
        [0.00, 0.00, 1.20],   # head
        [0.00, 0.20, 1.00],   # left_shoulder
        [0.05, 0.30, 0.85],   # left_elbow
        [0.15, 0.35, 0.72],   # left_hand
        [0.00, -0.20, 1.00],  # right_shoulder
        [0.05, -0.30, 0.85],  # right_elbow
        [0.15, -0.35, 0.72],  # right_hand
    ])


@dataclass(frozen=True)
class ReachConfig:
    """Parameters for the synthetic reach-motion generator."""

    targets: tuple            # hand target positions, each (3,)
    repetitions: int = 30
    fps: float = 10.0
    duration: float = 3.0     # nominal seconds per demonstration
    base_pose: np.ndarray = field(default_factory=default_upper_body_pose)
    joint_names: tuple = UPPER_BODY_JOINTS
    arm: tuple = (7, 8, 9)    # shoulder, elbow, hand joint indices
    action_names: tuple | None = None
    phases: tuple = (0.2, 0.3, 0.1, 0.3)  # idle, reach, hold, return fractions

    def __post_init__(self):
        targets = tuple(np.asarray(t, dtype=float) for t in self.targets)
        if not targets:
            raise ValueError("at least one target is required")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.fps <= 0 or self.duration <= 0:
            raise ValueError("fps and duration must be positive")
        pose = np.asarray(self.base_pose, dtype=float)
        if pose.shape != (len(self.joint_names), 3):
            raise ValueError("base_pose must be (J, 3) matching joint_names")
        phases = tuple(float(p) for p in self.phases)
        if len(phases) != 4 or min(phases) <= 0 or sum(phases) >= 1.0:
            raise ValueError("phases must be 4 positive fractions summing below 1")
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "base_pose", pose)
        object.__setattr__(self, "phases", phases)


def _ease(u: np.ndarray) -> np.ndarray:
    """Cubic ease-in/out on [0, 1]."""
    return 3.0 * u**2 - 2.0 * u**3


def default_table_targets(n: int = 8) -> tuple:
    """Target positions spread across a table edge in front of the pose."""
    ys = np.linspace(-0.45, 0.45, n)
    return tuple(np.array([0.55, y, 0.78]) for y in ys)


def synth_reach_dataset(config: ReachConfig, seed) -> MotionDatabase:
    """Generate idle -> reach -> return demonstrations, one action label per target.

    Deterministic per seed; repetitions differ through seeded duration, start
    pose, and reach-arc variation. The hand lands within 1 mm of its target.
    """
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = root.spawn(len(config.targets) * config.repetitions)
    demos = []
    shoulder, elbow, hand = config.arm
    for k, target in enumerate(config.targets):
        for r in range(config.repetitions):
            rng = np.random.default_rng(children[k * config.repetitions + r])
            duration = config.duration * rng.uniform(0.9, 1.1)
            n = max(int(round(duration * config.fps)) + 1, 8)
            t = np.arange(n) / config.fps

            pose = config.base_pose + rng.normal(0.0, 0.002, 3)  # whole-body shift
            hand0 = pose[hand] + rng.normal(0.0, 0.003, 3)
            end_jitter = rng.normal(0.0, 0.0002, 3)
            nj = np.linalg.norm(end_jitter)
            if nj > 3e-4:
                end_jitter *= 3e-4 / nj
            hand1 = target + end_jitter
            arc_height = rng.uniform(0.02, 0.08)

            # phase boundaries as frame fractions: idle, reach, hold, return, idle
            u = t / t[-1]
            phase = np.zeros(n)
            p_idle, p_reach, p_hold, p_ret = config.phases
            reach_lo = p_idle
            reach_hi = reach_lo + p_reach
            hold_hi = reach_hi + p_hold
            ret_hi = hold_hi + p_ret
            rising = (u >= reach_lo) & (u < reach_hi)
            phase[rising] = _ease((u[rising] - reach_lo) / (reach_hi - reach_lo))
            phase[(u >= reach_hi) & (u < hold_hi)] = 1.0
            falling = (u >= hold_hi) & (u < ret_hi)
            phase[falling] = 1.0 - _ease((u[falling] - hold_hi) / (ret_hi - hold_hi))

            positions = np.repeat(pose[None, :, :], n, axis=0)
            disp = hand1 - hand0
            bow = arc_height * np.sin(np.pi * np.clip(phase, 0.0, 1.0))
            hand_path = hand0 + phase[:, None] * disp
            hand_path[:, 2] += bow
            positions[:, hand, :] = hand_path
            positions[:, elbow, :] = pose[elbow] + 0.5 * (hand_path - hand0)
            positions[:, shoulder, :] = pose[shoulder] + 0.1 * (hand_path - hand0)

            motion = MotionSequence(frame_times=t, joint_positions=positions)
            demos.append(
                LabeledDemonstration(
                    motion=motion,
                    features=compute_features(motion),
                    actions=np.full(n, k, dtype=int),
                )
            )
    action_names = config.action_names or tuple(f"reach_{k}" for k in range(len(config.targets)))
    return MotionDatabase(
        demonstrations=tuple(demos),
        action_names=tuple(action_names),
        joint_names=tuple(config.joint_names),
    )


# ---------------------------------------------------------------------------
# JSON Lines dataset files
# ---------------------------------------------------------------------------

def _demo_record(demo: LabeledDemonstration, idx: int, action_names, joint_names) -> dict:
    t = demo.motion.frame_times
    dt = np.diff(t)
    fps = float(1.0 / np.median(dt)) if len(dt) else 0.0
    return {
        "id": idx,
        "fps": fps,
        "joint_names": list(joint_names),
        "action_names": list(action_names),
        "frames": [
            {
                "t": float(t[i]),
                "positions": demo.motion.joint_positions[i].tolist(),
                "action": int(demo.actions[i]),
            }
            for i in range(demo.frame_count)
        ],
    }


def save_database(db: MotionDatabase, path) -> None:
    """Write one demonstration per line (JSON Lines; seconds and meters)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fp:
        for i, demo in enumerate(db.demonstrations):
            fp.write(json.dumps(_demo_record(demo, i, db.action_names, db.joint_names),
                                sort_keys=True))
            fp.write("\n")


def load_database(path) -> MotionDatabase:
    """Read a JSON Lines dataset; features are recomputed from positions."""
    path = Path(path)
    demos = []
    action_names = joint_names = None
    with path.open("r", encoding="utf-8") as fp:
        for line in fp:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if action_names is None:
                action_names = tuple(rec["action_names"])
                joint_names = tuple(rec["joint_names"])
            t = np.array([f["t"] for f in rec["frames"]])
            pos = np.array([f["positions"] for f in rec["frames"]])
            actions = np.array([f["action"] for f in rec["frames"]], dtype=int)
            motion = MotionSequence(frame_times=t, joint_positions=pos)
            demos.append(
                LabeledDemonstration(motion=motion, features=compute_features(motion), actions=actions)
            )
    if not demos:
        raise ValueError(f"no demonstrations in {path}")
    return MotionDatabase(demonstrations=tuple(demos), action_names=action_names, joint_names=joint_names)


def canonical_bytes(db: MotionDatabase) -> bytes:
    """Canonical serialization used for reproducibility checks."""
    out = []
    for i, demo in enumerate(db.demonstrations):
        out.append(json.dumps(_demo_record(demo, i, db.action_names, db.joint_names), sort_keys=True))
    return "\n".join(out).encode()
