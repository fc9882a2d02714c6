"""Deterministic scenario runner: human playback, robot replanning, and the metric suite."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .geometry import GaussianSphere, KinematicChain, Link, Sphere, robot_sphere_arrays
from .gp import NoisyInputParams
from .metrics import PredictionEval, PredictionSample, eval_prediction, jerkiness, mhd, smoothness
from .motion import (
    MotionDatabase,
    MotionSequence,
    ReachConfig,
    compute_features,
    progress_from_prefix,
    synth_reach_dataset,
    time_scale,
)
from .planner import CostWeights, RecedingHorizonPlanner
from .predict import (
    MotionPrediction,
    PredictorBundle,
    PredictorConfig,
    predict_motion,
    train_predictor,
)
from .task import (
    HistogramTable,
    ProgressState,
    QTable,
    RewardSpec,
    TaskSpec,
    available_actions,
    best_action,
    build_histograms,
    q_learn,
    reward_prep,
    sample_order,
    total_reward,
)

PREDICTION_MODES = ("off", "plain", "noisy")


def build_chain(cfg: dict) -> KinematicChain:
    links = tuple(
        Link(
            offset=np.asarray(l["offset"], dtype=float),
            axis=np.asarray(l.get("axis", [0, 0, 1]), dtype=float),
            limits=tuple(l.get("limits", (-np.pi, np.pi))),
            spheres=tuple((float(f), float(r)) for f, r in l.get("spheres", [(0.5, 0.05)])),
        )
        for l in cfg["links"]
    )
    return KinematicChain(links=links, base=np.asarray(cfg.get("base", [0, 0, 0]), dtype=float))


@dataclass
class Scenario:
    """Validated scenario configuration."""

    raw: dict

    def __post_init__(self):
        for key in ("name", "robot", "human", "task", "planner", "prediction"):
            if key not in self.raw:
                raise ValueError(f"scenario missing section {key!r}")
        if self.raw["prediction"].get("mode", "noisy") not in PREDICTION_MODES:
            raise ValueError(f"prediction mode must be one of {PREDICTION_MODES}")

    @property
    def name(self) -> str:
        return self.raw["name"]

    @property
    def training_seed(self) -> int:
        return int(self.raw.get("training_seed", 0))

    @property
    def prediction_mode(self) -> str:
        return self.raw["prediction"].get("mode", "noisy")

    def chain(self) -> KinematicChain:
        return build_chain(self.raw["robot"]["chain"])

    def reach_config(self) -> ReachConfig:
        g = dict(self.raw["human"]["generator"])
        g["targets"] = tuple(np.asarray(t, dtype=float) for t in g["targets"])
        if "base_pose" in g:
            g["base_pose"] = np.asarray(g["base_pose"], dtype=float)
        if "joint_names" in g:
            g["joint_names"] = tuple(g["joint_names"])
        if "arm" in g:
            g["arm"] = tuple(g["arm"])
        if "phases" in g:
            g["phases"] = tuple(g["phases"])
        return ReachConfig(**g)

    def predictor_config(self) -> PredictorConfig:
        return PredictorConfig(**self.raw["prediction"].get("config", {}))

    def task_spec(self) -> TaskSpec:
        t = self.raw["task"]
        reward = RewardSpec(
            helpfulness=np.asarray(t["H"], dtype=float),
            w_prep=float(t.get("w_prep", 1.0)),
            w_delay=float(t.get("w_delay", 1.0)),
        )
        return TaskSpec(
            human_actions=tuple(t["human_actions"]),
            robot_actions=tuple(t["robot_actions"]),
            order=t["order"],
            reward=reward,
            nominal_durations=tuple(t.get("nominal_human_s", ())),
        )

    def static_spheres(self) -> list:
        return [
            Sphere(center=np.asarray(s["center"], dtype=float), radius=float(s["radius"]))
            for s in self.raw.get("static_obstacles", [])
        ]

    def human_alone_seconds(self) -> float:
        t = self.raw["task"]
        total = sum(t.get("nominal_human_s", ())) + sum(t.get("nominal_robot_s", ()))
        return float(total)

    def config_hash(self) -> str:
        import hashlib

        return hashlib.sha256(
            json.dumps(self.raw, sort_keys=True, default=_json_default).encode()
        ).hexdigest()[:16]


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer, np.floating)):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o)}")


def load_scenario(source) -> Scenario:
    if isinstance(source, Scenario):
        return source
    if isinstance(source, dict):
        return Scenario(raw=source)
    with open(source, "r", encoding="utf-8") as fp:
        return Scenario(raw=json.load(fp))


# ---------------------------------------------------------------------------
# Human playback
# ---------------------------------------------------------------------------

class HumanPlayback:
    """Ground-truth human timeline assembled from held-out demonstrations."""

    def __init__(self, demos, actions, fps: float, starts=None):
        times, positions, labels = [], [], []
        t0 = 0.0
        for k, (demo, action) in enumerate(zip(demos, actions)):
            if starts is not None:
                t0 = max(t0, float(starts[k]))
            t = demo.frame_times - demo.frame_times[0] + t0
            times.append(t)
            positions.append(demo.joint_positions)
            labels.append(np.full(len(t), action, dtype=int))
            t0 = t[-1] + 1.0 / fps
        self.times = np.concatenate(times)
        self.positions = np.concatenate(positions, axis=0)
        self.labels = np.concatenate(labels)
        self.fps = fps

    @property
    def end_time(self) -> float:
        return float(self.times[-1])

    @property
    def joint_count(self) -> int:
        return self.positions.shape[1]

    def positions_at(self, t: float) -> np.ndarray:
        t = min(max(t, self.times[0]), self.times[-1])
        i = int(np.searchsorted(self.times, t, side="right") - 1)
        if i >= len(self.times) - 1:
            return self.positions[-1]
        u = (t - self.times[i]) / (self.times[i + 1] - self.times[i])
        return (1 - u) * self.positions[i] + u * self.positions[i + 1]

    def action_at(self, t: float) -> int:
        i = int(np.searchsorted(self.times, min(t, self.times[-1]), side="right") - 1)
        return int(self.labels[max(i, 0)])

    def completed_human(self, t: float, num_actions: int) -> tuple:
        i = int(np.searchsorted(self.times, min(t, self.times[-1]), side="right") - 1)
        prefix = self.labels[: max(i, 0) + 1]
        done = progress_from_prefix(prefix, num_actions)
        if t >= self.end_time:
            done = tuple(
                max(d, 1 if a == self.labels[-1] else d)
                for a, d in zip(range(num_actions), done)
            )
        return done

    def window_frames(self, t: float, n_p: int) -> tuple:
        """Times and ground-truth positions of the n_p playback frames ending at t."""
        dt = 1.0 / self.fps
        ts = t - dt * np.arange(n_p - 1, -1, -1)
        pos = np.stack([self.positions_at(x) for x in ts])
        return ts, pos

    def future_frames(self, t: float, offsets: np.ndarray) -> np.ndarray:
        return np.stack([self.positions_at(t + o) for o in np.asarray(offsets)])


def build_playback(scenario: Scenario, seed) -> HumanPlayback:
    """Assemble a held-out, speed-scaled, ordering-consistent human timeline."""
    cfg = scenario.reach_config()
    hcfg = scenario.raw["human"]
    playback_cfg = ReachConfig(
        targets=cfg.targets,
        repetitions=int(hcfg.get("playback_repetitions", 3)),
        fps=cfg.fps,
        duration=cfg.duration,
        base_pose=cfg.base_pose,
        joint_names=cfg.joint_names,
        arm=cfg.arm,
        action_names=cfg.action_names,
    )
    db = synth_reach_dataset(playback_cfg, np.random.SeedSequence((scenario.training_seed, 77)))
    task = scenario.task_spec()
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1,)))
    order = sample_order(task.groups, rng)
    speed = float(hcfg.get("speed", 1.0))
    demos = []
    for action in order:
        reps = [d for d in db.demonstrations if d.actions[0] == action]
        demo = reps[int(rng.integers(len(reps)))]
        demos.append(time_scale(demo.motion, speed))
    starts = None
    script = hcfg.get("script")
    if script and "traverse_block" in script:
        # reach k launches against the robot's k-th nominal traverse so the arm
        # occupies the crossing while the robot approaches
        pcfg = scenario.raw["planner"]
        traverse_s = int(pcfg.get("n_waypoints", 20)) * float(pcfg.get("replan_s", 0.5)) \
            / int(pcfg.get("m", 2))
        lead = float(script["traverse_block"].get("lead", 0.6))
        starts = []
        for k, demo in enumerate(demos):
            idle_offset = cfg.phases[0] * demo.frame_times[-1]
            starts.append(max(0.0, k * traverse_s + lead - idle_offset))
    return HumanPlayback(demos, list(order), fps=cfg.fps * speed, starts=starts)


# ---------------------------------------------------------------------------
# Model training (cached per scenario content)
# ---------------------------------------------------------------------------

_BUNDLE_CACHE: dict = {}


def trained_bundle(scenario: Scenario) -> PredictorBundle:
    key = (
        json.dumps(scenario.raw["human"]["generator"], sort_keys=True, default=_json_default),
        json.dumps(scenario.raw["prediction"].get("config", {}), sort_keys=True),
        scenario.training_seed,
    )
    if key not in _BUNDLE_CACHE:
        db = synth_reach_dataset(scenario.reach_config(), scenario.training_seed)
        _BUNDLE_CACHE[key] = train_predictor(
            db, scenario.predictor_config(), scenario.training_seed
        )
    return _BUNDLE_CACHE[key]


def task_histograms(task: TaskSpec, frames_per_action: int = 8, samples: int = 64,
                    seed: int = 0) -> HistogramTable:
    """Histograms learned from label sequences sampled from the task ordering."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 3)))
    seqs = []
    for _ in range(samples):
        order = sample_order(task.groups, rng)
        seqs.append(np.repeat(order, frames_per_action))
    return build_histograms(seqs, num_actions=len(task.human_actions))


class TaskEpisodeEnv:
    """Offline task MDP: the robot interleaves with a sampled human order."""

    def __init__(self, task: TaskSpec, table: HistogramTable, seed: int = 0):
        self.task = task
        self.table = table
        self.rng = np.random.default_rng(np.random.SeedSequence((seed, 4)))
        self.state = task.initial_state()
        self.order: tuple = ()
        self.human_idx = 0

    def _available(self):
        return tuple(
            a for a in range(len(self.task.robot_actions)) if self.state.robot[a] == 0
        ) or tuple(range(len(self.task.robot_actions)))

    def reset(self):
        self.state = self.task.initial_state()
        self.order = sample_order(self.task.groups, self.rng)
        self.human_idx = 0
        return self.state, self._available()

    def step(self, action: int):
        prep = reward_prep(
            (self.state.human, self.order[self.human_idx] if self.human_idx < len(self.order)
             else self.order[-1]),
            action, self.task.reward, self.table,
        )
        reward = total_reward(prep, 0.0, self.task.reward)
        self.state = self.state.complete_robot(action)
        if self.human_idx < len(self.order):
            self.state = self.state.complete_human(self.order[self.human_idx])
            self.human_idx += 1
        done = all(c > 0 for c in self.state.robot)
        return self.state, reward, done, self._available()


def trained_qtable(task: TaskSpec, table: HistogramTable, episodes: int = 150,
                   seed: int = 0) -> QTable:
    env = TaskEpisodeEnv(task, table, seed=seed)
    return q_learn(env, episodes, num_actions=len(task.robot_actions),
                   seed=np.random.SeedSequence((seed, 5)))


# ---------------------------------------------------------------------------
# Scene construction
# ---------------------------------------------------------------------------

def _limb_spheres_from_frames(frames_mean, frames_var, limbs, u_samples, radius, frame_u):
    """GaussianSpheres for one class at one interpolated prediction frame."""
    k0, k1, a = frame_u
    mean = (1 - a) * frames_mean[k0] + a * frames_mean[k1]
    var = (1 - a) * frames_var[k0] + a * frames_var[k1]
    spheres = []
    for j1, j2 in limbs:
        for u in u_samples:
            mu = (1 - u) * mean[j1] + u * mean[j2]
            cov = np.diag((1 - u) ** 2 * var[j1] + u**2 * var[j2])
            spheres.append(GaussianSphere(mean=mu, cov=cov, radius=radius))
    return spheres


def prediction_scene(prediction: MotionPrediction, t_pred: float, limbs, u_samples,
                     radius: float, drop_budget: float = 0.01):
    """Scene supplier mapping absolute time to the mixture of limb spheres.

    Classes are dropped smallest-first while their cumulative weight stays
    within drop_budget; the weighted bound loses at most that much.
    """
    offsets = prediction.frame_offsets
    order = np.argsort(prediction.weights)
    keep = np.ones(len(order), dtype=bool)
    dropped = 0.0
    for i in order:
        if dropped + prediction.weights[i] > drop_budget:
            break
        dropped += prediction.weights[i]
        keep[i] = False
    kept = [
        (float(w), prediction.class_frames(i))
        for i, w in enumerate(prediction.weights)
        if keep[i]
    ]

    def scene(t: float):
        rel = t - t_pred
        k = np.searchsorted(offsets, rel)
        if k <= 0:
            frame_u = (0, 0, 0.0)
        elif k >= len(offsets):
            frame_u = (len(offsets) - 1, len(offsets) - 1, 0.0)
        else:
            a = (rel - offsets[k - 1]) / (offsets[k] - offsets[k - 1])
            frame_u = (k - 1, k, float(a))
        return [
            (w, _limb_spheres_from_frames(mean, var, limbs, u_samples, radius, frame_u))
            for w, (mean, var) in kept
        ]

    return scene


def static_pose_scene(positions: np.ndarray, limbs, u_samples, radius: float,
                      sigma: float):
    """No-prediction scene: the current pose persists across the window.

    The covariance floor covers sensor noise plus the staleness of the pose by
    the time the planned segment executes.
    """
    cov = np.eye(3) * max(sigma, 0.045) ** 2
    spheres = []
    for j1, j2 in limbs:
        for u in u_samples:
            mu = (1 - u) * positions[j1] + u * positions[j2]
            spheres.append(GaussianSphere(mean=mu, cov=cov, radius=radius))
    mixture = [(1.0, spheres)]

    def scene(t: float):
        return mixture

    return scene


def ground_truth_clearance(chain, q, positions, limbs, u_samples, radius) -> float:
    """Signed surface distance between robot spheres and true human limb spheres."""
    centers, radii = robot_sphere_arrays(chain, q)
    best = np.inf
    for j1, j2 in limbs:
        for u in u_samples:
            c = (1 - u) * positions[j1] + u * positions[j2]
            d = np.linalg.norm(centers - c, axis=1) - radii - radius
            best = min(best, float(d.min()))
    return best


# ---------------------------------------------------------------------------
# Run loop
# ---------------------------------------------------------------------------

@dataclass
class CycleRecord:
    sim_time: float
    subtask: str
    executed_times: list
    executed_waypoints: list
    planned_bounds: list
    waited: bool
    feasible: bool
    delay_total: float
    min_clearance: float
    predicted_action: int | None
    dominant_weight: float | None
    fallback: bool


@dataclass
class RunTrace:
    scenario: str
    seed: int
    prediction_mode: str
    cycles: list = field(default_factory=list)
    prediction_samples: list = field(default_factory=list)
    mhd_values: list = field(default_factory=list)
    prediction_latency_s: list = field(default_factory=list)  # wall clock, not serialized
    completion_time: float = 0.0
    total_delay: float = 0.0
    collision_events: int = 0
    subtask_events: list = field(default_factory=list)

    def executed(self) -> tuple:
        t, q = [], []
        for c in self.cycles:
            for i, ti in enumerate(c.executed_times):
                if t and ti <= t[-1] + 1e-12:
                    continue
                t.append(ti)
                q.append(c.executed_waypoints[i])
        return np.array(t), np.array(q)

    def executed_by_subtask(self) -> list:
        """(subtask, times, waypoints) per executed subtask, in order."""
        groups = []
        for c in self.cycles:
            if groups and groups[-1][0] == c.subtask:
                tg, qg = groups[-1][1], groups[-1][2]
            else:
                groups.append((c.subtask, [], []))
                tg, qg = groups[-1][1], groups[-1][2]
            for i, ti in enumerate(c.executed_times):
                if tg and ti <= tg[-1] + 1e-12:
                    continue
                tg.append(ti)
                qg.append(c.executed_waypoints[i])
        return [(s, np.array(tg), np.array(qg)) for s, tg, qg in groups]

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "prediction_mode": self.prediction_mode,
            "completion_time": self.completion_time,
            "total_delay": self.total_delay,
            "collision_events": self.collision_events,
            "subtask_events": self.subtask_events,
            "mhd_values": self.mhd_values,
            "cycles": [
                {
                    "t": c.sim_time,
                    "subtask": c.subtask,
                    "executed_times": c.executed_times,
                    "executed_waypoints": c.executed_waypoints,
                    "planned_bounds": c.planned_bounds,
                    "waited": c.waited,
                    "feasible": c.feasible,
                    "delay_total": c.delay_total,
                    "min_clearance": c.min_clearance,
                    "predicted_action": c.predicted_action,
                    "dominant_weight": c.dominant_weight,
                    "fallback": c.fallback,
                }
                for c in self.cycles
            ],
        }

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, default=_json_default)


def run_scenario(scenario, seed: int) -> RunTrace:
    """Simulate one run: human playback, per-cycle prediction, robot replanning."""
    scenario = load_scenario(scenario)
    chain = scenario.chain()
    hcfg = scenario.raw["human"]
    pcfg = scenario.raw["planner"]
    task = scenario.task_spec()
    mode = scenario.prediction_mode
    limbs = [tuple(l) for l in hcfg["limbs"]]
    u_samples = np.linspace(0.0, 1.0, int(hcfg.get("u_samples", 3)))
    radius = float(hcfg.get("sphere_radius", 0.06))
    noise_sigma = float(hcfg.get("noise_sigma", 0.0))
    replan_s = float(pcfg.get("replan_s", 0.5))

    playback = build_playback(scenario, seed)
    bundle = trained_bundle(scenario) if mode != "off" else None
    noisy = NoisyInputParams(
        sigma=float(scenario.raw["prediction"].get("sigma", noise_sigma)),
        velocity_limit=float(scenario.raw["prediction"].get("velocity_limit", 1.0)),
    ) if mode == "noisy" else NoisyInputParams()

    table = task_histograms(task, seed=scenario.training_seed)
    policy = scenario.raw["robot"].get("policy", "in_order")
    qtable = trained_qtable(task, table, seed=scenario.training_seed) \
        if policy == "qtable" else None

    subtasks = list(scenario.raw["robot"]["subtasks"])
    home = np.asarray(scenario.raw["robot"]["home"], dtype=float)
    obs_rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(2,)))

    trace = RunTrace(scenario=scenario.name, seed=seed, prediction_mode=mode)
    state = task.initial_state()
    remaining = list(range(len(subtasks)))
    current = None
    planner = None
    sim_time = 0.0
    robot_q = home.copy()
    n_p = bundle.config.n_p if bundle else int(scenario.raw["prediction"].get("n_p", 10))
    max_time = float(scenario.raw.get("max_time", 60.0))
    hand = int(hcfg.get("hand_joint", scenario.reach_config().arm[2]))

    while sim_time < max_time:
        human_done = playback.completed_human(sim_time, len(task.human_actions))
        state = ProgressState(human_done + state.robot, state.n_human)

        if current is None and remaining:
            if qtable is not None:
                avail = [i for i in remaining]
                current = best_action(qtable, state, avail)
            else:
                current = remaining[0]
            goal = np.asarray(subtasks[current]["goal"], dtype=float)
            planner = RecedingHorizonPlanner(
                chain, robot_q, goal,
                static_spheres=scenario.static_spheres(),
                delta_cl=float(pcfg.get("delta_cl", 0.95)),
                weights=CostWeights(**pcfg.get("weights", {})),
                n_waypoints=int(pcfg.get("n_waypoints", 20)),
                replan_s=replan_s,
                waypoints_per_step=int(pcfg.get("m", 2)),
                n_starts=int(pcfg.get("n_starts", 2)),
                budget=int(pcfg.get("budget", 40)),
                seed=int(np.random.default_rng(
                    np.random.SeedSequence(entropy=seed, spawn_key=(3, current))
                ).integers(2**31)),
                t0=sim_time,
                hinge_margin=float(pcfg.get("hinge_margin", 0.8)),
            )
            trace.subtask_events.append(
                {"t": sim_time, "subtask": subtasks[current]["name"], "event": "start"}
            )

        # observation and prediction
        predicted_action = None
        dominant_weight = None
        fallback = False
        prediction = None
        if mode != "off":
            ts, pos = playback.window_frames(sim_time, n_p)
            if noise_sigma > 0:
                pos = pos + obs_rng.normal(0.0, noise_sigma, pos.shape)
            window = MotionSequence(frame_times=ts, joint_positions=pos)
            feats = compute_features(window).values
            t0 = time.perf_counter()
            prediction = predict_motion(bundle, feats, human_done, noisy)
            trace.prediction_latency_s.append(time.perf_counter() - t0)
            predicted_action, dominant_weight = prediction.dominant()
            fallback = prediction.fallback
            scene = prediction_scene(prediction, sim_time, limbs, u_samples, radius)
            true_next = playback.future_frames(sim_time, prediction.frame_offsets)
            trace.prediction_samples.append(
                PredictionSample(
                    weights=prediction.weights,
                    actions=prediction.actions,
                    mean=prediction.mixture_mean(),
                    variance=prediction.mixture_variance(),
                    offsets=prediction.frame_offsets,
                    true_action=playback.action_at(sim_time),
                    true_next=true_next,
                )
            )
            trace.mhd_values.append(
                mhd(prediction.mixture_mean()[:, hand, :], true_next[:, hand, :])
            )
        else:
            pos = playback.positions_at(sim_time)
            if noise_sigma > 0:
                pos = pos + obs_rng.normal(0.0, noise_sigma, pos.shape)
            scene = static_pose_scene(pos, limbs, u_samples, radius, noise_sigma)

        if planner is not None and not planner.done:
            rec = planner.step(scene)
            clearances = [
                ground_truth_clearance(chain, q, playback.positions_at(t),
                                       limbs, u_samples, radius)
                for t, q in zip(rec.executed_times, rec.executed_waypoints)
            ]
            min_clear = float(min(clearances))
            if min_clear < 0:
                trace.collision_events += 1
            robot_q = rec.executed_waypoints[-1].copy()
            trace.cycles.append(
                CycleRecord(
                    sim_time=sim_time,
                    subtask=subtasks[current]["name"],
                    executed_times=[float(x) for x in rec.executed_times],
                    executed_waypoints=[list(map(float, q)) for q in rec.executed_waypoints],
                    planned_bounds=[float(b) for b in rec.planned_bounds],
                    waited=rec.waited,
                    feasible=rec.feasible,
                    delay_total=rec.delay_total,
                    min_clearance=min_clear,
                    predicted_action=predicted_action,
                    dominant_weight=dominant_weight,
                    fallback=fallback,
                )
            )
            if planner.done:
                trace.total_delay += planner.delay
                trace.subtask_events.append(
                    {"t": sim_time + replan_s, "subtask": subtasks[current]["name"],
                     "event": "done"}
                )
                state = state.complete_robot(current)
                remaining.remove(current)
                current = None
                planner = None
        sim_time += replan_s
        if not remaining and current is None and sim_time >= playback.end_time:
            break

    trace.completion_time = sim_time
    return trace


def prediction_noise_eval(scenario, sigma: float, seed: int, n_queries: int = 120):
    """Evaluate the predictor on held-out windows under injected input noise.

    Noise of std `sigma` perturbs the observed window positions; the predictor
    is told the same sigma through its noisy-input parameters. Ground truth
    stays clean.
    """
    scenario = load_scenario(scenario)
    bundle = trained_bundle(scenario)
    cfg = scenario.reach_config()
    held = ReachConfig(
        targets=cfg.targets, repetitions=4, fps=cfg.fps, duration=cfg.duration,
        base_pose=cfg.base_pose, joint_names=cfg.joint_names, arm=cfg.arm,
        action_names=cfg.action_names,
    )
    db = synth_reach_dataset(held, np.random.SeedSequence((scenario.training_seed, 99)))
    from .motion import extract_windows  # local to avoid a cycle at import time

    windows = []
    for demo in db.demonstrations:
        for w in extract_windows(demo, bundle.config.n_p, bundle.config.n_f,
                                 num_actions=db.num_actions, stride=3):
            windows.append((w, demo))
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(9,)))
    idx = rng.choice(len(windows), size=min(n_queries, len(windows)), replace=False)
    noisy = NoisyInputParams(
        sigma=max(sigma, 1e-6),
        velocity_limit=float(scenario.raw["prediction"].get("velocity_limit", 1.0)),
    )
    samples = []
    for i in sorted(idx):
        w, demo = windows[i]
        s0 = w.frame_index
        t = demo.motion.frame_times[s0 - bundle.config.n_p + 1 : s0 + 1]
        pos = demo.motion.joint_positions[s0 - bundle.config.n_p + 1 : s0 + 1]
        if sigma > 0:
            pos = pos + rng.normal(0.0, sigma, pos.shape)
        feats = compute_features(MotionSequence(frame_times=t, joint_positions=pos)).values
        pred = predict_motion(bundle, feats, w.progress, noisy)
        samples.append(
            PredictionSample(
                weights=pred.weights,
                actions=pred.actions,
                mean=pred.mixture_mean(),
                variance=pred.mixture_variance(),
                offsets=pred.frame_offsets,
                true_action=w.current_action,
                true_next=w.next_positions[: pred.channel_shape[0]],
            )
        )
    return eval_prediction(samples)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Metrics:
    scenario: str
    seed: int
    model: str
    prediction_ms: float  # nan when unavailable
    mhd_m: float
    smoothness: float
    jerkiness: float
    min_distance_m: float
    efficiency: float
    classification_precision: float
    regression_precision: float
    regression_accuracy: float
    total_delay: float
    collision_events: int


MODEL_LABELS = {"off": "no-prediction", "plain": "prediction", "noisy": "noisy-prediction"}


def metrics_report(trace: RunTrace, baseline) -> Metrics:
    """Assemble the metric suite; `baseline` is the human-alone completion time
    in seconds (or a trace whose completion time stands in for it)."""
    if not trace.cycles:
        raise ValueError("trace has no executed cycles")
    human_alone = baseline.completion_time if isinstance(baseline, RunTrace) else float(baseline)
    if human_alone <= 0 or trace.completion_time <= 0:
        raise ValueError("completion times must be positive")
    # each subtask is one planned trajectory; aggregating per subtask keeps the
    # direction-reversal spikes between deliveries out of the smoothness score
    smooth_vals, jerk_vals = [], []
    for _, t, q in trace.executed_by_subtask():
        if len(t) >= 3:
            smooth_vals.append(smoothness(q, t))
            jerk_vals.append(jerkiness(q, t))
    if not smooth_vals:
        raise ValueError("trace too short for smoothness metrics")
    ev: PredictionEval | None = None
    if trace.prediction_samples:
        ev = eval_prediction(trace.prediction_samples)
    lat = trace.prediction_latency_s
    return Metrics(
        scenario=trace.scenario,
        seed=trace.seed,
        model=MODEL_LABELS[trace.prediction_mode],
        prediction_ms=float(np.mean(lat) * 1e3) if lat else float("nan"),
        mhd_m=float(np.mean(trace.mhd_values)) if trace.mhd_values else float("nan"),
        smoothness=float(np.mean(smooth_vals)),
        jerkiness=float(np.max(jerk_vals)),
        min_distance_m=max(0.0, min(c.min_clearance for c in trace.cycles)),
        efficiency=human_alone / trace.completion_time,
        classification_precision=ev.classification_precision if ev else float("nan"),
        regression_precision=ev.regression_precision if ev else float("nan"),
        regression_accuracy=ev.regression_accuracy if ev else float("nan"),
        total_delay=trace.total_delay,
        collision_events=trace.collision_events,
    )
