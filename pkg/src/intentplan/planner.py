"""Receding-horizon trajectory optimization with probabilistic collision costs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .geometry import (
    KinematicChain,
    Sphere,
    check_confidence,
    prepare_obstacles,
    prepared_bounds,
    robot_sphere_arrays,
)
from .metrics import smoothness


@dataclass(frozen=True)
class TrajectoryMatrix:
    """Waypoint matrix: configurations against strictly increasing times."""

    times: np.ndarray      # (n+1,)
    waypoints: np.ndarray  # (n+1, dof)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        w = np.asarray(self.waypoints, dtype=float)
        if w.ndim == 1:
            w = w[:, None]
        if t.ndim != 1 or w.shape[0] != t.shape[0]:
            raise ValueError("times and waypoints must share the first dimension")
        if t.shape[0] < 2:
            raise ValueError("need at least two waypoints")
        if not np.all(np.diff(t) > 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "waypoints", w)

    @property
    def last_index(self) -> int:
        return self.times.shape[0] - 1

    @property
    def dof(self) -> int:
        return self.waypoints.shape[1]

    def with_waypoints(self, waypoints: np.ndarray) -> "TrajectoryMatrix":
        return TrajectoryMatrix(self.times.copy(), waypoints)


def straight_line_trajectory(q_start, q_goal, times) -> TrajectoryMatrix:
    times = np.asarray(times, dtype=float)
    q_start = np.atleast_1d(np.asarray(q_start, dtype=float))
    q_goal = np.atleast_1d(np.asarray(q_goal, dtype=float))
    u = (times - times[0]) / (times[-1] - times[0])
    return TrajectoryMatrix(times, q_start[None, :] + u[:, None] * (q_goal - q_start)[None, :])


@dataclass(frozen=True)
class CostWeights:
    smoothness: float = 1.0
    static: float = 200.0
    dynamic: float = 200.0


@dataclass
class PlanContext:
    """Everything a cost evaluation needs: chain, obstacles, scene, and the window."""

    chain: KinematicChain
    static_spheres: list = field(default_factory=list)
    scene: object = None            # callable t -> [(weight, [GaussianSphere]), ...]
    delta_cl: float = 0.95
    weights: CostWeights = field(default_factory=CostWeights)
    replan_m: int = 2
    exec_index: int = 0
    window_override: tuple | None = None
    hinge_margin: float = 0.8       # optimizer pushes bounds below margin * (1 - delta)
    paper_literal_bound: bool = False

    def __post_init__(self):
        if not (0 < self.delta_cl < 1):
            raise ValueError("delta_cl must be in (0, 1)")
        if self.replan_m < 1:
            raise ValueError("replan_m must be >= 1")

    @property
    def threshold(self) -> float:
        return 1.0 - self.delta_cl

    def window(self, last_index: int) -> tuple:
        if self.window_override is not None:
            lo, hi = self.window_override
        else:
            lo = self.exec_index + self.replan_m
            hi = min(self.exec_index + 2 * self.replan_m, last_index)
        if lo < 0 or lo > last_index or hi > last_index:
            raise ValueError("collision window out of trajectory range")
        return lo, min(hi, last_index)


@dataclass(frozen=True)
class CostBreakdown:
    """Cost terms; `dynamic` is the raw windowed sum of per-frame probabilities."""

    smoothness: float
    static_obstacle: float
    dynamic: float
    dynamic_penalty: float
    frame_probabilities: np.ndarray  # aligned with window frames
    window: tuple
    total: float


_RAW_BOUND_CAP = 4.0  # keeps the hinge finite so the penetration gradient survives


@dataclass(frozen=True)
class PreparedMixture:
    """Class weights plus all classes' spheres stacked into one prepared batch."""

    weights: np.ndarray   # (C,)
    prep: object          # PreparedObstacles with C * slots entries, class-major
    slots: int


def prepare_mixture(mixture):
    """Eigendecompose the mixture's spheres once for reuse across robot poses.

    Classes must carry the same number of spheres (aligned limb slots).
    """
    entries = [(float(w), list(s)) for w, s in mixture if s]
    if not entries:
        return None
    slots = len(entries[0][1])
    if any(len(s) != slots for _, s in entries):
        raise ValueError("mixture classes must have aligned sphere slots")
    stacked = [sphere for _, spheres in entries for sphere in spheres]
    return PreparedMixture(
        weights=np.array([w for w, _ in entries]),
        prep=prepare_obstacles(stacked),
        slots=slots,
    )


def _frame_dynamic_prepared(q, pm: PreparedMixture | None, chain, paper_literal_bound=False):
    """(probability, raw bound, penetration) for one configuration.

    Probability follows the spec contract (per-pair clamped bounds, class
    weighted, max over pairs). The raw unclamped bound and the mean-penetration
    depth exist only to give the optimizer a gradient where the clamped
    probability saturates.
    """
    if pm is None:
        return 0.0, 0.0, 0.0
    centers, radii = robot_sphere_arrays(chain, q)
    raw, _ = prepared_bounds(centers, radii, pm.prep,
                             paper_literal_bound=paper_literal_bound, clip=False)
    a_n = centers.shape[0]
    raw3 = raw.reshape(a_n, len(pm.weights), pm.slots)
    prob_slot = np.einsum("acl,c->al", np.clip(raw3, 0.0, 1.0), pm.weights)
    raw_slot = np.einsum("acl,c->al", raw3, pm.weights)
    d = np.linalg.norm(centers[:, None, :] - pm.prep.means[None, :, :], axis=2)
    rr = radii[:, None] + pm.prep.radii[None, :]
    pen3 = (np.maximum(rr - d, 0.0) ** 2).reshape(a_n, len(pm.weights), pm.slots)
    penetration = float(np.einsum("acl,c->", pen3, pm.weights))
    return (
        float(np.clip(prob_slot.max(), 0.0, 1.0)),
        float(min(raw_slot.max(), _RAW_BOUND_CAP)),
        penetration,
    )


def _frame_dynamic(q, mixture, chain: KinematicChain, paper_literal_bound: bool = False):
    return _frame_dynamic_prepared(q, prepare_mixture(mixture), chain, paper_literal_bound)


def frame_collision_probability(
    q: np.ndarray, mixture, chain: KinematicChain, paper_literal_bound: bool = False
) -> float:
    """Max over robot/human sphere pairs of the class-weighted collision bound."""
    return _frame_dynamic(q, mixture, chain, paper_literal_bound)[0]


def _static_penetration(q, chain, static_spheres) -> float:
    if not static_spheres:
        return 0.0
    centers, radii = robot_sphere_arrays(chain, q)
    total = 0.0
    for s in static_spheres:
        d = np.linalg.norm(centers - s.center, axis=1)
        pen = np.maximum(radii + s.radius - d, 0.0)
        total += float((pen**2).sum())
    return total


def _window_dynamics(traj, context):
    """Per-window-frame (probability, raw, penetration) arrays."""
    lo, hi = context.window(traj.last_index)
    vals = [
        _frame_dynamic(traj.waypoints[i], context.scene(traj.times[i]),
                       context.chain, context.paper_literal_bound)
        if context.scene is not None else (0.0, 0.0, 0.0)
        for i in range(lo, hi + 1)
    ]
    arr = np.array(vals).reshape(-1, 3)
    return arr[:, 0], arr[:, 1], arr[:, 2]


def _hinge(raws, pens, tau):
    return float((np.maximum(raws - tau, 0.0) ** 2).sum() + pens.sum())


def trajectory_cost(traj: TrajectoryMatrix, context: PlanContext) -> CostBreakdown:
    """Smoothness, static penetration, and windowed dynamic collision terms."""
    probs, raws, pens = _window_dynamics(traj, context)
    return _assemble_cost(traj, context, probs, raws, pens)


def _assemble_cost(traj, context, probs, raws, pens) -> CostBreakdown:
    lo, hi = context.window(traj.last_index)
    smooth = smoothness(traj.waypoints, traj.times)
    static = sum(
        _static_penetration(traj.waypoints[i], context.chain, context.static_spheres)
        for i in range(traj.last_index + 1)
    )
    tau = context.hinge_margin * context.threshold
    penalty = _hinge(raws, pens, tau)
    w = context.weights
    total = w.smoothness * smooth + w.static * static + w.dynamic * penalty
    return CostBreakdown(
        smoothness=smooth,
        static_obstacle=static,
        dynamic=float(probs.sum()),
        dynamic_penalty=penalty,
        frame_probabilities=probs,
        window=(lo, hi),
        total=total,
    )


@dataclass(frozen=True)
class OptimizeResult:
    trajectory: TrajectoryMatrix
    cost: CostBreakdown
    iterations: int
    status: str          # converged | stalled | budget_exhausted
    feasible: bool


def _smoothness_quadratic(times: np.ndarray) -> np.ndarray:
    """Matrix H with smoothness = 0.5 sum_j W_j^T H W_j, so grad = H @ W."""
    t = np.asarray(times, dtype=float)
    n = t.shape[0]
    d2 = np.zeros((n, n))
    for i in range(1, n - 1):
        dt0, dt1 = t[i] - t[i - 1], t[i + 1] - t[i]
        c = 2.0 / (dt0 + dt1)
        d2[i, i - 1] = c / dt0
        d2[i, i] = -c / dt0 - c / dt1
        d2[i, i + 1] = c / dt1
    d2[0], d2[-1] = d2[1], d2[-2]
    wt = np.zeros(n)
    wt[:-1] += 0.5 * np.diff(t)
    wt[1:] += 0.5 * np.diff(t)
    return 2.0 * d2.T @ np.diag(wt / (t[-1] - t[0])) @ d2


def _feasible(probs: np.ndarray, delta_cl: float, window_lo: int = 0,
              gate_from: int = 0) -> bool:
    """Confidence gate over window frames the plan can still influence.

    Frames before gate_from are already committed: the robot occupies them
    whether it proceeds or holds, so they cannot veto a plan.
    """
    return all(
        check_confidence(float(p), delta_cl)
        for i, p in enumerate(probs)
        if window_lo + i >= gate_from
    )


def optimize_trajectory(
    initial: TrajectoryMatrix,
    context: PlanContext,
    budget: int,
    free_from: int = 1,
    fd_step: float = 1e-5,
    grad_tol: float = 1e-7,
    rel_tol: float = 1e-6,
) -> OptimizeResult:
    """Refine free interior waypoints by preconditioned numerical-gradient descent.

    Central differences (fd_step radians) give the gradient; the descent
    direction is preconditioned by the smoothness Hessian and steps are
    accepted through backtracking line search, so cost never increases.
    Endpoints stay fixed and joint limits are enforced by projection.
    """
    if budget <= 0:
        raise ValueError("budget must be > 0")
    traj = initial
    n = traj.last_index
    lo, hi = context.window(n)
    free = np.arange(max(1, free_from), n)
    if free.size == 0:
        cost = trajectory_cost(traj, context)
        return OptimizeResult(
            traj, cost, 0, "converged",
            _feasible(cost.frame_probabilities, context.delta_cl, lo, free_from),
        )

    chain, weights = context.chain, context.weights
    tau = context.hinge_margin * context.threshold
    lower, upper = chain.lower_limits(), chain.upper_limits()

    prepared = {}
    if context.scene is not None:
        for i in range(lo, hi + 1):
            prepared[i] = prepare_mixture(context.scene(traj.times[i]))

    def frame_vals(i, q):
        if not (lo <= i <= hi) or not prepared.get(i):
            return 0.0, 0.0, 0.0
        return _frame_dynamic_prepared(q, prepared[i], chain, context.paper_literal_bound)

    frozen_vals = {
        i: None for i in range(lo, hi + 1) if i < max(1, free_from)
    }

    def window_vals(way):
        out = []
        for i in range(lo, hi + 1):
            if i in frozen_vals:
                if frozen_vals[i] is None:
                    frozen_vals[i] = frame_vals(i, way[i])
                out.append(frozen_vals[i])
            else:
                out.append(frame_vals(i, way[i]))
        vals = np.array(out).reshape(-1, 3)
        return vals[:, 0], vals[:, 1], vals[:, 2]

    def objective(way, raws, pens):
        smooth = smoothness(way, traj.times)
        static = sum(_static_penetration(way[i], chain, context.static_spheres)
                     for i in range(n + 1))
        return (weights.smoothness * smooth + weights.static * static
                + weights.dynamic * _hinge(raws, pens, tau))

    # the smoothness term is an exact quadratic, so its central difference
    # equals H @ W to machine precision; only the collision terms need
    # perturbed evaluations
    h_full = _smoothness_quadratic(traj.times)
    h_block = h_full[np.ix_(free, free)]
    h_block = h_block + 1e-9 * np.trace(h_block) / free.size * np.eye(free.size)
    hess = cho_factor(h_block * weights.smoothness)
    has_static = bool(context.static_spheres)

    way = traj.waypoints.copy()
    probs, raws, pens = window_vals(way)
    cur = objective(way, raws, pens)
    status = "budget_exhausted"
    iters = 0
    for iters in range(1, budget + 1):
        grad = weights.smoothness * (h_full @ way)[free]
        for fi, i in enumerate(free):
            windowed = lo <= i <= hi and prepared.get(i)
            if not windowed and not has_static:
                continue
            if windowed:
                k = i - lo
                base_dyn = float(np.maximum(raws[k] - tau, 0.0) ** 2) + pens[k]
            else:
                base_dyn = 0.0
            base_static = _static_penetration(way[i], chain, context.static_spheres)
            for j in range(traj.dof):
                deltas = []
                for sgn in (1.0, -1.0):
                    q2 = way[i].copy()
                    q2[j] += sgn * fd_step
                    st = _static_penetration(q2, chain, context.static_spheres)
                    dyn = base_dyn
                    if windowed:
                        _, raw, pen = frame_vals(i, q2)
                        dyn = float(np.maximum(raw - tau, 0.0) ** 2) + pen
                    deltas.append(
                        weights.static * (st - base_static)
                        + weights.dynamic * (dyn - base_dyn)
                    )
                grad[fi, j] += (deltas[0] - deltas[1]) / (2.0 * fd_step)
        if np.abs(grad).max() < grad_tol:
            status = "converged"
            break

        direction = cho_solve(hess, grad)
        slope = float((grad * direction).sum())
        step = 1.0
        accepted = False
        prev = cur
        while step > 1e-12:
            w2 = way.copy()
            w2[free] = np.clip(way[free] - step * direction, lower, upper)
            p2, r2, pen2 = window_vals(w2)
            val = objective(w2, r2, pen2)
            if val <= cur - 1e-4 * step * slope or val < cur - 1e-15:
                way, probs, raws, pens, cur = w2, p2, r2, pen2, val
                accepted = True
                break
            step *= 0.5
        if not accepted:
            status = "stalled"
            break
        # polish-stop only once confident; keep pushing while any frame violates
        if prev - cur < rel_tol * (1.0 + abs(prev)) and _feasible(
                probs, context.delta_cl, lo, free_from):
            status = "converged"
            break

    out = traj.with_waypoints(way)
    cost = _assemble_cost(out, context, probs, raws, pens)
    return OptimizeResult(
        out, cost, iters, status,
        _feasible(cost.frame_probabilities, context.delta_cl, lo, free_from),
    )


@dataclass(frozen=True)
class StartOutcome:
    start_index: int
    total: float
    feasible: bool
    status: str


@dataclass(frozen=True)
class MultiStartResult:
    best: OptimizeResult | None
    feasible: bool
    outcomes: tuple


def _perturbed_start(
    initial: TrajectoryMatrix, chain, rng, scale: float, free_from: int = 1
) -> TrajectoryMatrix:
    n = initial.last_index
    span = n - free_from + 1
    bump = np.zeros(n + 1)
    i = np.arange(free_from, n)
    bump[i] = np.sin(np.pi * (i - free_from + 1) / span)
    delta = rng.normal(0.0, scale, initial.dof)
    way = initial.waypoints + bump[:, None] * delta[None, :]
    way = np.clip(way, chain.lower_limits(), chain.upper_limits())
    return initial.with_waypoints(way)


def multi_start_plan(
    initial: TrajectoryMatrix,
    context: PlanContext,
    n_starts: int,
    seed: int,
    budget: int = 40,
    free_from: int = 1,
    perturb_scale: float = 0.3,
) -> MultiStartResult:
    """Optimize from the unperturbed start plus seeded perturbations; keep the best feasible.

    Start k's perturbation depends only on (seed, k), so start sets are nested
    across n_starts. All starts infeasible yields feasible=False (callers
    insert a wait).
    """
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    outcomes = []
    best = None
    for k in range(n_starts):
        if k == 0:
            start = initial
        else:
            rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(k,)))
            start = _perturbed_start(initial, context.chain, rng, perturb_scale, free_from)
        res = optimize_trajectory(start, context, budget, free_from=free_from)
        outcomes.append(StartOutcome(k, res.cost.total, res.feasible, res.status))
        # near-ties keep the earliest start so solutions stay reproducible
        # across small config changes
        if res.feasible and (
            best is None or res.cost.total < best.cost.total * (1.0 - 1e-6)
        ):
            best = res
    if best is None:
        return MultiStartResult(best=None, feasible=False, outcomes=tuple(outcomes))
    return MultiStartResult(best=best, feasible=True, outcomes=tuple(outcomes))


def insert_wait(traj: TrajectoryMatrix, s: int, hold: float) -> TrajectoryMatrix:
    """Duplicate waypoint s as a hold of `hold` seconds, shifting later times."""
    if not (0 <= s <= traj.last_index):
        raise ValueError("wait index out of range")
    if hold <= 0:
        raise ValueError("hold must be positive")
    times = np.concatenate([
        traj.times[: s + 1],
        [traj.times[s] + hold],
        traj.times[s + 1 :] + hold,
    ])
    way = np.vstack([
        traj.waypoints[: s + 1],
        traj.waypoints[s : s + 1],
        traj.waypoints[s + 1 :],
    ])
    return TrajectoryMatrix(times, way)


@dataclass
class StepRecord:
    """What one replanning cycle executed and what it planned for the next one."""

    cycle: int
    executed_indices: tuple
    executed_times: np.ndarray
    executed_waypoints: np.ndarray
    planned_window: tuple | None
    waited: bool
    delay_total: float
    feasible: bool
    start_outcomes: tuple
    done: bool
    planned_bounds: np.ndarray = field(default_factory=lambda: np.zeros(0))


class RecedingHorizonPlanner:
    """Interleaves executing the previously committed segment with planning the next.

    The segment executing during one cycle was optimized in the previous one;
    each cycle optimizes the following segment against the freshest scene and
    falls back to a hold waypoint (a wait) when no confident plan exists.
    """

    def __init__(
        self,
        chain: KinematicChain,
        q_start,
        q_goal,
        static_spheres=None,
        delta_cl: float = 0.95,
        weights: CostWeights = CostWeights(),
        n_waypoints: int = 20,
        replan_s: float = 0.5,
        waypoints_per_step: int = 2,
        n_starts: int = 2,
        budget: int = 40,
        seed: int = 0,
        t0: float = 0.0,
        hinge_margin: float = 0.8,
        paper_literal_bound: bool = False,
        max_waits: int = 200,
    ):
        if n_waypoints < 2 * waypoints_per_step + 1:
            raise ValueError("horizon too short for the replanning window")
        self.chain = chain
        self.static_spheres = list(static_spheres or [])
        self.delta_cl = delta_cl
        self.weights = weights
        self.m = waypoints_per_step
        self.replan_s = replan_s
        self.n_starts = n_starts
        self.budget = budget
        self.seed = seed
        self.hinge_margin = hinge_margin
        self.paper_literal_bound = paper_literal_bound
        self.max_waits = max_waits
        dt = replan_s / waypoints_per_step
        times = t0 + dt * np.arange(n_waypoints + 1)
        self.traj = straight_line_trajectory(
            chain.clip(np.asarray(q_start, dtype=float)),
            chain.clip(np.asarray(q_goal, dtype=float)), times,
        )
        self.pos = 0
        self.cycle = 0
        self.delay = 0.0
        self.waits = 0
        self.executed_t: list = []
        self.executed_q: list = []
        self.audit_bounds: dict = {}
        self.done = False
        self._next_seg: tuple | None = None  # committed segment, executes next cycle

    def _context(self, scene, window) -> PlanContext:
        return PlanContext(
            chain=self.chain,
            static_spheres=self.static_spheres,
            scene=scene,
            delta_cl=self.delta_cl,
            weights=self.weights,
            replan_m=self.m,
            exec_index=max(window[0] - self.m, 0),
            window_override=window,
            hinge_margin=self.hinge_margin,
            paper_literal_bound=self.paper_literal_bound,
        )

    def _cycle_seed(self) -> int:
        return int(np.random.default_rng(
            np.random.SeedSequence(entropy=self.seed, spawn_key=(self.cycle,))
        ).integers(2**31))

    def _record_audit(self, cost: CostBreakdown):
        lo, hi = cost.window
        for k, i in enumerate(range(lo, hi + 1)):
            self.audit_bounds[i] = float(cost.frame_probabilities[k])

    def _insert_hold(self, at: int, scene=None):
        """Hold for one replanning step at the last collision-free pose.

        The junction pose itself is preferred; when the fresh scene already
        covers it the hold retreats to the most recent executed pose that
        still clears the confidence threshold.
        """
        hold_q = None
        if scene is not None:
            t_hold = self.traj.times[at] + self.replan_s
            pm = prepare_mixture(scene(t_hold))

            def safe(q):
                prob = _frame_dynamic_prepared(np.asarray(q, dtype=float), pm,
                                               self.chain, self.paper_literal_bound)[0]
                return check_confidence(prob, self.delta_cl)

            if not safe(self.traj.waypoints[at]):
                for q in reversed(self.executed_q):
                    if safe(q):
                        hold_q = np.asarray(q, dtype=float)
                        break
        if hold_q is None:
            self.traj = insert_wait(self.traj, at, self.replan_s)
        else:
            times = np.concatenate([
                self.traj.times[: at + 1],
                [self.traj.times[at] + self.replan_s],
                self.traj.times[at + 1 :] + self.replan_s,
            ])
            way = np.vstack([
                self.traj.waypoints[: at + 1],
                hold_q[None, :],
                self.traj.waypoints[at + 1 :],
            ])
            self.traj = TrajectoryMatrix(times, way)
        self.audit_bounds = {
            (i if i <= at else i + 1): v for i, v in self.audit_bounds.items()
        }
        self.delay += self.replan_s
        self.waits += 1
        if self.waits > self.max_waits:
            raise RuntimeError("wait budget exhausted; scene never cleared")

    def _bootstrap(self, scene) -> tuple:
        """Plan the whole horizon before anything executes; commit the first segment."""
        n = self.traj.last_index
        window = (0, min(2 * self.m, n))
        context = self._context(scene, window)
        ms = multi_start_plan(self.traj, context, self.n_starts, self._cycle_seed(),
                              budget=self.budget, free_from=1)
        if ms.feasible:
            self.traj = ms.best.trajectory
            self._record_audit(ms.best.cost)
            return (0, min(self.m, n)), True, ms.outcomes
        self._insert_hold(0, scene)
        return (0, 1), False, ms.outcomes

    def step(self, scene) -> StepRecord:
        """Advance one replanning period against the scene supplier scene(t)."""
        if self.done:
            raise RuntimeError("plan already finished")
        outcomes: tuple = ()
        feasible = True
        waited = False
        if self._next_seg is None:
            self._next_seg, feasible, outcomes = self._bootstrap(scene)
            waited = not feasible
        seg_lo, seg_hi = self._next_seg

        # plan the segment that follows the one now executing; the incumbent
        # trajectory is tried alone first so the plan does not hop between
        # detour homotopies cycle to cycle
        planned_window = None
        if seg_hi < self.traj.last_index:
            window = (seg_hi, min(seg_hi + self.m, self.traj.last_index))
            planned_window = window
            context = self._context(scene, window)
            res = optimize_trajectory(self.traj, context, self.budget,
                                      free_from=seg_hi + 1)
            if res.feasible:
                outcomes = outcomes + (StartOutcome(0, res.cost.total, True, res.status),)
                self.traj = res.trajectory
                self._record_audit(res.cost)
                self._next_seg = (seg_hi, window[1])
            else:
                ms = multi_start_plan(self.traj, context, self.n_starts,
                                      self._cycle_seed(), budget=self.budget,
                                      free_from=seg_hi + 1)
                outcomes = outcomes + ms.outcomes
                if ms.feasible:
                    self.traj = ms.best.trajectory
                    self._record_audit(ms.best.cost)
                    self._next_seg = (seg_hi, window[1])
                else:
                    feasible = False
                    waited = True
                    self._insert_hold(seg_hi, scene)
                    self._next_seg = (seg_hi, seg_hi + 1)
        else:
            self._next_seg = None

        # execute the committed segment
        t = self.traj.times[seg_lo : seg_hi + 1].copy()
        q = self.traj.waypoints[seg_lo : seg_hi + 1].copy()
        skip = 1 if self.executed_t else 0  # shared junction waypoint
        self.executed_t.extend(t[skip:].tolist())
        self.executed_q.extend(q[skip:].tolist())
        self.pos = seg_hi
        self.cycle += 1
        if self._next_seg is None and self.pos >= self.traj.last_index:
            self.done = True
        bounds = np.array([self.audit_bounds.get(i, 0.0) for i in range(seg_lo, seg_hi + 1)])
        return StepRecord(
            cycle=self.cycle - 1,
            executed_indices=tuple(range(seg_lo, seg_hi + 1)),
            executed_times=t,
            executed_waypoints=q,
            planned_window=planned_window,
            waited=waited,
            delay_total=self.delay,
            feasible=feasible,
            start_outcomes=tuple(outcomes),
            done=self.done,
            planned_bounds=bounds,
        )

    def executed_trajectory(self) -> TrajectoryMatrix:
        if len(self.executed_t) < 2:
            raise RuntimeError("nothing executed yet")
        return TrajectoryMatrix(np.array(self.executed_t), np.array(self.executed_q))
