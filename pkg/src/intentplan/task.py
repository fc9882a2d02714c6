"""Task progress bookkeeping, next-action histograms, and the Q-learning task planner."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field

import numpy as np

from .motion import progress_from_prefix


@dataclass(frozen=True)
class ProgressState:
    """Completion counters over the human and robot action sets."""

    counts: tuple
    n_human: int

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if any(c < 0 for c in counts):
            raise ValueError("counters must be >= 0")
        if not (0 <= self.n_human <= len(counts)):
            raise ValueError("n_human out of range")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def initial(cls, n_human: int, n_robot: int) -> "ProgressState":
        return cls((0,) * (n_human + n_robot), n_human)

    @property
    def human(self) -> tuple:
        return self.counts[: self.n_human]

    @property
    def robot(self) -> tuple:
        return self.counts[self.n_human :]

    def complete_human(self, action: int) -> "ProgressState":
        c = list(self.counts)
        c[action] += 1
        return ProgressState(tuple(c), self.n_human)

    def complete_robot(self, action: int) -> "ProgressState":
        c = list(self.counts)
        c[self.n_human + action] += 1
        return ProgressState(tuple(c), self.n_human)

    def hamming(self, other: "ProgressState") -> int:
        return sum(1 for a, b in zip(self.counts, other.counts) if a != b)


# ---------------------------------------------------------------------------
# Task definition and ordering constraints
# ---------------------------------------------------------------------------

def parse_order_spec(spec: str) -> tuple:
    """Parse ordering constraints like "(0,1)->(2,3)" or "0->(1,2)->3".

    Returns a tuple of groups; actions inside a group are unordered, groups
    must complete left to right.
    """
    groups = []
    for part in spec.split("->"):
        part = part.strip()
        if not part:
            raise ValueError(f"empty group in order spec {spec!r}")
        if part.lower() == "random":
            continue
        nums = re.findall(r"\d+", part)
        if not nums:
            raise ValueError(f"no action indices in group {part!r}")
        groups.append(tuple(int(x) for x in nums))
    return tuple(groups)


def order_groups_actions(groups) -> tuple:
    return tuple(sorted(a for g in groups for a in g))


def valid_orders(groups) -> list:
    """All action orders satisfying the group precedence constraints."""
    pools = [list(itertools.permutations(g)) for g in groups]
    out = []
    for combo in itertools.product(*pools):
        order = tuple(itertools.chain.from_iterable(combo))
        out.append(order)
    return out


def available_actions(groups, done: set) -> tuple:
    """Actions allowed next given the completed set."""
    for g in groups:
        remaining = [a for a in g if a not in done]
        if remaining:
            return tuple(sorted(remaining))
    return ()


def sample_order(groups, rng) -> tuple:
    parts = []
    for g in groups:
        g = list(g)
        rng.shuffle(g)
        parts.extend(g)
    return tuple(parts)


@dataclass(frozen=True)
class RewardSpec:
    """Helpfulness matrix H (human x robot) plus the reward weights."""

    helpfulness: np.ndarray  # (m_h, m_r)
    w_prep: float = 1.0
    w_delay: float = 1.0

    def __post_init__(self):
        h = np.asarray(self.helpfulness, dtype=float)
        if h.ndim != 2:
            raise ValueError("helpfulness must be a (m_h, m_r) matrix")
        if not np.all(np.isfinite(h)):
            raise ValueError("helpfulness values must be finite")
        h.setflags(write=False)
        object.__setattr__(self, "helpfulness", h)


@dataclass(frozen=True)
class TaskSpec:
    """Scenario task definition: action vocabularies, ordering, and rewards."""

    human_actions: tuple
    robot_actions: tuple
    order: str
    reward: RewardSpec
    nominal_durations: tuple = ()  # human-alone seconds per human action

    def __post_init__(self):
        if self.reward.helpfulness.shape != (len(self.human_actions), len(self.robot_actions)):
            raise ValueError("helpfulness shape must match the action sets")

    @property
    def groups(self) -> tuple:
        return parse_order_spec(self.order)

    def initial_state(self) -> ProgressState:
        return ProgressState.initial(len(self.human_actions), len(self.robot_actions))


# ---------------------------------------------------------------------------
# Next-action histograms
# ---------------------------------------------------------------------------

class HistogramTable:
    """Counts of the next human action per (progress, current action) key."""

    def __init__(self, num_actions: int, counting: bool = False):
        self.num_actions = num_actions
        self.counting = counting
        self._counts: dict = {}

    def keys(self):
        return self._counts.keys()

    def counts(self, progress: tuple, current: int) -> np.ndarray | None:
        return self._counts.get((tuple(progress), current))

    def _add(self, progress: tuple, current: int, nxt: int):
        key = (tuple(progress), current)
        if key not in self._counts:
            self._counts[key] = np.zeros(self.num_actions)
        self._counts[key][nxt] += 1


def build_histograms(action_sequences, num_actions: int, counting: bool = False) -> HistogramTable:
    """Tally, for every frame, the next differing action after it.

    Keys are (progress-from-prefix, current action); the last segment of each
    sequence has no successor and contributes nothing.
    """
    seqs = [np.asarray(s, dtype=int) for s in action_sequences]
    if not seqs or any(len(s) == 0 for s in seqs):
        raise ValueError("action sequences must be non-empty")
    table = HistogramTable(num_actions, counting)
    for seq in seqs:
        changes = np.nonzero(np.diff(seq))[0]  # indices i where seq[i+1] != seq[i]
        for s in range(len(seq)):
            nxt_positions = changes[changes >= s]
            if nxt_positions.size == 0:
                continue
            nxt = int(seq[nxt_positions[0] + 1])
            progress = progress_from_prefix(seq[: s + 1], num_actions, counting)
            table._add(progress, int(seq[s]), nxt)
    return table


def next_action_dist(table: HistogramTable, progress: tuple, current: int):
    """Normalized next-action distribution; uniform fallback for unseen keys.

    Returns (probabilities over the human action set, flagged) where flagged
    marks the fallback path. The fallback is uniform over actions not yet
    completed in `progress` (uniform over all if everything is complete).
    """
    counts = table.counts(progress, current)
    if counts is not None and counts.sum() > 0:
        return counts / counts.sum(), False
    progress = tuple(progress)
    remaining = [a for a in range(table.num_actions) if a >= len(progress) or progress[a] == 0]
    probs = np.zeros(table.num_actions)
    if remaining:
        probs[remaining] = 1.0 / len(remaining)
    else:
        probs[:] = 1.0 / table.num_actions
    return probs, True


def reward_prep(p, robot_action: int, spec: RewardSpec, table: HistogramTable) -> float:
    """Expected helpfulness of a robot action under the next-action distribution.

    `p` is a ProgressState, a progress tuple, or a (progress, current action)
    pair. Without a current action the stored counts for that progress are
    pooled across current-action keys.
    """
    h = spec.helpfulness
    if not (0 <= robot_action < h.shape[1]):
        raise ValueError("robot action index out of range")
    if isinstance(p, ProgressState):
        progress, current = p.human, None
    elif len(p) == 2 and isinstance(p[0], tuple) and isinstance(p[1], int):
        progress, current = tuple(p[0]), p[1]
    else:
        progress, current = tuple(p), None
    if current is not None:
        probs, _ = next_action_dist(table, progress, current)
    else:
        pooled = np.zeros(table.num_actions)
        for (key_p, _key_c), counts in table._counts.items():
            if key_p == progress:
                pooled += counts
        if pooled.sum() > 0:
            probs = pooled / pooled.sum()
        else:
            probs, _ = next_action_dist(table, progress, -1)
    return float(probs @ h[:, robot_action])


def total_reward(prep: float, delay: float, spec: RewardSpec) -> float:
    """w_prep * R_prep + w_delay * (-delay)."""
    if delay < 0:
        raise ValueError("delay must be >= 0")
    return spec.w_prep * prep + spec.w_delay * (-delay)


# ---------------------------------------------------------------------------
# Q table
# ---------------------------------------------------------------------------

@dataclass
class QTable:
    """Tabular action values with the one-step TD update."""

    num_actions: int
    alpha: float = 0.1
    gamma: float = 0.9
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0 < self.alpha <= 1):
            raise ValueError("alpha must be in (0, 1]")
        if not (0 <= self.gamma < 1):
            raise ValueError("gamma must be in [0, 1)")

    def get(self, state, action: int) -> float:
        return self.values.get((state, action), 0.0)

    def max_value(self, state) -> float:
        return max((self.get(state, a) for a in range(self.num_actions)), default=0.0)


def q_update(qtable: QTable, state, action: int, reward: float, next_state) -> QTable:
    """Q <- (1 - alpha) Q + alpha (reward + gamma max_a Q(next, a)); other entries untouched."""
    old = qtable.get(state, action)
    target = reward + qtable.gamma * qtable.max_value(next_state)
    qtable.values[(state, action)] = (1.0 - qtable.alpha) * old + qtable.alpha * target
    return qtable


def best_action(qtable: QTable, state, available) -> int:
    """Argmax of Q(state, .) over the available actions, lowest index on ties."""
    available = sorted(available)
    if not available:
        raise ValueError("no available actions")
    best, best_v = available[0], qtable.get(state, available[0])
    for a in available[1:]:
        v = qtable.get(state, a)
        if v > best_v:
            best, best_v = a, v
    return best


def epsilon_greedy_action(qtable: QTable, state, available, epsilon: float, rng) -> int:
    available = sorted(available)
    if not available:
        raise ValueError("no available actions")
    if rng.random() < epsilon:
        return int(available[rng.integers(len(available))])
    return best_action(qtable, state, available)


def q_learn(
    env,
    episodes: int,
    num_actions: int,
    seed,
    alpha: float = 0.1,
    gamma: float = 0.9,
    eps_start: float = 0.3,
    eps_end: float = 0.01,
    max_steps: int = 200,
) -> QTable:
    """Train a QTable on an environment exposing reset() and step(action).

    reset() returns (state, available); step(a) returns
    (next_state, reward, done, available). Epsilon decays linearly across
    episodes; exploration happens only here, never at execution time.
    """
    rng = np.random.default_rng(seed)
    q = QTable(num_actions=num_actions, alpha=alpha, gamma=gamma)
    for ep in range(episodes):
        frac = ep / max(episodes - 1, 1)
        eps = eps_start + (eps_end - eps_start) * frac
        state, available = env.reset()
        for _ in range(max_steps):
            action = epsilon_greedy_action(q, state, available, eps, rng)
            next_state, reward, done, available = env.step(action)
            q_update(q, state, action, reward, next_state)
            state = next_state
            if done:
                break
    return q
