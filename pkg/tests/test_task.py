import numpy as np
import pytest

from intentplan.task import (
    HistogramTable,
    ProgressState,
    QTable,
    RewardSpec,
    available_actions,
    best_action,
    build_histograms,
    epsilon_greedy_action,
    next_action_dist,
    parse_order_spec,
    q_learn,
    q_update,
    reward_prep,
    sample_order,
    total_reward,
    valid_orders,
)


class TestOrderSpec:
    def test_parse_groups(self):
        assert parse_order_spec("(0,1)->(2,3)") == ((0, 1), (2, 3))
        assert parse_order_spec("0->(1,2)->3") == ((0,), (1, 2), (3,))

    def test_valid_orders(self):
        orders = valid_orders(parse_order_spec("(0,1)->(2,3)"))
        assert len(orders) == 4
        assert (0, 1, 2, 3) in orders and (1, 0, 3, 2) in orders

    def test_available_actions(self):
        groups = parse_order_spec("(0,1)->(2,3)")
        assert available_actions(groups, set()) == (0, 1)
        assert available_actions(groups, {0}) == (1,)
        assert available_actions(groups, {0, 1}) == (2, 3)
        assert available_actions(groups, {0, 1, 2, 3}) == ()

    def test_sample_order_is_valid(self):
        groups = parse_order_spec("(0,1)->(2,3)")
        rng = np.random.default_rng(0)
        for _ in range(20):
            assert sample_order(groups, rng) in valid_orders(groups)


class TestHistograms:
    def test_single_demo_chain(self):
        seq = [0] * 4 + [1] * 3 + [2] * 5
        table = build_histograms([seq], num_actions=3)
        counts = table.counts((0, 0, 0), 0)
        assert counts is not None
        np.testing.assert_array_equal(counts, [0, 4, 0])

    def test_symmetric_branches(self):
        a = [0] * 5 + [1] * 5
        b = [0] * 5 + [2] * 5
        table = build_histograms([a, b], num_actions=3)
        counts = table.counts((0, 0, 0), 0)
        np.testing.assert_array_equal(counts, [0, 5, 5])

    def test_last_segment_contributes_nothing(self):
        table = build_histograms([[0, 0, 0]], num_actions=2)
        assert len(list(table.keys())) == 0

    def test_all_stored_keys_normalize(self):
        rng = np.random.default_rng(1)
        seqs = [np.repeat(rng.permutation(4), rng.integers(2, 6)) for _ in range(12)]
        table = build_histograms(seqs, num_actions=4)
        for progress, current in table.keys():
            probs, flagged = next_action_dist(table, progress, current)
            assert not flagged
            assert abs(probs.sum() - 1.0) < 1e-12

    def test_progress_state_count_bound(self):
        rng = np.random.default_rng(2)
        n_demos, m = 20, 5
        seqs = [np.repeat(rng.permutation(m), 3) for _ in range(n_demos)]
        table = build_histograms(seqs, num_actions=m)
        states = {p for p, _ in table.keys()}
        assert len(states) <= n_demos * (m + 1)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            build_histograms([], num_actions=2)


class TestNextActionDist:
    def test_normalization_example(self):
        # counts {1: 3, 2: 1} at the same key normalize to (0.75, 0.25)
        table = build_histograms([[0, 0, 0, 1], [0, 2]], num_actions=3)
        probs, _ = next_action_dist(table, (0, 0, 0), 0)
        np.testing.assert_allclose(probs, [0, 0.75, 0.25])

    def test_single_support(self):
        table = build_histograms([[0] * 5 + [1]], num_actions=2)
        probs, _ = next_action_dist(table, (0, 0), 0)
        np.testing.assert_allclose(probs, [0, 1.0])

    def test_unseen_key_uniform_over_incomplete(self):
        table = build_histograms([[0, 1]], num_actions=3)
        probs, flagged = next_action_dist(table, (1, 0, 0), 2)
        assert flagged
        np.testing.assert_allclose(probs, [0, 0.5, 0.5])


class TestRewards:
    def _spec(self, h):
        return RewardSpec(helpfulness=np.asarray(h, dtype=float))

    def test_point_mass(self):
        table = build_histograms([[0] * 3 + [1] * 2], num_actions=2)
        spec = self._spec([[0.0, 0.0], [2.0, 0.0]])
        assert reward_prep(((0, 0), 0), 0, spec, table) == 2.0

    def test_expectation(self):
        # next-action distribution (0, 0.75, 0.25) against H column (0, 4, 0)
        table = build_histograms([[0, 0, 0, 1], [0, 2]], num_actions=3)
        spec = self._spec([[0.0], [4.0], [0.0]])
        assert abs(reward_prep(((0, 0, 0), 0), 0, spec, table) - 3.0) < 1e-12

    def test_zero_column(self):
        table = build_histograms([[0, 1]], num_actions=2)
        spec = self._spec([[0.0, 1.0], [0.0, 1.0]])
        assert reward_prep(((0, 0), 0), 0, spec, table) == 0.0

    def test_total_reward(self):
        spec = RewardSpec(helpfulness=np.zeros((1, 1)), w_prep=1.0, w_delay=1.0)
        assert total_reward(5.0, 0.0, spec) == 5.0
        assert total_reward(0.0, 2.0, spec) == -2.0
        spec2 = RewardSpec(helpfulness=np.zeros((1, 1)), w_prep=1.0, w_delay=2.0)
        assert total_reward(0.0, 2.0, spec2) == -4.0

    def test_negative_delay_rejected(self):
        spec = RewardSpec(helpfulness=np.zeros((1, 1)))
        with pytest.raises(ValueError):
            total_reward(0.0, -1.0, spec)


class TestQTable:
    def test_single_update(self):
        q = QTable(num_actions=2, alpha=0.1, gamma=0.9)
        q_update(q, "s0", 0, 1.0, "s1")
        assert abs(q.get("s0", 0) - 0.1) < 1e-12
        assert q.get("s0", 1) == 0.0

    def test_decay_without_reward(self):
        q = QTable(num_actions=1, alpha=0.25, gamma=0.9)
        q.values[("s", 0)] = 2.0
        q_update(q, "s", 0, 0.0, "terminal")
        assert abs(q.get("s", 0) - 1.5) < 1e-12

    def test_best_action_and_ties(self):
        q = QTable(num_actions=3)
        q.values[("s", 0)] = 1.0
        q.values[("s", 1)] = 0.5
        assert best_action(q, "s", [0, 1, 2]) == 0
        q2 = QTable(num_actions=3)
        assert best_action(q2, "s", [2, 1]) == 1  # tie -> lowest index

    def test_argmax_offset_invariance(self):
        q = QTable(num_actions=3)
        rng = np.random.default_rng(0)
        for a in range(3):
            q.values[("s", a)] = rng.normal()
        pick = best_action(q, "s", [0, 1, 2])
        for a in range(3):
            q.values[("s", a)] += 11.5
        assert best_action(q, "s", [0, 1, 2]) == pick

    def test_empty_available_rejected(self):
        with pytest.raises(ValueError):
            best_action(QTable(num_actions=2), "s", [])

    def test_invalid_rates_rejected(self):
        with pytest.raises(ValueError):
            QTable(num_actions=1, alpha=0.0)
        with pytest.raises(ValueError):
            QTable(num_actions=1, gamma=1.0)


class ChainMdp:
    """Deterministic 3-state chain: move right (0) or stay (1)."""

    def __init__(self):
        self.state = 0

    def reset(self):
        self.state = 0
        return self.state, (0, 1)

    def step(self, action):
        reward = 0.0
        if action == 0:
            self.state += 1
            if self.state == 3:
                reward = 1.0
        done = self.state >= 3
        return self.state, reward, done, (0, 1)


def value_iteration_chain(gamma):
    # states 0..2 transition right with reward 1 on entering 3; stay = nothing
    v = np.zeros(4)
    q = {}
    for _ in range(500):
        for s in (2, 1, 0):
            q[(s, 0)] = (1.0 if s == 2 else 0.0) + gamma * v[s + 1]
            q[(s, 1)] = 0.0 + gamma * v[s]
            v[s] = max(q[(s, 0)], q[(s, 1)])
    return q


class TestQLearning:
    def test_converges_to_value_iteration(self):
        q = q_learn(ChainMdp(), episodes=600, num_actions=2, seed=0,
                    eps_start=1.0, eps_end=1.0)
        oracle = value_iteration_chain(0.9)
        for s in range(3):
            for a in range(2):
                assert abs(q.get(s, a) - oracle[(s, a)]) < 1e-3
            assert best_action(q, s, (0, 1)) == 0

    def test_epsilon_greedy_explores(self):
        q = QTable(num_actions=2)
        q.values[("s", 0)] = 1.0
        rng = np.random.default_rng(0)
        picks = {epsilon_greedy_action(q, "s", (0, 1), 1.0, rng) for _ in range(50)}
        assert picks == {0, 1}
        assert epsilon_greedy_action(q, "s", (0, 1), 0.0, rng) == 0


class TestProgressState:
    def test_parts_and_updates(self):
        p = ProgressState.initial(2, 2)
        assert p.human == (0, 0) and p.robot == (0, 0)
        p2 = p.complete_human(1).complete_robot(0)
        assert p2.human == (0, 1) and p2.robot == (1, 0)
        assert p.hamming(p2) == 2

    def test_invalid_rejected(self):
        with pytest.raises(ValueError):
            ProgressState((-1, 0), 1)
