"""Environment semantics: rewards, masks, annotations, termination."""

import math

import numpy as np
import pytest

from hqrl.envs import (
    UCP_EPISODE_LENGTH,
    ContractViolation,
    KnapsackEnv,
    MaxCutEnv,
    UcpEnv,
)
from hqrl.hamiltonians import KnapsackInstance, UcpInstance, WeightedGraph, cut_value

TRIANGLE = WeightedGraph.from_edges(3, [(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)])


def random_graphs(count, n, rng):
    graphs = []
    for _ in range(count):
        edges = [(i, j, float(1.0 - rng.random())) for i in range(n) for j in range(i + 1, n)]
        graphs.append(WeightedGraph.from_edges(n, edges))
    return graphs


class TestMaxCutEnv:
    def test_reset_state(self):
        env = MaxCutEnv([TRIANGLE], np.random.default_rng(0))
        obs = env.reset()
        assert env.last_cut == 0.0
        assert not env.partition.any()
        np.testing.assert_allclose(obs.annotations, [math.pi] * 3)
        assert obs.mask.all()

    def test_first_move_on_triangle_rewards_two(self):
        env = MaxCutEnv([TRIANGLE], np.random.default_rng(0))
        env.reset()
        result = env.step(1)
        assert result.reward == pytest.approx(2.0)
        assert not result.done
        assert result.observation.annotations[1] == 0.0

    def test_second_move_zero_reward_terminates(self):
        env = MaxCutEnv([TRIANGLE], np.random.default_rng(0))
        env.reset()
        env.step(0)
        result = env.step(1)
        assert result.reward == pytest.approx(0.0)
        assert result.done

    def test_masked_action_raises(self):
        env = MaxCutEnv([TRIANGLE], np.random.default_rng(0))
        env.reset()
        env.step(2)
        with pytest.raises(ContractViolation):
            env.step(2)

    def test_instance_sequence_deterministic(self):
        graphs = random_graphs(5, 4, np.random.default_rng(3))
        seq_a = []
        env = MaxCutEnv(graphs, np.random.default_rng(11))
        for _ in range(10):
            env.reset()
            seq_a.append(env.instance_index)
        env = MaxCutEnv(graphs, np.random.default_rng(11))
        seq_b = [env.reset().instance_index for _ in range(10)]
        assert seq_a == seq_b

    def test_rewards_telescope_to_final_cut(self):
        rng = np.random.default_rng(7)
        graphs = random_graphs(4, 5, rng)
        env = MaxCutEnv(graphs, np.random.default_rng(5))
        for _ in range(10):
            obs = env.reset()
            total = 0.0
            while not env.done:
                choices = np.flatnonzero(obs.mask)
                action = int(rng.choice(choices))
                result = env.step(action)
                total += result.reward
                obs = result.observation
            assert total == pytest.approx(env.episode_value())
            assert env.episode_value() == pytest.approx(cut_value(env.instance, env.partition))

    def test_annotations_track_partition(self):
        env = MaxCutEnv([TRIANGLE], np.random.default_rng(0))
        env.reset()
        env.step(0)
        for i in range(3):
            assigned = env.partition[i] == 1
            assert (env.annotations[i] == 0.0) == assigned

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            MaxCutEnv([], np.random.default_rng(0))

    def test_all_nodes_assigned_terminates(self):
        # strictly increasing cut rewards until the last node is reached
        g = WeightedGraph.from_edges(2, [(0, 1, 1.0)])
        env = MaxCutEnv([g], np.random.default_rng(0))
        obs = env.reset()
        steps = 0
        while not env.done:
            action = int(np.flatnonzero(obs.mask)[0])
            obs = env.step(action).observation
            steps += 1
        assert steps <= 2


class TestKnapsackEnv:
    INST = KnapsackInstance(values=(4.0, 2.0), weights=(3.0, 3.0), capacity=3.0)

    def test_pick_then_done_with_value_reward(self):
        env = KnapsackEnv([self.INST], np.random.default_rng(0))
        env.reset()
        result = env.step(0)
        assert result.done
        assert result.reward == pytest.approx(4.0)

    def test_capacity_zero_immediately_done(self):
        inst = KnapsackInstance(values=(1.0,), weights=(1.0,), capacity=0.0)
        env = KnapsackEnv([inst], np.random.default_rng(0))
        obs = env.reset()
        assert env.done
        assert not obs.mask.any()
        assert env.episode_value() == 0.0

    def test_intermediate_rewards_zero(self):
        inst = KnapsackInstance(values=(1.0, 1.0, 1.0), weights=(1.0, 1.0, 1.0), capacity=3.0)
        env = KnapsackEnv([inst], np.random.default_rng(0))
        env.reset()
        r1 = env.step(0)
        r2 = env.step(1)
        r3 = env.step(2)
        assert r1.reward == 0.0 and r2.reward == 0.0
        assert r3.done and r3.reward == pytest.approx(3.0)

    def test_selection_never_overweight(self):
        rng = np.random.default_rng(13)
        instances = []
        for _ in range(8):
            n = int(rng.integers(2, 7))
            instances.append(KnapsackInstance(
                values=tuple(float(v) for v in rng.integers(1, 11, n)),
                weights=tuple(float(w) for w in rng.integers(1, 11, n)),
                capacity=float(rng.integers(1, 20))))
        env = KnapsackEnv(instances, np.random.default_rng(1))
        for _ in range(30):
            obs = env.reset()
            while not env.done:
                action = int(rng.choice(np.flatnonzero(obs.mask)))
                obs = env.step(action).observation
                total_w = float(np.dot(env.selected, env.instance.weights))
                assert total_w <= env.instance.capacity + 1e-9

    def test_masked_action_raises(self):
        env = KnapsackEnv([self.INST], np.random.default_rng(0))
        env.reset()
        with pytest.raises(ContractViolation):
            env.step(5)

    def test_annotations_track_selection(self):
        inst = KnapsackInstance(values=(1.0, 1.0), weights=(1.0, 1.0), capacity=2.0)
        env = KnapsackEnv([inst], np.random.default_rng(0))
        env.reset()
        env.step(1)
        assert env.annotations[1] == 0.0 and env.annotations[0] == math.pi


class TestUcpEnv:
    INST = UcpInstance(a=(5.0, 3.0), b=(1.0, 0.5), c=(0.01, 0.02),
                       p_min=(10.0, 10.0), p_max=(20.0, 30.0))

    def test_all_off_pays_full_demand_penalty(self):
        env = UcpEnv(self.INST, np.random.default_rng(0), lambda_eq=2.0)
        env.reset()
        demand = env.current_demand
        result = env.step([0, 0])
        assert result.reward == pytest.approx(-2.0 * demand ** 2)

    def test_exact_demand_pays_only_unit_cost(self):
        inst = UcpInstance(a=(5.0,), b=(1.0,), c=(0.0,), p_min=(10.0,), p_max=(10.0,))
        env = UcpEnv(inst, np.random.default_rng(0), lambda_eq=1.0)
        env.reset()
        env.demands[0] = 10.0  # force an exactly satisfiable round
        result = env.step([1])
        assert result.reward == pytest.approx(-(5.0 + 10.0))

    def test_episode_lasts_ten_steps(self):
        env = UcpEnv(self.INST, np.random.default_rng(0))
        env.reset()
        steps = 0
        while not env.done:
            result = env.step([1, 0])
            steps += 1
        assert steps == UCP_EPISODE_LENGTH
        assert result.done

    def test_demands_within_bounds(self):
        env = UcpEnv(self.INST, np.random.default_rng(4))
        env.reset()
        assert np.all(env.demands >= 10.0)
        assert np.all(env.demands <= 50.0)

    def test_powers_redrawn_each_step(self):
        env = UcpEnv(self.INST, np.random.default_rng(4))
        env.reset()
        p0 = env.powers.copy()
        env.step([0, 1])
        assert not np.allclose(env.powers, p0)

    def test_dimension_mismatch(self):
        env = UcpEnv(self.INST, np.random.default_rng(0))
        env.reset()
        with pytest.raises(ValueError):
            env.step([1, 0, 1])

    def test_episode_determinism_under_fixed_seed_and_policy(self):
        def run(seed):
            env = UcpEnv(self.INST, np.random.default_rng(seed))
            env.reset()
            rewards = []
            while not env.done:
                rewards.append(env.step([1, 1]).reward)
            return rewards

        assert run(9) == run(9)


class TestKnapsackSoftConstraint:
    def test_overflow_pick_ends_episode_with_zero_reward(self):
        inst = KnapsackInstance(values=(4.0, 2.0), weights=(3.0, 3.0), capacity=3.0)
        env = KnapsackEnv([inst], np.random.default_rng(0), hard_mask=False)
        obs = env.reset()
        assert obs.mask.all()  # soft mask keeps unselected items selectable
        env.step(0)
        result = env.step(1)  # would overflow: rolled back, penalized
        assert result.done and result.reward == 0.0
        assert list(env.selected) == [1, 0]
        assert env.episode_value() == pytest.approx(4.0)

    def test_feasible_completion_still_rewards_value(self):
        inst = KnapsackInstance(values=(1.0, 2.0), weights=(1.0, 1.0), capacity=2.0)
        env = KnapsackEnv([inst], np.random.default_rng(0), hard_mask=False)
        env.reset()
        env.step(0)
        result = env.step(1)
        assert result.done and result.reward == pytest.approx(3.0)

    def test_mask_never_empty_while_episode_open(self):
        rng = np.random.default_rng(3)
        inst = KnapsackInstance(values=(1.0, 2.0, 3.0), weights=(2.0, 3.0, 4.0),
                                capacity=5.0)
        for hard in (True, False):
            env = KnapsackEnv([inst], np.random.default_rng(1), hard_mask=hard)
            obs = env.reset()
            while not env.done:
                assert obs.mask.any()
                obs = env.step(int(rng.choice(np.flatnonzero(obs.mask)))).observation
