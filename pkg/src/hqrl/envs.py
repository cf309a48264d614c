"""RL environments for MaxCut, unit commitment and knapsack.

Observations expose the normalized Ising coefficients of the current
instance plus the annotation vector; rewards always come from the original
problem objective, never from the encoded penalty Hamiltonian.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ansatz import annotations_all_pi, normalize_coefficients
from .hamiltonians import (
    IsingHamiltonian,
    KnapsackInstance,
    UcpInstance,
    WeightedGraph,
    cut_value,
    default_lambda_eq,
    knapsack_qubo_unbalanced,
    maxcut_ising,
    qubo_to_ising,
    ucp_qubo,
)

UCP_EPISODE_LENGTH = 10


class ContractViolation(RuntimeError):
    """An agent played an action forbidden by the current mask."""


@dataclass
class EnvObservation:
    """Normalized encoding Hamiltonian plus episode annotations."""

    ising: IsingHamiltonian
    annotations: np.ndarray | None
    mask: np.ndarray | None
    instance_index: int = -1


@dataclass
class StepResult:
    observation: EnvObservation
    reward: float
    done: bool
    action_mask: np.ndarray | None


class MaxCutEnv:
    """Sequential node assignment; reward is the change in cut weight.

    Episodes start with every node in set 0 and all annotations at pi.
    Moving a node flips its annotation to 0 and removes it from the mask.
    The episode ends when the cut stops improving or all nodes are assigned.
    """

    def __init__(self, dataset: Sequence[WeightedGraph], rng: np.random.Generator):
        if not dataset:
            raise ValueError("dataset must not be empty")
        self.dataset = list(dataset)
        self.rng = rng
        self._encodings = [normalize_coefficients(maxcut_ising(g)) for g in self.dataset]
        self.done = True

    def reset(self, instance_index: int | None = None) -> EnvObservation:
        if instance_index is None:
            instance_index = int(self.rng.integers(len(self.dataset)))
        self.instance_index = instance_index
        self.instance = self.dataset[self.instance_index]
        n = self.instance.num_nodes
        self.partition = np.zeros(n, dtype=np.int8)
        self.annotations = annotations_all_pi(n)
        self.mask = np.ones(n, dtype=bool)
        self.step_count = 0
        self.last_cut = 0.0
        self.best_cut = 0.0
        self.done = False
        return self._observe()

    def _observe(self) -> EnvObservation:
        return EnvObservation(
            ising=self._encodings[self.instance_index],
            annotations=self.annotations.copy(),
            mask=self.mask.copy(),
            instance_index=self.instance_index,
        )

    def step(self, action: int) -> StepResult:
        if self.done:
            raise ContractViolation("episode is over; call reset()")
        if not (0 <= action < self.instance.num_nodes) or not self.mask[action]:
            raise ContractViolation(f"node {action} is not selectable")
        self.partition[action] = 1
        self.annotations[action] = 0.0
        self.mask[action] = False
        self.step_count += 1
        new_cut = cut_value(self.instance, self.partition)
        reward = new_cut - self.last_cut
        self.last_cut = new_cut
        self.best_cut = max(self.best_cut, new_cut)
        self.done = reward <= 0.0 or not self.mask.any()
        return StepResult(self._observe(), float(reward), self.done, self.mask.copy())

    def episode_value(self) -> float:
        return self.last_cut

    def best_value(self) -> float:
        """Largest cut visited; the episode's obtained solution.

        The termination rule forces one final non-improving move whenever the
        cut peaks before the node supply runs out, so the peak, not the
        post-termination state, is what the agent actually found.
        """
        return self.best_cut


class KnapsackEnv:
    """Sequential item selection under a capacity constraint.

    Intermediate rewards are zero. With the default hard mask only items
    that still fit are selectable, so the episode ends with the selection's
    total value and is always feasible. With hard_mask=False every
    unselected item stays selectable; picking one that overflows the
    capacity ends the episode with zero reward and the selection rolled
    back to the last feasible state (soft-constraint variant).
    """

    def __init__(self, dataset: Sequence[KnapsackInstance], rng: np.random.Generator,
                 lambda1: float = 1.0, lambda2: float = 1.0, hard_mask: bool = True):
        if not dataset:
            raise ValueError("dataset must not be empty")
        self.dataset = list(dataset)
        self.rng = rng
        self.hard_mask = hard_mask
        self._encodings = [
            normalize_coefficients(qubo_to_ising(knapsack_qubo_unbalanced(inst, lambda1, lambda2)))
            for inst in self.dataset
        ]
        self.done = True

    def reset(self, instance_index: int | None = None) -> EnvObservation:
        if instance_index is None:
            instance_index = int(self.rng.integers(len(self.dataset)))
        self.instance_index = instance_index
        self.instance = self.dataset[self.instance_index]
        n = self.instance.num_items
        self.selected = np.zeros(n, dtype=np.int8)
        self.annotations = annotations_all_pi(n)
        self.weight = 0.0
        self.step_count = 0
        self._recompute_mask()
        self.done = not self.mask.any()
        self.final_reward = 0.0
        return self._observe()

    def _recompute_mask(self) -> None:
        w = np.asarray(self.instance.weights)
        self.mask = self.selected == 0
        if self.hard_mask:
            fits = self.weight + w <= self.instance.capacity + 1e-9
            self.mask &= fits

    def _observe(self) -> EnvObservation:
        return EnvObservation(
            ising=self._encodings[self.instance_index],
            annotations=self.annotations.copy(),
            mask=self.mask.copy(),
            instance_index=self.instance_index,
        )

    def step(self, action: int) -> StepResult:
        if self.done:
            raise ContractViolation("episode is over; call reset()")
        if not (0 <= action < self.instance.num_items) or not self.mask[action]:
            raise ContractViolation(f"item {action} is not selectable")
        overweight = (not self.hard_mask
                      and self.weight + self.instance.weights[action]
                      > self.instance.capacity + 1e-9)
        if overweight:
            # the offending pick is rolled back; the episode scores zero
            self.step_count += 1
            self.done = True
            self.final_reward = 0.0
            return StepResult(self._observe(), 0.0, True, self.mask.copy())
        self.selected[action] = 1
        self.annotations[action] = 0.0
        self.weight += self.instance.weights[action]
        self.step_count += 1
        self._recompute_mask()
        self.done = not self.mask.any()
        reward = 0.0
        if self.done:
            reward = float(np.dot(self.selected, self.instance.values))
            self.final_reward = reward
        return StepResult(self._observe(), reward, self.done, self.mask.copy())

    def episode_value(self) -> float:
        return float(np.dot(self.selected, self.instance.values))


class UcpEnv:
    """A sequence of ten contextual bandit rounds per episode.

    Demands are drawn once per episode, dispatchable powers are redrawn
    every round, and the agent commits all generators at once. The reward
    is the negative unit cost plus a squared demand-residual penalty.
    """

    def __init__(self, instance: UcpInstance, rng: np.random.Generator,
                 lambda_eq: float | None = None):
        self.instance = instance
        self.rng = rng
        self.lambda_eq = default_lambda_eq(instance) if lambda_eq is None else float(lambda_eq)
        self.done = True

    def reset(self, instance_index: int | None = None) -> EnvObservation:
        del instance_index  # a UCP env wraps a single generator table
        inst = self.instance
        lo, hi = min(inst.p_min), float(np.sum(inst.p_max))
        self.demands = self.rng.uniform(lo, hi, UCP_EPISODE_LENGTH)
        self.step_count = 0
        self.done = False
        self._sample_powers()
        return self._observe()

    def _sample_powers(self) -> None:
        inst = self.instance
        self.powers = self.rng.uniform(inst.p_min, inst.p_max)
        qubo = ucp_qubo(inst, self.powers, float(self.demands[self.step_count]),
                        self.lambda_eq)
        self._encoding = normalize_coefficients(qubo_to_ising(qubo))

    def _observe(self) -> EnvObservation:
        return EnvObservation(ising=self._encoding, annotations=None, mask=None,
                              instance_index=0)

    @property
    def current_demand(self) -> float:
        return float(self.demands[self.step_count])

    def step(self, action) -> StepResult:
        if self.done:
            raise ContractViolation("episode is over; call reset()")
        x = np.asarray(action)
        if x.shape != (self.instance.num_generators,):
            raise ValueError("action must assign every generator")
        costs = self.instance.unit_costs(self.powers)
        residual = float(np.dot(self.powers, x) - self.current_demand)
        reward = -(float(np.dot(costs, x)) + self.lambda_eq * residual ** 2)
        self.step_count += 1
        self.done = self.step_count >= UCP_EPISODE_LENGTH
        if not self.done:
            self._sample_powers()
        return StepResult(self._observe(), reward, self.done, None)
