"""Policy-gradient and Q-learning agents over circuit function approximators.

Action values and policy logits come from expectation values of a small
observable family (per-node X, incident-edge ZZ sums, or per-qubit Z).
Gradients flow through those expectations with a single reverse sweep per
state by collapsing each update's chain rule into one weighted-sum
observable per batch row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .hamiltonians import WeightedGraph
from .statesim import (
    CircuitTemplate,
    ObservablePlan,
    gradient_many,
    run_many,
    stack_templates,
)

HEAD_KINDS = ("node_x", "edge_zz", "item_z", "bernoulli_z")


# ---------------------------------------------------------------------------
# optimizer and schedules

@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    t: int = 0


def adam_step(adam: AdamState, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """One bias-corrected Adam descent step; returns the new parameter vector."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != params.shape:
        raise ValueError("gradient and parameter shapes differ")
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite gradient passed to the optimizer")
    if adam.m is None:
        adam.m = np.zeros_like(params)
        adam.v = np.zeros_like(params)
    adam.t += 1
    adam.m = adam.beta1 * adam.m + (1 - adam.beta1) * grad
    adam.v = adam.beta2 * adam.v + (1 - adam.beta2) * grad ** 2
    m_hat = adam.m / (1 - adam.beta1 ** adam.t)
    v_hat = adam.v / (1 - adam.beta2 ** adam.t)
    return params - adam.lr * m_hat / (np.sqrt(v_hat) + adam.eps)


@dataclass(frozen=True)
class Schedule:
    """Piecewise-linear-then-flat (kind 'linear') or constant value per step."""

    kind: str
    start: float
    end: float = 0.0
    end_step: int = 1

    def __post_init__(self):
        if self.kind not in ("linear", "constant"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "linear" and self.end_step < 1:
            raise ValueError("end_step must be >= 1")

    def value(self, step: int) -> float:
        if self.kind == "constant":
            return self.start
        frac = min(max(step, 0), self.end_step) / self.end_step
        return self.start + (self.end - self.start) * frac


# ---------------------------------------------------------------------------
# observable heads

@dataclass
class ObservableHead:
    """Maps the expectations of a shared term family to per-action values.

    values = matrix @ expectations; matrix rows are actions, columns terms.
    """

    kind: str
    plan: ObservablePlan
    matrix: np.ndarray

    @property
    def num_actions(self) -> int:
        return self.matrix.shape[0]


def make_head(kind: str, n: int, graph: WeightedGraph | None = None) -> ObservableHead:
    if kind == "node_x":
        plan = ObservablePlan.from_terms(n, [("x", q, -1) for q in range(n)])
        return ObservableHead(kind, plan, np.eye(n))
    if kind in ("item_z", "bernoulli_z"):
        plan = ObservablePlan.from_terms(n, [("z", q, -1) for q in range(n)])
        return ObservableHead(kind, plan, np.eye(n))
    if kind == "edge_zz":
        if graph is None:
            raise ValueError("edge_zz head needs the problem graph")
        edges = list(graph.edges)
        plan = ObservablePlan.from_terms(n, [("zz", i, j, ) for i, j, _ in edges])
        matrix = np.zeros((n, len(edges)))
        for k, (i, j, w) in enumerate(edges):
            matrix[i, k] = w
            matrix[j, k] = w
        return ObservableHead(kind, plan, matrix)
    raise ValueError(f"unknown head kind {kind!r}")


def head_values(states: np.ndarray, head: ObservableHead,
                matrices: np.ndarray | None = None) -> np.ndarray:
    """Per-action values for a batch of states; (B, A)."""
    e = head.plan.expectations(states)
    if matrices is None:
        return e @ head.matrix.T
    return np.einsum("bak,bk->ba", matrices, e)


# ---------------------------------------------------------------------------
# policies

def masked_softmax(logits: np.ndarray, mask: np.ndarray | None) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64).copy()
    if mask is not None:
        if not np.any(mask):
            raise ValueError("action mask is empty")
        z[~np.asarray(mask, dtype=bool)] = -np.inf
    z -= z.max()
    p = np.exp(z)
    p /= p.sum()
    return p


def qpg_policy(template: CircuitTemplate, params: np.ndarray, head: ObservableHead,
               mask: np.ndarray | None, scale: float = 1.0,
               scalings: np.ndarray | None = None) -> np.ndarray:
    """Softmax policy over unmasked actions from scaled expectation values."""
    states = run_many(template, np.asarray(params)[None, :])
    values = head_values(states, head)[0]
    if scalings is not None:
        values = values * scalings
    return masked_softmax(scale * values, mask)


def bernoulli_probabilities(values: np.ndarray, scalings: np.ndarray | None,
                            born: bool = False) -> np.ndarray:
    """Per-qubit selection probabilities from Z expectations."""
    if born:
        return np.clip((1.0 - values) / 2.0, 1e-9, 1 - 1e-9)
    u = values if scalings is None else values * scalings
    return 1.0 / (1.0 + np.exp(-u))


def qdqn_q_values(template: CircuitTemplate, params: np.ndarray,
                  head: ObservableHead) -> np.ndarray:
    """Per-action Q-values; no output scaling is applied."""
    states = run_many(template, np.asarray(params)[None, :])
    return head_values(states, head)[0]


def epsilon_greedy(q_values: np.ndarray, mask: np.ndarray | None, epsilon: float,
                   rng: np.random.Generator) -> int:
    """Random unmasked action with probability epsilon, else the masked argmax.

    Ties resolve to the lowest action index.
    """
    q = np.asarray(q_values, dtype=np.float64)
    if mask is None:
        mask = np.ones(len(q), dtype=bool)
    valid = np.flatnonzero(mask)
    if len(valid) == 0:
        raise ValueError("action mask is empty")
    if rng.random() < epsilon:
        return int(valid[rng.integers(len(valid))])
    masked = np.where(mask, q, -np.inf)
    return int(np.argmax(masked))


def discounted_returns(rewards: Sequence[float], gamma: float) -> np.ndarray:
    out = np.zeros(len(rewards))
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


# ---------------------------------------------------------------------------
# replay buffer

@dataclass
class Transition:
    template: CircuitTemplate
    head: ObservableHead
    action: int
    reward: float
    next_template: CircuitTemplate | None
    next_head: ObservableHead | None
    next_mask: np.ndarray | None
    done: bool
    meta: dict = field(default_factory=dict)


class ReplayBuffer:
    """Fixed-capacity ring with uniform sampling."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._cursor = 0

    def __len__(self) -> int:
        return len(self._items)

    def push(self, item: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(item)
        else:
            self._items[self._cursor] = item
            self._cursor = (self._cursor + 1) % self.capacity

    def sample(self, rng: np.random.Generator, k: int) -> list[Transition]:
        idx = rng.integers(0, len(self._items), size=k)
        return [self._items[i] for i in idx]

    def as_list(self) -> list[Transition]:
        return list(self._items)

    @property
    def cursor(self) -> int:
        return self._cursor

    def restore(self, items: list[Transition], cursor: int) -> None:
        """Rebuild ring storage exactly, including the overwrite position."""
        if len(items) > self.capacity:
            raise ValueError("more items than capacity")
        self._items = list(items)
        self._cursor = cursor


# ---------------------------------------------------------------------------
# trajectory container for policy-gradient updates

@dataclass
class TrajectoryStep:
    template: CircuitTemplate
    head: ObservableHead
    mask: np.ndarray | None
    action: int | np.ndarray
    reward: float
    scale: float = 1.0


@dataclass
class EmaBaseline:
    """Moving average of episode returns plus a scale estimate.

    The scale (mean absolute deviation) whitens advantages so update sizes
    do not depend on the problem's reward units.
    """

    decay: float = 0.99
    value: float | None = None
    spread: float | None = None

    def current(self, fallback: float) -> float:
        return fallback if self.value is None else self.value

    def scale(self) -> float:
        if self.spread is None or self.spread <= 0.0:
            return 1.0
        return self.spread

    def update(self, episode_return: float) -> None:
        if self.value is None:
            self.value = episode_return
            self.spread = 0.0
        else:
            deviation = abs(episode_return - self.value)
            self.value = self.decay * self.value + (1 - self.decay) * episode_return
            self.spread = self.decay * self.spread + (1 - self.decay) * deviation


# ---------------------------------------------------------------------------
# QPG agent

class QpgAgent:
    """REINFORCE-style agent with softmax or per-qubit Bernoulli heads."""

    def __init__(self, params: np.ndarray, gamma: float, lr_params: float,
                 rng: np.random.Generator, temperature: Schedule | None = None,
                 scaling_schedule: Schedule | None = None,
                 trainable_scalings: np.ndarray | None = None,
                 lr_scalings: float = 0.1, baseline: bool = True,
                 baseline_decay: float = 0.99, bernoulli_born: bool = False):
        self.params = np.asarray(params, dtype=np.float64).copy()
        self.gamma = gamma
        self.rng = rng
        self.adam = AdamState(lr=lr_params)
        self.temperature = temperature or Schedule("constant", 1.0)
        self.scaling_schedule = scaling_schedule
        self.scalings = (None if trainable_scalings is None
                         else np.asarray(trainable_scalings, dtype=np.float64).copy())
        self.adam_scalings = AdamState(lr=lr_scalings) if self.scalings is not None else None
        self.baseline = EmaBaseline(decay=baseline_decay) if baseline else None
        self.bernoulli_born = bernoulli_born
        self.policy_norm_drift = 0.0
        self.update_count = 0

    # -- acting ------------------------------------------------------------
    def _combined_scale(self, step: int) -> float:
        scale = self.temperature.value(step)
        if self.scaling_schedule is not None:
            scale *= self.scaling_schedule.value(step)
        return scale

    def act(self, template: CircuitTemplate, head: ObservableHead,
            mask: np.ndarray | None, step: int):
        """Sample an action; returns (action, TrajectoryStep without reward)."""
        if head.kind == "bernoulli_z":
            states = run_many(template, self.params[None, :])
            values = head_values(states, head)[0]
            probs = bernoulli_probabilities(values, self.scalings, self.bernoulli_born)
            action = (self.rng.random(len(probs)) < probs).astype(np.int8)
            traj = TrajectoryStep(template, head, None, action, 0.0, 1.0)
            return action, traj
        scale = self._combined_scale(step)
        probs = qpg_policy(template, self.params, head, mask, scale, self.scalings)
        self.policy_norm_drift = max(self.policy_norm_drift, abs(float(probs.sum()) - 1.0))
        edges = np.cumsum(probs)
        action = int(np.searchsorted(edges, self.rng.random() * edges[-1], side="right"))
        action = min(action, len(probs) - 1)
        traj = TrajectoryStep(template, head, None if mask is None else mask.copy(),
                              action, 0.0, scale)
        return action, traj

    def greedy_probabilities(self, template, head, mask, step):
        return qpg_policy(template, self.params, head, mask,
                          self._combined_scale(step), self.scalings)

    # -- learning ----------------------------------------------------------
    def finish_episodes(self, trajectories: Sequence[Sequence[TrajectoryStep]]) -> float:
        """One ascent step on a batch of complete trajectories; returns mean return."""
        rows: list[TrajectoryStep] = []
        advantages: list[float] = []
        returns0: list[float] = []
        for traj in trajectories:
            if not traj:
                continue
            rewards = [s.reward for s in traj]
            g = discounted_returns(rewards, self.gamma)
            returns0.append(float(g[0]))
            if self.baseline:
                base = self.baseline.current(float(g[0]))
                scale = self.baseline.scale()
            else:
                base, scale = 0.0, 1.0
            for s, gt in zip(traj, g):
                rows.append(s)
                advantages.append((float(gt) - base) / scale)
        if not rows:
            return 0.0
        grads, scal_grads = self._log_policy_gradients(rows, np.asarray(advantages))
        self.params = adam_step(self.adam, self.params, -grads)
        if self.scalings is not None and scal_grads is not None:
            self.scalings = adam_step(self.adam_scalings, self.scalings, -scal_grads)
        if self.baseline:
            for g0 in returns0:
                self.baseline.update(g0)
        self.update_count += 1
        return float(np.mean(returns0))

    def _log_policy_gradients(self, rows, advantages):
        """Sum over rows of advantage * d log pi / d (params, scalings)."""
        stack = stack_templates([s.template for s in rows])
        head = rows[0].head
        plan = head.plan
        b = len(rows)
        params_mat = np.broadcast_to(self.params, (b, len(self.params)))
        states = run_many(stack, params_mat)
        e = plan.expectations(states)  # (B, K)
        coeffs = np.zeros_like(e)
        scal_grads = None if self.scalings is None else np.zeros_like(self.scalings)
        for i, step_row in enumerate(rows):
            adv = advantages[i]
            if head.kind == "bernoulli_z":
                values = head.matrix @ e[i]
                probs = bernoulli_probabilities(values, self.scalings, self.bernoulli_born)
                x = np.asarray(step_row.action, dtype=np.float64)
                if self.bernoulli_born:
                    dlogp_dp = x / probs - (1 - x) / (1 - probs)
                    dlogp_de = dlogp_dp * (-0.5)
                else:
                    resid = x - probs
                    w = self.scalings if self.scalings is not None else np.ones_like(values)
                    dlogp_de = resid * w
                    if scal_grads is not None:
                        scal_grads += adv * resid * values
                coeffs[i] = head.matrix.T @ dlogp_de
            else:
                values = head.matrix @ e[i]
                if self.scalings is not None:
                    values = values * self.scalings
                pi = masked_softmax(step_row.scale * values, step_row.mask)
                onehot = np.zeros_like(pi)
                onehot[step_row.action] = 1.0
                dlogp_dv = step_row.scale * (onehot - pi)
                if self.scalings is not None:
                    raw = head.matrix @ e[i]
                    if scal_grads is not None:
                        scal_grads += adv * dlogp_dv * raw
                    dlogp_dv = dlogp_dv * self.scalings
                coeffs[i] = head.matrix.T @ dlogp_dv
            coeffs[i] *= adv
        grads = gradient_many(stack, params_mat, plan, coeffs).sum(axis=0)
        return grads, scal_grads


# ---------------------------------------------------------------------------
# QDQN agent

class QdqnAgent:
    """Q-learning agent with replay buffer and periodically synced target net."""

    def __init__(self, params: np.ndarray, gamma: float, lr: float,
                 rng: np.random.Generator, epsilon: Schedule,
                 replay_capacity: int = 10_000, batch_size: int = 32,
                 target_sync: int = 100, update_every: int = 1):
        self.params = np.asarray(params, dtype=np.float64).copy()
        self.target_params = self.params.copy()
        self.gamma = gamma
        self.rng = rng
        self.epsilon = epsilon
        self.adam = AdamState(lr=lr)
        self.replay = ReplayBuffer(replay_capacity)
        self.batch_size = batch_size
        self.target_sync = target_sync
        self.update_every = update_every
        self.update_count = 0
        self.step_count = 0

    def q_values(self, template, head, params=None) -> np.ndarray:
        p = self.params if params is None else params
        return qdqn_q_values(template, p, head)

    def act(self, template, head, mask, step: int) -> int:
        eps = self.epsilon.value(step)
        if self.rng.random() < eps:
            valid = np.flatnonzero(mask) if mask is not None else np.arange(head.num_actions)
            return int(valid[self.rng.integers(len(valid))])
        return int(np.argmax(np.where(mask, self.q_values(template, head), -np.inf)))

    def greedy_action(self, template, head, mask) -> int:
        return int(np.argmax(np.where(mask, self.q_values(template, head), -np.inf)))

    def record(self, transition: Transition) -> None:
        self.replay.push(transition)
        self.step_count += 1

    def maybe_update(self) -> float | None:
        if len(self.replay) < self.batch_size or self.step_count % self.update_every != 0:
            return None
        batch = self.replay.sample(self.rng, self.batch_size)
        return self.update(batch)

    def update(self, batch: Sequence[Transition]) -> float:
        """One semi-gradient TD step on a batch; returns the TD loss."""
        targets = qdqn_targets(batch, self.target_params, self.gamma)
        loss, grads = qdqn_loss_and_gradient(batch, self.params, targets)
        self.params = adam_step(self.adam, self.params, grads)
        self.update_count += 1
        if self.update_count % self.target_sync == 0:
            self.target_params = self.params.copy()
        return loss


def qdqn_targets(batch: Sequence[Transition], target_params: np.ndarray,
                 gamma: float) -> np.ndarray:
    """TD targets r + gamma * max_a' Q_target(s', a'); just r on terminal rows.

    The max over next actions respects the next-state action mask.
    """
    b = len(batch)
    targets = np.empty(b)
    open_rows = [i for i, tr in enumerate(batch) if not tr.done]
    if open_rows:
        plan = batch[open_rows[0]].next_head.plan
        next_stack = stack_templates([batch[i].next_template for i in open_rows])
        tmat = np.broadcast_to(target_params, (len(open_rows), len(target_params)))
        next_e = plan.expectations(run_many(next_stack, tmat))
        matrices = np.stack([batch[i].next_head.matrix for i in open_rows])
        next_q = np.einsum("bak,bk->ba", matrices, next_e)
        for row, i in enumerate(open_rows):
            masked = np.where(batch[i].next_mask, next_q[row], -np.inf)
            targets[i] = batch[i].reward + gamma * masked.max()
    for i, tr in enumerate(batch):
        if tr.done:
            targets[i] = tr.reward
    return targets


def qdqn_loss_and_gradient(batch: Sequence[Transition], params: np.ndarray,
                           targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Squared TD error (targets held constant) and its parameter gradient."""
    if not len(batch):
        raise ValueError("batch must not be empty")
    b = len(batch)
    plan = batch[0].head.plan
    params_mat = np.broadcast_to(params, (b, len(params)))
    stack = stack_templates([tr.template for tr in batch])
    e = plan.expectations(run_many(stack, params_mat))
    matrices = np.stack([tr.head.matrix for tr in batch])
    q_all = np.einsum("bak,bk->ba", matrices, e)
    actions = [tr.action for tr in batch]
    q_sa = q_all[np.arange(b), actions]
    err = targets - q_sa
    loss = float(np.mean(err ** 2))
    # dLoss/dq = -2 err / B, folded into per-row observable coefficients
    coeffs = matrices[np.arange(b), actions, :] * (-2.0 * err / b)[:, None]
    grads = gradient_many(stack, params_mat, plan, coeffs).sum(axis=0)
    return loss, grads
