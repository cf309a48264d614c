"""Experiment orchestration: training loops, metrics, checkpoints, evaluation.

Every seed runs its own deterministic RNG streams derived from
(master_seed, seed_index, role), writes metrics.csv rows every flush_every
steps, and checkpoints at episode boundaries so a resumed run replays
bit-exactly. Batched updates assume the dataset is structurally
homogeneous (equal size and term layout), which holds for every generated
dataset.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ansatz
from .agents import (
    ObservableHead,
    QdqnAgent,
    QpgAgent,
    Schedule,
    Transition,
    TrajectoryStep,
    make_head,
)
from .ansatz import AnsatzKind, build, init_params
from .config import ConfigError, ExperimentConfig, config_hash
from .datasets import Dataset, load_dataset
from .envs import KnapsackEnv, MaxCutEnv, UcpEnv
from .hamiltonians import (
    knapsack_qubo_slack,
    knapsack_qubo_unbalanced,
    qubo_to_ising,
    ucp_optimal_reward,
)
from .qaoa import QaoaConfig, knapsack_state_metrics, qaoa_optimize, qaoa_template
from .statesim import run_circuit

METRICS_COLUMNS = ["step", "episode", "mean_reward", "approx_ratio",
                   "schedule_value", "wall_time", "seed", "config_hash"]
EVAL_COLUMNS = ["instance_id", "episodes", "p_optimal", "p_valid", "mean_ratio",
                "mean_value", "seed"]
QAOA_COLUMNS = ["instance_id", "encoding", "restart", "p_optimal", "p_valid",
                "final_energy"]


def _rng(cfg: ExperimentConfig, seed_index: int, role: int) -> np.random.Generator:
    return np.random.default_rng([cfg.master_seed, seed_index, role])


def make_env(cfg: ExperimentConfig, dataset: Dataset, rng: np.random.Generator):
    if cfg.problem == "maxcut":
        return MaxCutEnv(dataset.instances, rng)
    if cfg.problem == "knapsack":
        return KnapsackEnv(dataset.instances, rng, cfg.lambda1, cfg.lambda2,
                           hard_mask=not cfg.knapsack_soft_constraint)
    lam = cfg.lambda_eq if cfg.lambda_eq > 0 else None
    return UcpEnv(dataset.instances[0], rng, lam)


class HeadProvider:
    """Heads per instance; shared across instances unless edge-weighted."""

    def __init__(self, cfg: ExperimentConfig, dataset: Dataset):
        self.cfg = cfg
        self.dataset = dataset
        self._shared: ObservableHead | None = None
        self._by_instance: dict[int, ObservableHead] = {}

    def for_observation(self, obs) -> ObservableHead:
        if self.cfg.head != "edge_zz":
            if self._shared is None:
                self._shared = make_head(self.cfg.head, obs.ising.n)
            return self._shared
        idx = obs.instance_index
        head = self._by_instance.get(idx)
        if head is None:
            head = make_head("edge_zz", obs.ising.n, self.dataset.instances[idx])
            self._by_instance[idx] = head
        return head


class TemplateProvider:
    def __init__(self, cfg: ExperimentConfig):
        self.kind = AnsatzKind(cfg.ansatz)
        self.layers = cfg.layers

    def for_observation(self, obs):
        return build(self.kind, obs.ising, obs.annotations, self.layers)


class MetricsWriter:
    """Aggregates per-episode metrics and flushes a row every flush_every steps."""

    def __init__(self, path: Path, cfg: ExperimentConfig, seed_index: int,
                 append: bool = False):
        self.path = path
        self.cfg = cfg
        self.seed_index = seed_index
        self.hash = config_hash(cfg)
        self.rows: list[list] = []
        self._episode_returns: list[float] = []
        self._episode_ratios: list[float] = []
        self._episodes = 0
        self._started = time.perf_counter()
        self._last_reward = 0.0
        self._last_ratio = 0.0
        if not append or not path.exists():
            with open(path, "w", newline="") as fh:
                csv.writer(fh).writerow(METRICS_COLUMNS)

    def record_episode(self, episode_return: float, ratio: float) -> None:
        self._episodes += 1
        self._episode_returns.append(episode_return)
        self._episode_ratios.append(ratio)

    def maybe_flush(self, step: int, schedule_value: float) -> None:
        if step % self.cfg.flush_every != 0:
            return
        if self._episode_returns:
            self._last_reward = float(np.mean(self._episode_returns))
            self._last_ratio = float(np.mean(self._episode_ratios))
        row = [step, self._episodes, repr(self._last_reward), repr(self._last_ratio),
               repr(float(schedule_value)),
               repr(time.perf_counter() - self._started), self.seed_index, self.hash]
        self._episode_returns.clear()
        self._episode_ratios.clear()
        with open(self.path, "a", newline="") as fh:
            csv.writer(fh).writerow(row)

    @property
    def episodes(self) -> int:
        return self._episodes

    def restore(self, episodes: int) -> None:
        self._episodes = episodes


# ---------------------------------------------------------------------------
# checkpointing

def _rng_state(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state


def _set_rng_state(rng: np.random.Generator, state: dict) -> None:
    rng.bit_generator.state = state


def _compact_transition(tr: Transition) -> dict:
    return dict(tr.meta, action=int(tr.action), reward=float(tr.reward),
                done=bool(tr.done))


def _save_checkpoint(path: Path, cfg: ExperimentConfig, seed_index: int, step: int,
                     episodes: int, agent, env_rng, num_qubits: int,
                     extra: dict) -> None:
    state = {
        "config": cfg.as_dict(),
        "config_hash": config_hash(cfg),
        "seed_index": seed_index,
        "step": step,
        "episodes": episodes,
        "num_qubits": num_qubits,
        "env_rng": _rng_state(env_rng),
        "agent_rng": _rng_state(agent.rng),
        "params": agent.params.tolist(),
    }
    if isinstance(agent, QdqnAgent):
        state.update({
            "target_params": agent.target_params.tolist(),
            "adam": _adam_state(agent.adam),
            "update_count": agent.update_count,
            "step_count": agent.step_count,
            "replay": [_compact_transition(tr) for tr in agent.replay.as_list()],
            "replay_cursor": agent.replay.cursor,
        })
    else:
        state.update({
            "adam": _adam_state(agent.adam),
            "scalings": None if agent.scalings is None else agent.scalings.tolist(),
            "adam_scalings": _adam_state(agent.adam_scalings) if agent.adam_scalings else None,
            "baseline": None if agent.baseline is None else agent.baseline.value,
            "baseline_spread": None if agent.baseline is None else agent.baseline.spread,
            "update_count": agent.update_count,
        })
    state.update(extra)
    path.write_text(json.dumps(state))


def _adam_state(adam) -> dict:
    return {"lr": adam.lr, "t": adam.t,
            "m": None if adam.m is None else adam.m.tolist(),
            "v": None if adam.v is None else adam.v.tolist()}


def _restore_adam(adam, data: dict) -> None:
    adam.lr = data["lr"]
    adam.t = data["t"]
    adam.m = None if data["m"] is None else np.asarray(data["m"])
    adam.v = None if data["v"] is None else np.asarray(data["v"])


# ---------------------------------------------------------------------------
# training

@dataclass
class TrainResult:
    run_dir: Path
    metrics_paths: list[Path] = field(default_factory=list)
    checkpoint_paths: list[Path] = field(default_factory=list)


def train(cfg: ExperimentConfig, resume: bool = False) -> TrainResult:
    """Train cfg.seeds independent agents sequentially; returns output paths."""
    if cfg.algorithm not in ("qpg", "qdqn"):
        raise ConfigError([f"train expects qpg or qdqn, got {cfg.algorithm!r}"])
    dataset = load_dataset(cfg.dataset)
    run_dir = Path(cfg.out)
    run_dir.mkdir(parents=True, exist_ok=True)
    _write_run_manifest(run_dir, cfg)
    result = TrainResult(run_dir=run_dir)
    for seed_index in range(cfg.seeds):
        metrics_path, ckpt_path = train_seed(cfg, dataset, seed_index, run_dir, resume)
        result.metrics_paths.append(metrics_path)
        result.checkpoint_paths.append(ckpt_path)
    return result


def _write_run_manifest(run_dir: Path, cfg: ExperimentConfig) -> None:
    manifest_path = run_dir / "manifest.json"
    h = config_hash(cfg)
    if manifest_path.exists():
        existing = json.loads(manifest_path.read_text())
        if existing.get("config_hash") != h:
            raise ConfigError([
                f"output directory {run_dir} already holds a run with config hash "
                f"{existing.get('config_hash')}, refusing to mix with {h}"])
        return
    manifest_path.write_text(json.dumps({
        "config": cfg.as_dict(),
        "config_hash": h,
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }, indent=1, sort_keys=True))


def _build_agent(cfg: ExperimentConfig, dataset: Dataset, seed_index: int):
    init_rng = _rng(cfg, seed_index, 2)
    probe_env = make_env(cfg, dataset, _rng(cfg, seed_index, 9))
    obs = probe_env.reset()
    kind = AnsatzKind(cfg.ansatz)
    params = init_params(kind, obs.ising, cfg.layers, init_rng)
    agent_rng = _rng(cfg, seed_index, 1)
    n = obs.ising.n
    if cfg.algorithm == "qdqn":
        return QdqnAgent(
            params, gamma=cfg.gamma, lr=cfg.lr_params, rng=agent_rng,
            epsilon=Schedule("linear", cfg.epsilon_start, cfg.epsilon_end,
                             cfg.epsilon_end_step),
            replay_capacity=cfg.replay_capacity, batch_size=cfg.batch_size,
            target_sync=cfg.target_sync, update_every=cfg.update_every)
    temperature = Schedule("linear", cfg.temperature_start, cfg.temperature_end,
                           cfg.temperature_end_step) \
        if cfg.temperature_end != cfg.temperature_start \
        else Schedule("constant", cfg.temperature_start)
    scaling_schedule = None
    trainable = None
    if cfg.scaling_mode == "shared_schedule":
        scaling_schedule = Schedule("linear", cfg.scaling_start, cfg.scaling_end,
                                    cfg.scaling_end_step)
    elif cfg.scaling_mode == "trainable":
        trainable = np.ones(n)
    return QpgAgent(
        params, gamma=cfg.gamma, lr_params=cfg.lr_params, rng=agent_rng,
        temperature=temperature, scaling_schedule=scaling_schedule,
        trainable_scalings=trainable, lr_scalings=cfg.lr_scalings,
        baseline=cfg.baseline, baseline_decay=cfg.baseline_decay,
        bernoulli_born=cfg.bernoulli_born)


def train_seed(cfg: ExperimentConfig, dataset: Dataset, seed_index: int,
               run_dir: Path, resume: bool = False) -> tuple[Path, Path]:
    seed_dir = run_dir / f"seed_{seed_index}"
    seed_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = seed_dir / "metrics.csv"
    ckpt_path = seed_dir / "checkpoint.json"

    env_rng = _rng(cfg, seed_index, 0)
    env = make_env(cfg, dataset, env_rng)
    agent = _build_agent(cfg, dataset, seed_index)
    heads = HeadProvider(cfg, dataset)
    templates = TemplateProvider(cfg)

    start_step = 0
    restored_episodes = 0
    if resume and ckpt_path.exists():
        start_step, restored_episodes = _load_checkpoint(
            ckpt_path, cfg, agent, env_rng, env, heads, templates, dataset)
    if start_step >= cfg.total_steps:
        return metrics_path, ckpt_path

    metrics = MetricsWriter(metrics_path, cfg, seed_index,
                            append=resume and start_step > 0)
    metrics.restore(restored_episodes)
    trace_fh = open(seed_dir / "traces.jsonl", "a" if resume else "w") \
        if cfg.dump_traces else None
    try:
        if cfg.algorithm == "qdqn":
            _qdqn_loop(cfg, env, agent, heads, templates, dataset, metrics,
                       ckpt_path, seed_index, start_step, env_rng, trace_fh)
        else:
            _qpg_loop(cfg, env, agent, heads, templates, dataset, metrics,
                      ckpt_path, seed_index, start_step, env_rng, trace_fh)
    finally:
        if trace_fh:
            trace_fh.close()
    return metrics_path, ckpt_path


def _reset_with_guard(env, metrics, cfg, dataset):
    """Reset; degenerate instances that terminate immediately score as episodes."""
    obs = env.reset()
    guard = 0
    while env.done:
        metrics.record_episode(0.0, _episode_ratio(cfg, env, dataset))
        obs = env.reset()
        guard += 1
        if guard > 10_000:
            raise RuntimeError("every sampled instance terminates immediately")
    return obs


def _episode_ratio(cfg: ExperimentConfig, env, dataset: Dataset) -> float:
    if cfg.problem == "maxcut":
        # obtained solution = best cut visited; the termination rule forces a
        # final non-improving move whenever the cut peaks early
        best = dataset.optima[env.instance_index]
        return 1.0 if best <= 0 else env.best_value() / best
    if cfg.problem == "knapsack":
        best = dataset.optima[env.instance_index]
        return 1.0 if best <= 0 else env.episode_value() / best
    raise ValueError("per-episode ratio is problem-specific")


def _qdqn_loop(cfg, env, agent, heads, templates, dataset, metrics, ckpt_path,
               seed_index, start_step, env_rng, trace_fh) -> None:
    obs = _reset_with_guard(env, metrics, cfg, dataset)
    template = templates.for_observation(obs)
    head = heads.for_observation(obs)
    episode_return = 0.0
    next_ckpt = ((start_step // cfg.checkpoint_every) + 1) * cfg.checkpoint_every
    step = start_step
    at_boundary = True
    # training always finishes its final episode so checkpoints land on
    # episode boundaries and resumed runs replay bit-exactly
    while step < cfg.total_steps or not at_boundary:
        step += 1
        action = agent.act(template, head, obs.mask, step)
        result = env.step(action)
        at_boundary = result.done
        episode_return += result.reward
        next_obs = result.observation
        next_template = templates.for_observation(next_obs)
        next_head = heads.for_observation(next_obs)
        meta = {"instance": obs.instance_index,
                "ann": obs.annotations.tolist(),
                "next_ann": next_obs.annotations.tolist(),
                "next_mask": result.action_mask.astype(int).tolist()}
        agent.record(Transition(template, head, action, result.reward,
                                next_template, next_head, result.action_mask,
                                result.done, meta=meta))
        agent.maybe_update()
        if trace_fh:
            trace_fh.write(json.dumps({
                "step": step, "instance": obs.instance_index, "action": int(action),
                "reward": result.reward, "done": result.done}) + "\n")
        if result.done:
            metrics.record_episode(episode_return, _episode_ratio(cfg, env, dataset))
            episode_return = 0.0
            if step >= next_ckpt or step >= cfg.total_steps:
                _save_checkpoint(ckpt_path, cfg, seed_index, step, metrics.episodes,
                                 agent, env_rng, dataset.size, {})
                next_ckpt = ((step // cfg.checkpoint_every) + 1) * cfg.checkpoint_every
            if step < cfg.total_steps:
                obs = _reset_with_guard(env, metrics, cfg, dataset)
                template = templates.for_observation(obs)
                head = heads.for_observation(obs)
        else:
            obs = next_obs
            template = next_template
            head = next_head
        metrics.maybe_flush(step, agent.epsilon.value(step))


def _qpg_loop(cfg, env, agent, heads, templates, dataset, metrics, ckpt_path,
              seed_index, start_step, env_rng, trace_fh) -> None:
    is_ucp = cfg.problem == "ucp"
    obs = env.reset() if is_ucp else _reset_with_guard(env, metrics, cfg, dataset)
    template = templates.for_observation(obs)
    head = heads.for_observation(obs)
    trajectory: list[TrajectoryStep] = []
    pending: list[list[TrajectoryStep]] = []
    episode_return = 0.0
    episode_ratio_acc: list[float] = []
    next_ckpt = ((start_step // cfg.checkpoint_every) + 1) * cfg.checkpoint_every
    step = start_step
    at_boundary = True
    # run past total_steps until the episode ends and the update buffer is
    # drained, so the terminal checkpoint is a valid resume point
    while step < cfg.total_steps or not at_boundary or pending:
        step += 1
        action, traj_step = agent.act(template, head, obs.mask, step)
        if is_ucp:
            powers, demand = env.powers.copy(), env.current_demand
        result = env.step(action)
        at_boundary = result.done
        traj_step.reward = result.reward
        episode_return += result.reward
        if trace_fh:
            trace_fh.write(json.dumps({
                "step": step, "instance": obs.instance_index,
                "action": (action.tolist() if isinstance(action, np.ndarray)
                           else int(action)),
                "reward": result.reward, "done": result.done}) + "\n")
        if is_ucp:
            # each bandit round is its own one-step trajectory
            pending.append([traj_step])
            best = ucp_optimal_reward(env.instance, powers, demand, env.lambda_eq)
            episode_ratio_acc.append(best / result.reward if result.reward < 0 else 1.0)
        else:
            trajectory.append(traj_step)
        if result.done:
            if not is_ucp:
                pending.append(trajectory)
                trajectory = []
                ratio = _episode_ratio(cfg, env, dataset)
            else:
                ratio = float(np.mean(episode_ratio_acc))
                episode_ratio_acc = []
            metrics.record_episode(episode_return, ratio)
            episode_return = 0.0
            if len(pending) >= cfg.episodes_per_update:
                agent.finish_episodes(pending)
                pending = []
            if not pending and (step >= next_ckpt or step >= cfg.total_steps):
                _save_checkpoint(ckpt_path, cfg, seed_index, step, metrics.episodes,
                                 agent, env_rng, dataset.size, {})
                next_ckpt = ((step // cfg.checkpoint_every) + 1) * cfg.checkpoint_every
            if step < cfg.total_steps or pending:
                obs = env.reset() if is_ucp \
                    else _reset_with_guard(env, metrics, cfg, dataset)
                template = templates.for_observation(obs)
                head = heads.for_observation(obs)
        else:
            obs = result.observation
            template = templates.for_observation(obs)
            head = heads.for_observation(obs)
        metrics.maybe_flush(step, agent._combined_scale(step))


def _load_checkpoint(ckpt_path: Path, cfg: ExperimentConfig, agent, env_rng, env,
                     heads, templates, dataset) -> tuple[int, int]:
    state = json.loads(ckpt_path.read_text())
    if state["config_hash"] != config_hash(cfg):
        raise ConfigError(["checkpoint was produced by a different configuration"])
    agent.params = np.asarray(state["params"])
    _set_rng_state(env_rng, state["env_rng"])
    _set_rng_state(agent.rng, state["agent_rng"])
    _restore_adam(agent.adam, state["adam"])
    agent.update_count = state["update_count"]
    if isinstance(agent, QdqnAgent):
        agent.target_params = np.asarray(state["target_params"])
        agent.step_count = state["step_count"]
        items = [_restore_transition(item, cfg, dataset, heads, templates)
                 for item in state["replay"]]
        agent.replay.restore(items, state["replay_cursor"])
    else:
        if state.get("scalings") is not None:
            agent.scalings = np.asarray(state["scalings"])
        if state.get("adam_scalings") and agent.adam_scalings:
            _restore_adam(agent.adam_scalings, state["adam_scalings"])
        if agent.baseline is not None:
            agent.baseline.value = state.get("baseline")
            agent.baseline.spread = state.get("baseline_spread")
    return state["step"], state["episodes"]


def _restore_transition(item: dict, cfg: ExperimentConfig, dataset: Dataset,
                        heads: HeadProvider, templates: TemplateProvider) -> Transition:
    from .envs import EnvObservation
    idx = item["instance"]
    inst = dataset.instances[idx]
    if cfg.problem == "maxcut":
        from .hamiltonians import maxcut_ising
        ising = ansatz.normalize_coefficients(maxcut_ising(inst))
    else:
        ising = ansatz.normalize_coefficients(
            qubo_to_ising(knapsack_qubo_unbalanced(inst, cfg.lambda1, cfg.lambda2)))
    obs = EnvObservation(ising=ising, annotations=np.asarray(item["ann"], dtype=float),
                         mask=None, instance_index=idx)
    next_obs = EnvObservation(ising=ising,
                              annotations=np.asarray(item["next_ann"], dtype=float),
                              mask=None, instance_index=idx)
    return Transition(
        template=templates.for_observation(obs),
        head=heads.for_observation(obs),
        action=item["action"], reward=item["reward"],
        next_template=templates.for_observation(next_obs),
        next_head=heads.for_observation(next_obs),
        next_mask=np.asarray(item["next_mask"], dtype=bool),
        done=item["done"],
        meta={"instance": idx, "ann": item["ann"], "next_ann": item["next_ann"],
              "next_mask": item["next_mask"]})


# ---------------------------------------------------------------------------
# evaluation

@dataclass
class EvalSummary:
    mean_p_optimal: float
    mean_p_valid: float
    mean_ratio: float
    rows: list[dict] = field(default_factory=list)


def evaluate_checkpoint(ckpt_path, dataset_dir, episodes_per_instance: int | None = None,
                        out_csv=None) -> EvalSummary:
    """Greedy/inference policy over a dataset; schedules at their final values."""
    state = json.loads(Path(ckpt_path).read_text())
    cfg = ExperimentConfig(**state["config"])
    dataset = load_dataset(dataset_dir)
    if dataset.problem != cfg.problem:
        raise ConfigError([f"checkpoint problem {cfg.problem!r} does not match "
                           f"dataset problem {dataset.problem!r}"])
    if episodes_per_instance is None:
        episodes_per_instance = cfg.episodes_per_instance
    params = np.asarray(state["params"])
    if state.get("num_qubits") != dataset.size:
        raise ConfigError([
            f"checkpoint was trained on {state.get('num_qubits')}-variable instances "
            f"but the dataset holds {dataset.size}-variable ones"])
    probe = make_env(cfg, dataset, np.random.default_rng(0))
    probe_obs = probe.reset()
    if len(params) != build(AnsatzKind(cfg.ansatz), probe_obs.ising,
                            probe_obs.annotations, cfg.layers).param_count:
        raise ConfigError(["checkpoint parameter count does not match the dataset"])

    agent = _build_agent(cfg, dataset, state["seed_index"])
    agent.params = params
    if cfg.algorithm == "qpg" and state.get("scalings") is not None:
        agent.scalings = np.asarray(state["scalings"])
    heads = HeadProvider(cfg, dataset)
    templates = TemplateProvider(cfg)
    seed_index = state["seed_index"]

    rows = []
    for idx in range(len(dataset)):
        env = make_env(cfg, dataset, _rng(cfg, seed_index, 1000 + idx))
        values, valids, optima_hits, ratios = [], [], [], []
        for _ in range(episodes_per_instance):
            stats = _play_inference_episode(cfg, env, agent, heads, templates, idx,
                                            dataset)
            values.append(stats["value"])
            valids.append(stats["valid"])
            optima_hits.append(stats["optimal"])
            ratios.append(stats["ratio"])
        rows.append({
            "instance_id": idx,
            "episodes": episodes_per_instance,
            "p_optimal": float(np.mean(optima_hits)),
            "p_valid": float(np.mean(valids)),
            "mean_ratio": float(np.mean(ratios)),
            "mean_value": float(np.mean(values)),
            "seed": seed_index,
        })
    summary = EvalSummary(
        mean_p_optimal=float(np.mean([r["p_optimal"] for r in rows])),
        mean_p_valid=float(np.mean([r["p_valid"] for r in rows])),
        mean_ratio=float(np.mean([r["mean_ratio"] for r in rows])),
        rows=rows)
    if out_csv:
        with open(out_csv, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=EVAL_COLUMNS)
            writer.writeheader()
            writer.writerows(rows)
    return summary


def _play_inference_episode(cfg, env, agent, heads, templates, instance_index,
                            dataset) -> dict:
    obs = env.reset(instance_index) if cfg.problem != "ucp" else env.reset()
    ratios = []
    while not env.done:
        template = templates.for_observation(obs)
        head = heads.for_observation(obs)
        if cfg.algorithm == "qdqn":
            action = agent.greedy_action(template, head, obs.mask)
        else:
            action, _ = agent.act(template, head, obs.mask, cfg.total_steps)
        if cfg.problem == "ucp":
            powers, demand = env.powers.copy(), env.current_demand
        result = env.step(action)
        if cfg.problem == "ucp":
            best = ucp_optimal_reward(env.instance, powers, demand, env.lambda_eq)
            ratios.append(best / result.reward if result.reward < 0 else 1.0)
        obs = result.observation
    if cfg.problem == "ucp":
        return {"value": float(np.mean(ratios)), "valid": 1.0,
                "optimal": float(np.mean([r > 1 - 1e-9 for r in ratios])),
                "ratio": float(np.mean(ratios))}
    value = env.best_value() if cfg.problem == "maxcut" else env.episode_value()
    best = dataset.optima[instance_index]
    ratio = 1.0 if best <= 0 else value / best
    if cfg.problem == "knapsack":
        weight = float(np.dot(env.selected, env.instance.weights))
        valid = weight <= env.instance.capacity + 1e-9
    else:
        valid = True
    return {"value": value, "valid": float(valid),
            "optimal": float(np.isclose(value, best, rtol=0.0, atol=1e-9)),
            "ratio": ratio}


# ---------------------------------------------------------------------------
# QAOA experiment over a knapsack dataset

def run_qaoa_experiment(cfg: ExperimentConfig, dataset_dir, out_csv=None) -> list[dict]:
    """p-layer QAOA with restarts on every instance; returns metric rows."""
    dataset = load_dataset(dataset_dir)
    if dataset.problem != "knapsack":
        raise ConfigError(["the QAOA experiment runs on knapsack datasets"])
    qcfg = QaoaConfig(p=cfg.qaoa_p, max_iterations=cfg.qaoa_max_iterations,
                      optimizer=cfg.qaoa_optimizer,
                      learning_rate=cfg.qaoa_learning_rate, restarts=cfg.qaoa_restarts)
    rows = []
    for idx, inst in enumerate(dataset.instances):
        if cfg.encoding == "unbalanced":
            qubo = knapsack_qubo_unbalanced(inst, cfg.lambda1, cfg.lambda2)
        else:
            qubo = knapsack_qubo_slack(inst, penalty=float(sum(inst.values)) + 1.0)
        ham = qubo_to_ising(qubo)
        tpl = qaoa_template(ham, qcfg.p)
        for restart in range(qcfg.restarts):
            rng = np.random.default_rng([cfg.master_seed, idx, restart])
            result = qaoa_optimize(ham, qcfg, rng)
            state = run_circuit(tpl, np.concatenate([result.gammas, result.betas]))
            metrics = knapsack_state_metrics(state, inst)
            rows.append({
                "instance_id": idx,
                "encoding": cfg.encoding,
                "restart": restart,
                "p_optimal": metrics.p_optimal,
                "p_valid": metrics.p_valid,
                "final_energy": result.energy,
            })
    if out_csv:
        with open(out_csv, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=QAOA_COLUMNS)
            writer.writeheader()
            writer.writerows(rows)
    return rows
