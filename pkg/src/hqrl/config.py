"""Layered experiment configuration: defaults < JSON file < flag overrides.

The resolved configuration is hashed (sha256 of its canonical JSON) and the
hash is stored next to every output so runs can be matched to their exact
settings; output directories refuse rows from a different hash.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

PROBLEMS = ("maxcut", "ucp", "knapsack")
ALGORITHMS = ("qpg", "qdqn", "qaoa", "brute_force")
ANSATZE = ("sge_sgv", "mge_sgv", "mge_mgv", "sge_sgv_hea", "encoding_hea")
HEADS = ("node_x", "edge_zz", "item_z", "bernoulli_z")
ENCODINGS = ("unbalanced", "slack")
SCALING_MODES = ("none", "shared_schedule", "trainable")


class ConfigError(ValueError):
    """Invalid configuration; carries every violation at once."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


@dataclass
class ExperimentConfig:
    problem: str = "maxcut"
    algorithm: str = "qdqn"
    ansatz: str = "sge_sgv"
    head: str = ""            # resolved per problem when empty
    layers: int = 5
    total_steps: int = 50_000
    seeds: int = 5
    master_seed: int = 0
    dataset: str = ""
    val_dataset: str = ""
    out: str = "runs/latest"

    gamma: float = 0.99
    lr_params: float = 1e-2
    lr_scalings: float = 1e-1
    replay_capacity: int = 10_000
    batch_size: int = 32
    target_sync: int = 100
    update_every: int = 1
    episodes_per_update: int = 1

    epsilon_start: float = 1.0
    epsilon_end: float = 0.01
    epsilon_end_step: int = 10_000

    temperature_start: float = 1.0
    temperature_end: float = 1.0
    temperature_end_step: int = 1

    scaling_mode: str = "none"
    scaling_start: float = 1.0
    scaling_end: float = 25.0
    scaling_end_step: int = 1

    baseline: bool = True
    baseline_decay: float = 0.99

    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda_eq: float = 0.0    # 0 means: derive from the instance
    encoding: str = "unbalanced"
    knapsack_soft_constraint: bool = False
    bernoulli_born: bool = False

    qaoa_p: int = 3
    qaoa_max_iterations: int = 100
    qaoa_optimizer: str = "adam"
    qaoa_learning_rate: float = 0.05
    qaoa_restarts: int = 5

    flush_every: int = 100
    checkpoint_every: int = 5000
    episodes_per_instance: int = 100
    dump_traces: bool = False

    def as_dict(self) -> dict:
        return asdict(self)


# problem/algorithm-specific defaults applied on top of the dataclass defaults
_PROBLEM_DEFAULTS = {
    ("maxcut", "qdqn"): {"head": "node_x", "total_steps": 50_000, "seeds": 5,
                         "gamma": 0.99},
    ("maxcut", "qpg"): {"head": "node_x", "total_steps": 50_000, "seeds": 5,
                        "gamma": 0.99, "temperature_start": 1.0, "temperature_end": 10.0,
                        "temperature_end_step": 25_000},
    ("knapsack", "qpg"): {"head": "item_z", "total_steps": 200_000, "seeds": 10,
                          "gamma": 0.99, "scaling_mode": "shared_schedule",
                          "scaling_start": 1.0, "scaling_end": 25.0,
                          "scaling_end_step": 200_000},
    ("knapsack", "qdqn"): {"head": "item_z", "total_steps": 200_000, "seeds": 10},
    ("ucp", "qpg"): {"head": "bernoulli_z", "total_steps": 150_000, "seeds": 5,
                     "gamma": 0.0, "scaling_mode": "trainable",
                     "episodes_per_update": 10},
    ("maxcut", "qaoa"): {}, ("knapsack", "qaoa"): {}, ("ucp", "qaoa"): {},
    ("maxcut", "brute_force"): {}, ("knapsack", "brute_force"): {},
    ("ucp", "brute_force"): {},
}


def resolve_config(file_path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Layer built-in defaults, an optional JSON file, and explicit overrides."""
    layered: dict = {}
    if file_path:
        text = Path(file_path).read_text()
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ConfigError(["config file must contain a JSON object"])
        layered.update(data)
    if overrides:
        layered.update({k: v for k, v in overrides.items() if v is not None})

    # problem defaults sit between dataclass defaults and user-specified values
    base = ExperimentConfig()
    problem = layered.get("problem", base.problem)
    algorithm = layered.get("algorithm", base.algorithm)
    merged = dict(_PROBLEM_DEFAULTS.get((problem, algorithm), {}))
    merged.update(layered)

    known = {f.name for f in fields(ExperimentConfig)}
    errors = [f"unknown config key {k!r}" for k in merged if k not in known]
    if errors:
        raise ConfigError(errors)
    cfg = ExperimentConfig(**merged)
    if not cfg.head:
        cfg.head = {"maxcut": "node_x", "knapsack": "item_z", "ucp": "bernoulli_z"}[
            cfg.problem] if cfg.problem in PROBLEMS else ""
    validate_config(cfg)
    return cfg


def validate_config(cfg: ExperimentConfig) -> None:
    """Collect and raise every violation at once."""
    errors = []
    if cfg.problem not in PROBLEMS:
        errors.append(f"problem must be one of {PROBLEMS}, got {cfg.problem!r}")
    if cfg.algorithm not in ALGORITHMS:
        errors.append(f"algorithm must be one of {ALGORITHMS}, got {cfg.algorithm!r}")
    if cfg.ansatz not in ANSATZE:
        errors.append(f"ansatz must be one of {ANSATZE}, got {cfg.ansatz!r}")
    if cfg.head and cfg.head not in HEADS:
        errors.append(f"head must be one of {HEADS}, got {cfg.head!r}")
    if cfg.encoding not in ENCODINGS:
        errors.append(f"encoding must be one of {ENCODINGS}, got {cfg.encoding!r}")
    if cfg.scaling_mode not in SCALING_MODES:
        errors.append(f"scaling_mode must be one of {SCALING_MODES}")
    if cfg.layers < 1:
        errors.append("layers must be >= 1")
    if cfg.total_steps < 1:
        errors.append("total_steps must be >= 1")
    if cfg.seeds < 1:
        errors.append("seeds must be >= 1")
    if not (0.0 <= cfg.gamma <= 1.0):
        errors.append("gamma must lie in [0, 1]")
    if cfg.lr_params <= 0 or cfg.lr_scalings <= 0:
        errors.append("learning rates must be positive")
    if cfg.batch_size < 1 or cfg.replay_capacity < cfg.batch_size:
        errors.append("replay capacity must be >= batch size >= 1")
    if cfg.lambda1 < 0 or cfg.lambda2 < 0:
        errors.append("penalty weights must be nonnegative")
    if cfg.algorithm in ("qpg", "qdqn") and not cfg.dataset and cfg.problem != "ucp":
        errors.append("training needs a dataset directory")
    if cfg.problem == "ucp" and cfg.algorithm == "qdqn":
        errors.append("ucp uses vector actions; only qpg supports it")
    if cfg.qaoa_p < 1 or cfg.qaoa_max_iterations < 1 or cfg.qaoa_restarts < 1:
        errors.append("qaoa settings must be positive")
    if cfg.flush_every < 1:
        errors.append("flush_every must be >= 1")
    if errors:
        raise ConfigError(errors)


# keys that do not change the dynamics of a run: output location, how long
# the run is allowed to continue, and side-channel dumps
_HASH_EXCLUDED = ("out", "total_steps", "dump_traces")


def config_hash(cfg: ExperimentConfig) -> str:
    payload = {k: v for k, v in cfg.as_dict().items() if k not in _HASH_EXCLUDED}
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]
