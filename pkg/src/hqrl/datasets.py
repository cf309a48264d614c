"""Dataset generation, manifests, and loading.

A dataset is a directory of numbered instance files plus a manifest.json
listing the problem, count, size, seed and per-instance optima (where the
problem has a static optimum). Instance i is generated from its own RNG
stream derived from (seed, i), so regeneration with the same seed is
byte-identical regardless of count.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .hamiltonians import (
    KnapsackInstance,
    UcpInstance,
    WeightedGraph,
    graph_from_json,
    graph_to_json,
    knapsack_from_json,
    knapsack_optimum,
    knapsack_to_json,
    maxcut_optimum,
    ucp_from_csv,
    ucp_to_csv,
)

PROBLEMS = ("maxcut", "ucp", "knapsack")
MANIFEST_NAME = "manifest.json"


def make_maxcut_instance(size: int, rng: np.random.Generator) -> WeightedGraph:
    """Complete graph with edge weights uniform in (0, 1]."""
    edges = [(i, j, float(1.0 - rng.random()))
             for i in range(size) for j in range(i + 1, size)]
    return WeightedGraph.from_edges(size, edges)


def make_knapsack_instance(size: int, rng: np.random.Generator) -> KnapsackInstance:
    """Integer values/weights uniform in [1, 10]; capacity 0.6 of total weight."""
    values = tuple(float(v) for v in rng.integers(1, 11, size))
    weights = tuple(float(w) for w in rng.integers(1, 11, size))
    return KnapsackInstance(values=values, weights=weights,
                            capacity=float(round(0.6 * sum(weights))))


def make_ucp_instance(size: int, rng: np.random.Generator) -> UcpInstance:
    """Synthetic generator table with uniform cost and power-bound draws."""
    a = tuple(float(x) for x in rng.uniform(0, 100, size))
    b = tuple(float(x) for x in rng.uniform(0, 10, size))
    c = tuple(float(x) for x in rng.uniform(0, 0.1, size))
    p_min = tuple(float(x) for x in rng.uniform(10, 50, size))
    p_max = tuple(float(rng.uniform(lo, 200)) for lo in p_min)
    return UcpInstance(a=a, b=b, c=c, p_min=p_min, p_max=p_max)


def gen_data(problem: str, count: int, size: int, seed: int, out_dir) -> dict:
    """Write count instance files plus a manifest; returns the manifest."""
    if problem not in PROBLEMS:
        raise ValueError(f"unknown problem {problem!r}")
    if count < 1:
        raise ValueError("count must be >= 1")
    if size < 1:
        raise ValueError("size must be >= 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = []
    optima: list | None = []
    for i in range(count):
        rng = np.random.default_rng([seed, i])
        if problem == "maxcut":
            inst = make_maxcut_instance(size, rng)
            text = graph_to_json(inst)
            name = f"instance_{i:04d}.json"
            optima.append(maxcut_optimum(inst))
        elif problem == "knapsack":
            inst = make_knapsack_instance(size, rng)
            text = knapsack_to_json(inst)
            name = f"instance_{i:04d}.json"
            optima.append(knapsack_optimum(inst)[0])
        else:
            inst = make_ucp_instance(size, rng)
            text = ucp_to_csv(inst)
            name = f"instance_{i:04d}.csv"
            optima = None
        (out / name).write_text(text)
        names.append(name)
    manifest = {
        "problem": problem,
        "count": count,
        "size": size,
        "seed": seed,
        "instances": names,
        "optima": optima,
    }
    (out / MANIFEST_NAME).write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return manifest


class Dataset:
    """Loaded dataset directory: instances plus cached optima."""

    def __init__(self, problem: str, size: int, instances: list, optima: list | None,
                 manifest: dict, path: Path):
        self.problem = problem
        self.size = size
        self.instances = instances
        self.optima = optima
        self.manifest = manifest
        self.path = path

    def __len__(self) -> int:
        return len(self.instances)


def load_dataset(path) -> Dataset:
    path = Path(path)
    manifest = json.loads((path / MANIFEST_NAME).read_text())
    problem = manifest["problem"]
    instances = []
    for name in manifest["instances"]:
        text = (path / name).read_text()
        if problem == "maxcut":
            instances.append(graph_from_json(text))
        elif problem == "knapsack":
            instances.append(knapsack_from_json(text))
        else:
            instances.append(ucp_from_csv(text))
    return Dataset(problem=problem, size=manifest["size"], instances=instances,
                   optima=manifest.get("optima"), manifest=manifest, path=path)
