"""Gradient-variance benchmark: cost-gradient variance versus qubit count.

Each sample draws a complete-graph encoding Hamiltonian with couplings and
linear fields uniform in (0, 1] (max-abs normalized, like the problem
instances the agents train on) together with a parameter vector uniform in
[-pi, pi]. The probed quantity is the partial derivative of a fixed local
cost term, the Z0*Z1 coupling expectation, with respect to the middle
layer's second parameter block (see ansatz.bench_parameter_slot). Each
sample owns a counter-derived RNG stream, so results do not depend on how
samples are split across workers.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .ansatz import AnsatzKind, bench_parameter_slot, build, normalize_coefficients
from .hamiltonians import IsingHamiltonian
from .statesim import Observable, ObservablePlan, gradient_many, stack_templates

BENCH_LAYERS = 5
BENCH_SAMPLES = 1000


@dataclass(frozen=True)
class VarianceResult:
    kind: str
    n: int
    layers: int
    samples: int
    variance: float
    std_error: float
    seed: int


def bench_instance(n: int, rng: np.random.Generator) -> IsingHamiltonian:
    """Complete graph with couplings and fields uniform in (0, 1], normalized."""
    J = {(i, j): float(1.0 - rng.random()) for i in range(n) for j in range(i + 1, n)}
    h = {i: float(1.0 - rng.random()) for i in range(n)}
    return normalize_coefficients(IsingHamiltonian(n=n, J=J, h=h))


def bench_cost_observable(n: int) -> Observable:
    """Local probe: the first coupling term of the encoding Hamiltonian."""
    if n < 2:
        raise ValueError("benchmark needs at least two qubits")
    return Observable.zz(0, 1)


def bench_sample(kind: AnsatzKind, n: int, layers: int, seed: int, index: int):
    """Instance Hamiltonian, template and parameter vector of one sample."""
    rng = np.random.default_rng([seed, index])
    ham = bench_instance(n, rng)
    template = build(kind, ham, None, layers)
    params = rng.uniform(-math.pi, math.pi, template.param_count)
    return ham, template, params


def variance_std_error(values: np.ndarray) -> float:
    """Standard error of the sample variance without a normality assumption."""
    m = len(values)
    if m < 2:
        raise ValueError("need at least two samples")
    centered = values - values.mean()
    m2 = float(np.mean(centered ** 2))
    m4 = float(np.mean(centered ** 4))
    var_of_var = (m4 - m2 ** 2 * (m - 3) / (m - 1)) / m
    return math.sqrt(max(var_of_var, 0.0))


def gradient_variance(kind: AnsatzKind, n: int, layers: int = BENCH_LAYERS,
                      samples: int = BENCH_SAMPLES, seed: int = 0,
                      chunk: int = 200) -> VarianceResult:
    """Sample variance of the designated partial derivative of the local cost."""
    if samples < 2:
        raise ValueError("samples must be >= 2")
    kind = AnsatzKind(kind)
    plan, coeffs = ObservablePlan.from_observable(n, bench_cost_observable(n))
    templates = []
    rows = []
    slot = None
    for i in range(samples):
        ham, template, params = bench_sample(kind, n, layers, seed, i)
        if slot is None:
            slot = bench_parameter_slot(kind, ham, layers)
        templates.append(template)
        rows.append(params)
    params_matrix = np.asarray(rows)
    grads = np.empty(samples)
    for start in range(0, samples, chunk):
        stop = min(start + chunk, samples)
        stack = stack_templates(templates[start:stop])
        grads[start:stop] = gradient_many(stack, params_matrix[start:stop],
                                          plan, coeffs)[:, slot]
    return VarianceResult(
        kind=kind.value, n=n, layers=layers, samples=samples,
        variance=float(np.var(grads, ddof=1)), std_error=variance_std_error(grads),
        seed=seed)


def decay_fit(ns: Sequence[int], variances: Sequence[float]) -> tuple[float, float]:
    """Least-squares (slope, intercept) of ln(variance) against n."""
    ns = np.asarray(ns, dtype=float)
    variances = np.asarray(variances, dtype=float)
    if len(ns) < 3:
        raise ValueError("need at least three points")
    if np.any(variances <= 0):
        raise ValueError("variances must be positive for a log fit")
    slope, intercept = np.polyfit(ns, np.log(variances), 1)
    return float(slope), float(intercept)


def run_variance_bench(kinds: Iterable[AnsatzKind], n_values: Sequence[int],
                       layers: int = BENCH_LAYERS, samples: int = BENCH_SAMPLES,
                       seed: int = 0) -> list[VarianceResult]:
    results = []
    for kind in kinds:
        for n in n_values:
            results.append(gradient_variance(kind, n, layers, samples, seed))
    return results


VARIANCE_CSV_COLUMNS = ["kind", "n", "L", "samples", "variance", "std_error", "seed"]


def write_variance_csv(path, results: Iterable[VarianceResult]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(VARIANCE_CSV_COLUMNS)
        for r in results:
            writer.writerow([r.kind, r.n, r.layers, r.samples,
                             repr(r.variance), repr(r.std_error), r.seed])


def read_variance_csv(path) -> list[VarianceResult]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(VarianceResult(
                kind=row["kind"], n=int(row["n"]), layers=int(row["L"]),
                samples=int(row["samples"]), variance=float(row["variance"]),
                std_error=float(row["std_error"]), seed=int(row["seed"])))
    return out
