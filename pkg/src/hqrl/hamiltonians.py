"""QUBO/Ising formulations of MaxCut, unit commitment and knapsack.

Binary variables x in {0,1} map to spins z in {-1,+1} through
x_i = (1 - z_i)/2, so spin +1 is the unset variable. All builders are pure
functions. Bitstrings follow the repo convention: character/bit i is
variable i.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

BRUTE_FORCE_LIMIT = 22


class CapacityError(ValueError):
    """Problem too large for exhaustive enumeration."""


@dataclass(frozen=True)
class WeightedGraph:
    num_nodes: int
    edges: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        seen = set()
        for i, j, w in self.edges:
            if i == j:
                raise ValueError("self-loops are not allowed")
            if not (0 <= i < j < self.num_nodes):
                raise ValueError("edges must have i < j within range")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge {(i, j)}")
            if not math.isfinite(w):
                raise ValueError("edge weights must be finite")
            seen.add((i, j))

    @classmethod
    def from_edges(cls, num_nodes, edges) -> "WeightedGraph":
        normalized = tuple(sorted((min(i, j), max(i, j), float(w)) for i, j, w in edges))
        return cls(num_nodes, normalized)


@dataclass
class QuboProblem:
    """value(x) = sum q_ij x_i x_j + sum l_i x_i + offset over x in {0,1}^n."""

    n: int
    quadratic: dict[tuple[int, int], float] = field(default_factory=dict)
    linear: dict[int, float] = field(default_factory=dict)
    offset: float = 0.0

    def __post_init__(self):
        for (i, j) in self.quadratic:
            if not (0 <= i < j < self.n):
                raise ValueError(f"bad quadratic index {(i, j)}")
        for i in self.linear:
            if not (0 <= i < self.n):
                raise ValueError(f"bad linear index {i}")

    def value(self, x) -> float:
        x = np.asarray(x)
        v = self.offset
        for i, c in self.linear.items():
            v += c * x[i]
        for (i, j), c in self.quadratic.items():
            v += c * x[i] * x[j]
        return float(v)

    def value_table(self) -> np.ndarray:
        """value(x) for every bitstring, indexed by the little-endian integer."""
        if self.n > BRUTE_FORCE_LIMIT:
            raise CapacityError(f"n={self.n} exceeds enumeration limit {BRUTE_FORCE_LIMIT}")
        idx = np.arange(1 << self.n, dtype=np.int64)
        vals = np.full(1 << self.n, self.offset, dtype=np.float64)
        bits = {}
        for i in set(self.linear) | {q for pair in self.quadratic for q in pair}:
            bits[i] = ((idx >> i) & 1).astype(np.float64)
        for i, c in self.linear.items():
            vals += c * bits[i]
        for (i, j), c in self.quadratic.items():
            vals += c * (bits[i] * bits[j])
        return vals


@dataclass
class IsingHamiltonian:
    """energy(z) = sum J_ij z_i z_j + sum h_i z_i + const over z in {-1,+1}^n."""

    n: int
    J: dict[tuple[int, int], float] = field(default_factory=dict)
    h: dict[int, float] = field(default_factory=dict)
    const: float = 0.0

    def __post_init__(self):
        for (i, j) in self.J:
            if not (0 <= i < j < self.n):
                raise ValueError(f"bad coupling index {(i, j)}")
        for i in self.h:
            if not (0 <= i < self.n):
                raise ValueError(f"bad field index {i}")

    def energy(self, z) -> float:
        z = np.asarray(z)
        e = self.const
        for (i, j), c in self.J.items():
            e += c * z[i] * z[j]
        for i, c in self.h.items():
            e += c * z[i]
        return float(e)

    def energy_of_bits(self, x) -> float:
        x = np.asarray(x)
        return self.energy(1 - 2 * x)

    def terms(self) -> list[tuple[str, int, int, float]]:
        """Deterministic term order: couplings sorted by (i, j), then fields by i."""
        out = [("zz", i, j, c) for (i, j), c in sorted(self.J.items())]
        out += [("z", i, -1, c) for i, c in sorted(self.h.items())]
        return out

    def max_abs_coefficient(self) -> float:
        vals = [abs(c) for c in self.J.values()] + [abs(c) for c in self.h.values()]
        return max(vals, default=0.0)


@dataclass(frozen=True)
class KnapsackInstance:
    values: tuple[float, ...]
    weights: tuple[float, ...]
    capacity: float

    def __post_init__(self):
        if len(self.values) != len(self.weights) or len(self.values) < 1:
            raise ValueError("values and weights must have equal, positive length")
        if any(v <= 0 for v in self.values) or any(w <= 0 for w in self.weights):
            raise ValueError("values and weights must be positive")
        if self.capacity < 0:
            raise ValueError("capacity must be nonnegative")

    @property
    def num_items(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class UcpInstance:
    """Per-generator cost coefficients and power bounds."""

    a: tuple[float, ...]
    b: tuple[float, ...]
    c: tuple[float, ...]
    p_min: tuple[float, ...]
    p_max: tuple[float, ...]

    def __post_init__(self):
        lens = {len(self.a), len(self.b), len(self.c), len(self.p_min), len(self.p_max)}
        if len(lens) != 1 or len(self.a) < 1:
            raise ValueError("all coefficient vectors must share a positive length")
        for lo, hi in zip(self.p_min, self.p_max):
            if not (0 < lo <= hi):
                raise ValueError("need 0 < p_min <= p_max per generator")
        if any(ci < 0 for ci in self.c):
            raise ValueError("quadratic cost coefficients must be nonnegative")

    @property
    def num_generators(self) -> int:
        return len(self.a)

    def unit_costs(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return np.asarray(self.a) + np.asarray(self.b) * p + np.asarray(self.c) * p ** 2


# ---------------------------------------------------------------------------
# builders

def maxcut_ising(g: WeightedGraph) -> IsingHamiltonian:
    """Couplings equal the edge weights; minimizing the energy maximizes the cut."""
    J = {(i, j): float(w) for i, j, w in g.edges}
    return IsingHamiltonian(n=g.num_nodes, J=J, h={}, const=0.0)


def cut_value(g: WeightedGraph, x) -> float:
    """Total weight of edges across the partition encoded by bits x."""
    x = np.asarray(x)
    return float(sum(w for i, j, w in g.edges if x[i] != x[j]))


def ucp_qubo(inst: UcpInstance, p, demand: float, lambda_eq: float) -> QuboProblem:
    """Unit costs plus a squared equality penalty on total dispatched power."""
    if demand < 0:
        raise ValueError("demand must be nonnegative")
    if lambda_eq <= 0:
        raise ValueError("lambda_eq must be positive")
    p = np.asarray(p, dtype=float)
    if p.shape != (inst.num_generators,):
        raise ValueError("power vector length mismatch")
    for pi, lo, hi in zip(p, inst.p_min, inst.p_max):
        if not (lo - 1e-9 <= pi <= hi + 1e-9):
            raise ValueError("sampled power outside generator bounds")
    costs = inst.unit_costs(p)
    n = inst.num_generators
    linear = {i: float(costs[i] + lambda_eq * (p[i] ** 2 - 2.0 * demand * p[i]))
              for i in range(n)}
    quadratic = {(i, j): float(2.0 * lambda_eq * p[i] * p[j])
                 for i in range(n) for j in range(i + 1, n)}
    return QuboProblem(n=n, quadratic=quadratic, linear=linear,
                       offset=float(lambda_eq * demand ** 2))


def default_lambda_eq(inst: UcpInstance) -> float:
    """Penalty weight making demand violations dominate the largest unit cost."""
    worst = max(inst.unit_costs(np.asarray(inst.p_max)))
    return float(2.0 * worst / min(inst.p_min))


def knapsack_qubo_unbalanced(inst: KnapsackInstance, lambda1: float,
                             lambda2: float) -> QuboProblem:
    """Inequality penalty via the quadratic expansion of an exponential decay.

    With margin h(x) = capacity - sum w_i x_i the value is
    -sum v_i x_i + lambda1*(1 - h) + (lambda2/2)*h^2, using no extra variables.
    """
    if lambda1 < 0 or lambda2 < 0:
        raise ValueError("penalty weights must be nonnegative")
    n = inst.num_items
    if n > MAX_UNBALANCED_ITEMS:
        raise CapacityError(f"{n} items exceeds limit {MAX_UNBALANCED_ITEMS}")
    w = np.asarray(inst.weights, dtype=float)
    m = float(inst.capacity)
    linear = {i: float(-inst.values[i] + lambda1 * w[i]
                       + 0.5 * lambda2 * (w[i] ** 2 - 2.0 * m * w[i]))
              for i in range(n)}
    quadratic = {(i, j): float(lambda2 * w[i] * w[j])
                 for i in range(n) for j in range(i + 1, n)}
    offset = float(lambda1 * (1.0 - m) + 0.5 * lambda2 * m ** 2)
    return QuboProblem(n=n, quadratic=quadratic, linear=linear, offset=offset)


MAX_UNBALANCED_ITEMS = 20


def slack_coefficients(capacity: float) -> list[int]:
    """Binary slack weights: powers of two with the last one clamped so the
    representable slack range is exactly 0..capacity."""
    m = int(capacity)
    if m <= 0:
        return []
    k = math.ceil(math.log2(m + 1))
    coeffs = [1 << t for t in range(k - 1)]
    coeffs.append(m - ((1 << (k - 1)) - 1))
    return coeffs


def knapsack_qubo_slack(inst: KnapsackInstance, penalty: float) -> QuboProblem:
    """Equality reformulation with ceil(log2(M+1)) binary slack variables.

    Variables 0..N-1 are the items, the remaining ones the slack bits.
    capacity 0 degenerates to the equality sum w_i x_i = 0.
    """
    if penalty <= 0:
        raise ValueError("penalty must be positive")
    n = inst.num_items
    coeffs = slack_coefficients(inst.capacity)
    k = len(coeffs)
    # combined weight vector for items then slack bits, equality target = capacity
    wall = list(inst.weights) + coeffs
    m = float(inst.capacity)
    total = n + k
    linear = {}
    for i in range(total):
        li = penalty * (wall[i] ** 2 - 2.0 * m * wall[i])
        if i < n:
            li -= inst.values[i]
        linear[i] = float(li)
    quadratic = {(i, j): float(2.0 * penalty * wall[i] * wall[j])
                 for i in range(total) for j in range(i + 1, total)}
    return QuboProblem(n=total, quadratic=quadratic, linear=linear,
                       offset=float(penalty * m ** 2))


def qubo_to_ising(q: QuboProblem) -> IsingHamiltonian:
    """Substitute x_i = (1 - z_i)/2; exact for every bitstring."""
    J: dict[tuple[int, int], float] = {}
    h: dict[int, float] = {i: 0.0 for i in range(q.n)}
    const = q.offset
    for i, c in q.linear.items():
        h[i] -= c / 2.0
        const += c / 2.0
    for (i, j), c in q.quadratic.items():
        J[(i, j)] = J.get((i, j), 0.0) + c / 4.0
        h[i] -= c / 4.0
        h[j] -= c / 4.0
        const += c / 4.0
    h = {i: v for i, v in h.items() if v != 0.0}
    J = {k: v for k, v in J.items() if v != 0.0}
    return IsingHamiltonian(n=q.n, J=J, h=h, const=float(const))


def brute_force(q: QuboProblem) -> tuple[np.ndarray, float]:
    """Exact argmin over {0,1}^n; ties go to the lexicographically smallest bitstring."""
    if q.n > BRUTE_FORCE_LIMIT:
        raise CapacityError(f"n={q.n} exceeds enumeration limit {BRUTE_FORCE_LIMIT}")
    vals = q.value_table()
    best = vals.min()
    ties = np.nonzero(vals <= best + 0.0)[0]
    if len(ties) > 1:
        # bitstring lexicographic order = integer order of the bit-reversed index
        keys = [sum(((int(t) >> i) & 1) << (q.n - 1 - i) for i in range(q.n)) for t in ties]
        winner = int(ties[int(np.argmin(keys))])
    else:
        winner = int(ties[0])
    bits = np.array([(winner >> i) & 1 for i in range(q.n)], dtype=np.int8)
    return bits, float(best)


@dataclass(frozen=True)
class ProblemEvaluation:
    value: float
    is_valid: bool
    residual: float = 0.0


def evaluate_maxcut(g: WeightedGraph, x) -> ProblemEvaluation:
    return ProblemEvaluation(value=cut_value(g, x), is_valid=True)


def evaluate_knapsack(inst: KnapsackInstance, x) -> ProblemEvaluation:
    x = np.asarray(x)
    if len(x) < inst.num_items:
        raise ValueError("bit vector shorter than the item count")
    sel = x[: inst.num_items]
    weight = float(np.dot(sel, inst.weights))
    value = float(np.dot(sel, inst.values))
    return ProblemEvaluation(value=value, is_valid=weight <= inst.capacity + 1e-9,
                             residual=max(0.0, weight - inst.capacity))


def evaluate_ucp(inst: UcpInstance, p, demand: float, x) -> ProblemEvaluation:
    """Bare generation cost of the committed units plus the demand residual."""
    x = np.asarray(x)
    if x.shape != (inst.num_generators,):
        raise ValueError("bit vector length mismatch")
    cost = float(np.dot(inst.unit_costs(p), x))
    residual = float(np.dot(np.asarray(p, dtype=float), x) - demand)
    return ProblemEvaluation(value=cost, is_valid=abs(residual) <= 1e-6 * max(1.0, demand),
                             residual=residual)


def evaluate_problem(kind: str, instance, x) -> ProblemEvaluation:
    """Original problem objective (never the penalized QUBO) plus validity.

    For UCP, instance is a (UcpInstance, powers, demand) triple because the
    objective depends on the sampled dispatch scenario.
    """
    if kind == "maxcut":
        return evaluate_maxcut(instance, x)
    if kind == "knapsack":
        return evaluate_knapsack(instance, x)
    if kind == "ucp":
        inst, p, demand = instance
        return evaluate_ucp(inst, p, demand, x)
    raise ValueError(f"unknown problem kind {kind!r}")


def knapsack_optimum(inst: KnapsackInstance) -> tuple[float, np.ndarray]:
    """Exhaustive optimum of the original knapsack problem."""
    n = inst.num_items
    if n > BRUTE_FORCE_LIMIT:
        raise CapacityError(f"{n} items exceeds enumeration limit")
    idx = np.arange(1 << n, dtype=np.int64)
    w = np.zeros(1 << n)
    v = np.zeros(1 << n)
    for i in range(n):
        bit = ((idx >> i) & 1).astype(np.float64)
        w += inst.weights[i] * bit
        v += inst.values[i] * bit
    v[w > inst.capacity + 1e-9] = -np.inf
    winner = int(np.argmax(v))
    bits = np.array([(winner >> i) & 1 for i in range(n)], dtype=np.int8)
    return float(v[winner]), bits


def maxcut_optimum(g: WeightedGraph) -> float:
    if g.num_nodes > BRUTE_FORCE_LIMIT:
        raise CapacityError("graph too large for enumeration")
    qubo_vals = maxcut_value_table(g)
    return float(qubo_vals.max())


def maxcut_value_table(g: WeightedGraph) -> np.ndarray:
    idx = np.arange(1 << g.num_nodes, dtype=np.int64)
    cuts = np.zeros(1 << g.num_nodes)
    for i, j, w in g.edges:
        differ = (((idx >> i) ^ (idx >> j)) & 1).astype(np.float64)
        cuts += w * differ
    return cuts


def ucp_optimal_reward(inst: UcpInstance, p, demand: float, lambda_eq: float) -> float:
    """Best achievable step reward -(cost + lambda_eq * residual^2) by enumeration."""
    n = inst.num_generators
    if n > BRUTE_FORCE_LIMIT:
        raise CapacityError("too many generators for enumeration")
    costs = inst.unit_costs(p)
    idx = np.arange(1 << n, dtype=np.int64)
    total_cost = np.zeros(1 << n)
    total_power = np.zeros(1 << n)
    for i in range(n):
        bit = ((idx >> i) & 1).astype(np.float64)
        total_cost += costs[i] * bit
        total_power += p[i] * bit
    rewards = -(total_cost + lambda_eq * (total_power - demand) ** 2)
    return float(rewards.max())


# ---------------------------------------------------------------------------
# instance (de)serialization

def graph_to_json(g: WeightedGraph) -> str:
    return json.dumps({"n": g.num_nodes, "edges": [[i, j, w] for i, j, w in g.edges]})


def graph_from_json(text: str) -> WeightedGraph:
    data = json.loads(text)
    return WeightedGraph.from_edges(data["n"], [tuple(e) for e in data["edges"]])


def knapsack_to_json(inst: KnapsackInstance) -> str:
    return json.dumps({"values": list(inst.values), "weights": list(inst.weights),
                       "capacity": inst.capacity})


def knapsack_from_json(text: str) -> KnapsackInstance:
    data = json.loads(text)
    return KnapsackInstance(values=tuple(data["values"]), weights=tuple(data["weights"]),
                            capacity=data["capacity"])


UCP_CSV_COLUMNS = ["A", "B", "C", "p_min", "p_max"]


def ucp_to_csv(inst: UcpInstance) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(UCP_CSV_COLUMNS)
    for row in zip(inst.a, inst.b, inst.c, inst.p_min, inst.p_max):
        writer.writerow([repr(v) for v in row])
    return buf.getvalue()


def ucp_from_csv(text: str) -> UcpInstance:
    reader = csv.DictReader(io.StringIO(text))
    cols = {name: [] for name in UCP_CSV_COLUMNS}
    for row in reader:
        for name in UCP_CSV_COLUMNS:
            cols[name].append(float(row[name]))
    return UcpInstance(a=tuple(cols["A"]), b=tuple(cols["B"]), c=tuple(cols["C"]),
                       p_min=tuple(cols["p_min"]), p_max=tuple(cols["p_max"]))
