"""Standard p-layer QAOA over an Ising cost Hamiltonian.

Angle convention carries a factor 2 inside the gate angles so that
(gamma, beta) parameterize exp(-i*gamma*H_C) and exp(-i*beta*sum X)
exactly. Optimization minimizes <H> with Adam (via the simulator's exact
gradients) or Nelder-Mead; both honor an iteration cap and report the
best parameters seen.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .hamiltonians import (
    IsingHamiltonian,
    KnapsackInstance,
    WeightedGraph,
    knapsack_optimum,
    maxcut_value_table,
    slack_coefficients,
)
from .statesim import (
    CircuitTemplate,
    StateVector,
    TemplateBuilder,
    expectation,
    gradient,
    ising_observable,
    run_circuit,
)


@dataclass(frozen=True)
class QaoaConfig:
    p: int = 3
    max_iterations: int = 100
    optimizer: str = "adam"
    learning_rate: float = 0.05
    restarts: int = 5
    init_scale: float = np.pi / 4

    def __post_init__(self):
        if self.p < 1 or self.max_iterations < 1:
            raise ValueError("p and max_iterations must be >= 1")
        if self.optimizer not in ("adam", "nelder_mead"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


def qaoa_template(ham: IsingHamiltonian, p: int) -> CircuitTemplate:
    """Template with parameters [gamma_1..gamma_p, beta_1..beta_p]."""
    b = TemplateBuilder(ham.n)
    couplings = sorted(ham.J.items())
    fields = sorted(ham.h.items())
    for layer in range(p):
        b.begin_layer()
        gamma = b.new_param()
        for (i, j), coeff in couplings:
            b.add("rzz", (i, j), param=gamma, scale=2.0 * coeff)
        for i, coeff in fields:
            b.add("rz", (i,), param=gamma, scale=2.0 * coeff)
        beta = b.new_param()
        for q in range(ham.n):
            b.add("rx", (q,), param=beta, scale=2.0)
    tpl = b.build()
    # reorder parameters as all gammas then all betas
    perm = np.empty(tpl.param_count, dtype=np.int32)
    for layer in range(p):
        perm[2 * layer] = layer
        perm[2 * layer + 1] = p + layer
    remapped = perm[tpl.param]
    remapped[tpl.param < 0] = -1
    tpl.param = remapped
    tpl.layer_params = [[layer, p + layer] for layer in range(p)]
    return tpl


def qaoa_circuit(ham: IsingHamiltonian, gammas, betas) -> StateVector:
    gammas = np.atleast_1d(np.asarray(gammas, dtype=float))
    betas = np.atleast_1d(np.asarray(betas, dtype=float))
    if gammas.shape != betas.shape:
        raise ValueError("gamma and beta vectors must have equal length")
    tpl = qaoa_template(ham, len(gammas))
    return run_circuit(tpl, np.concatenate([gammas, betas]))


def qaoa_energy(ham: IsingHamiltonian, gammas, betas) -> float:
    return expectation(qaoa_circuit(ham, gammas, betas), ising_observable(ham))


@dataclass
class QaoaResult:
    gammas: np.ndarray
    betas: np.ndarray
    energy: float
    trace: list[float] = field(default_factory=list)


def qaoa_optimize(ham: IsingHamiltonian, cfg: QaoaConfig,
                  rng: np.random.Generator) -> QaoaResult:
    """Minimize <H>; returns the best angles seen plus the iteration trace."""
    tpl = qaoa_template(ham, cfg.p)
    obs = ising_observable(ham)
    x0 = rng.uniform(-cfg.init_scale, cfg.init_scale, 2 * cfg.p)

    def energy_at(x):
        return expectation(run_circuit(tpl, x), obs)

    if cfg.optimizer == "adam":
        from .agents import AdamState, adam_step

        adam = AdamState(lr=cfg.learning_rate)
        x = x0.copy()
        trace = []
        best_x, best_e = x.copy(), np.inf
        for _ in range(cfg.max_iterations):
            e = energy_at(x)
            trace.append(e)
            if e < best_e:
                best_e, best_x = e, x.copy()
            g = gradient(tpl, x, obs)
            if np.linalg.norm(g) < 1e-8:
                break
            x = adam_step(adam, x, g)
        return QaoaResult(gammas=best_x[: cfg.p], betas=best_x[cfg.p:],
                          energy=float(best_e), trace=trace)

    # Nelder-Mead with best-so-far bookkeeping per iteration
    trace: list[float] = []
    best = {"x": x0.copy(), "e": energy_at(x0)}

    def objective(x):
        e = energy_at(x)
        if e < best["e"]:
            best["e"], best["x"] = e, x.copy()
        return e

    def record(_xk):
        trace.append(best["e"])

    minimize(objective, x0, method="Nelder-Mead", callback=record,
             options={"maxiter": cfg.max_iterations, "xatol": 1e-10, "fatol": 1e-12})
    trace = trace[: cfg.max_iterations]
    x = best["x"]
    return QaoaResult(gammas=x[: cfg.p], betas=x[cfg.p:], energy=float(best["e"]),
                      trace=trace)


@dataclass(frozen=True)
class QaoaMetrics:
    p_optimal: float
    p_valid: float


def knapsack_state_metrics(state: StateVector, inst: KnapsackInstance) -> QaoaMetrics:
    """Probability mass on optimal / constraint-satisfying measurement outcomes.

    Each encoding is judged against its own constraint formulation: without
    slack bits an outcome is valid when the selection weight stays within
    capacity; with slack bits (equality reformulation) an outcome is valid
    when the sampled slack completes the weight to exactly the capacity,
    since any other slack assignment breaks the encoded constraint.
    p_optimal counts valid outcomes whose decoded selection attains the
    exact optimum, so p_optimal <= p_valid always.
    """
    n_items = inst.num_items
    extra = state.num_qubits - n_items
    if extra < 0:
        raise ValueError("state has fewer qubits than the instance has items")
    probs = state.probabilities()
    idx_items = np.arange(1 << n_items, dtype=np.int64)
    weight = np.zeros(1 << n_items)
    value = np.zeros(1 << n_items)
    for i in range(n_items):
        bit = ((idx_items >> i) & 1).astype(np.float64)
        weight += inst.weights[i] * bit
        value += inst.values[i] * bit
    best, _ = knapsack_optimum(inst)
    within_capacity = weight <= inst.capacity + 1e-9
    is_best = np.isclose(value, best, rtol=0.0, atol=1e-9)
    if extra == 0:
        valid = within_capacity
        optimal = within_capacity & is_best
        return QaoaMetrics(p_optimal=float(probs[optimal].sum()),
                           p_valid=float(probs[valid].sum()))
    coeffs = slack_coefficients(inst.capacity)
    if len(coeffs) != extra:
        raise ValueError("state qubit count does not match the slack register")
    idx_slack = np.arange(1 << extra, dtype=np.int64)
    slack_total = np.zeros(1 << extra)
    for k, c in enumerate(coeffs):
        slack_total += c * ((idx_slack >> k) & 1).astype(np.float64)
    # full index = slack * 2^n_items + items (little-endian, items first)
    equality = np.isclose(slack_total[:, None] + weight[None, :],
                          inst.capacity, rtol=0.0, atol=1e-9)
    grid = probs.reshape(1 << extra, 1 << n_items)
    p_valid = float(grid[equality].sum())
    p_optimal = float(grid[equality & is_best[None, :]].sum())
    return QaoaMetrics(p_optimal=p_optimal, p_valid=p_valid)


def maxcut_state_metrics(state: StateVector, g: WeightedGraph) -> QaoaMetrics:
    cuts = maxcut_value_table(g)
    probs = state.probabilities()
    optimal = np.isclose(cuts, cuts.max(), rtol=0.0, atol=1e-9)
    return QaoaMetrics(p_optimal=float(probs[optimal].sum()), p_valid=1.0)


def qaoa_metrics(ham: IsingHamiltonian, state: StateVector, problem) -> QaoaMetrics:
    """Optimality and validity probability of a state for the original problem."""
    del ham  # the metrics depend only on the original problem, not the encoding
    if isinstance(problem, KnapsackInstance):
        return knapsack_state_metrics(state, problem)
    if isinstance(problem, WeightedGraph):
        return maxcut_state_metrics(state, problem)
    raise TypeError(f"unsupported problem type {type(problem).__name__}")
