"""Hamiltonian-based quantum reinforcement learning toolkit.

Circuit templates are built from a problem's QUBO/Ising formulation and
trained as QPG/QDQN function approximators on MaxCut, unit commitment and
knapsack environments, with a QAOA baseline and a gradient-variance
trainability benchmark. Everything runs on an exact statevector simulator
with reverse-sweep gradients.
"""

from .ansatz import AnsatzKind, build, normalize_coefficients, param_count
from .hamiltonians import (
    IsingHamiltonian,
    KnapsackInstance,
    QuboProblem,
    UcpInstance,
    WeightedGraph,
    brute_force,
    evaluate_problem,
    knapsack_qubo_slack,
    knapsack_qubo_unbalanced,
    maxcut_ising,
    qubo_to_ising,
    ucp_qubo,
)
from .statesim import (
    CircuitTemplate,
    GateOp,
    Observable,
    StateVector,
    apply_gate,
    expectation,
    gradient,
    init_plus_state,
    run_circuit,
    sample_bitstrings,
)

__all__ = [
    "AnsatzKind", "build", "normalize_coefficients", "param_count",
    "IsingHamiltonian", "KnapsackInstance", "QuboProblem", "UcpInstance",
    "WeightedGraph", "brute_force", "evaluate_problem", "knapsack_qubo_slack",
    "knapsack_qubo_unbalanced", "maxcut_ising", "qubo_to_ising", "ucp_qubo",
    "CircuitTemplate", "GateOp", "Observable", "StateVector", "apply_gate",
    "expectation", "gradient", "init_plus_state", "run_circuit",
    "sample_bitstrings",
]

__version__ = "0.1.0"
