"""Simulator unit tests against dense-matrix and finite-difference oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hqrl.statesim import (
    CapacityError,
    GateOp,
    Observable,
    ObservablePlan,
    TemplateBuilder,
    apply_gate,
    expectation,
    gradient,
    gradient_many,
    init_plus_state,
    run_circuit,
    run_many,
    sample_bitstrings,
    stack_templates,
)

from .oracles import (
    dense_expectation,
    dense_observable,
    dense_run,
    finite_difference,
    rotation_matrix,
)


def random_template(n, num_gates, rng, trainable_prob=0.7):
    b = TemplateBuilder(n)
    b.begin_layer()
    for _ in range(num_gates):
        kind = rng.choice(["rx", "ry", "rz", "rzz", "h"])
        if kind == "rzz" and n >= 2:
            qs = tuple(int(q) for q in rng.choice(n, size=2, replace=False))
        elif kind == "rzz":
            kind = "rz"
            qs = (0,)
        else:
            qs = (int(rng.integers(n)),)
        if kind != "h" and rng.random() < trainable_prob:
            b.add(kind, qs, param=b.new_param(), scale=float(rng.uniform(-2, 2)))
        elif kind == "h":
            b.add("h", qs)
        else:
            b.add(kind, qs, angle=float(rng.uniform(-np.pi, np.pi)))
    return b.build()


class TestInitPlusState:
    def test_single_qubit_amplitudes(self):
        state = init_plus_state(1)
        np.testing.assert_allclose(state.amplitudes, [0.7071067811865476] * 2, atol=1e-15)

    def test_two_qubits_uniform(self):
        state = init_plus_state(2)
        np.testing.assert_allclose(state.amplitudes, [0.5] * 4, atol=1e-15)

    def test_zero_qubits_rejected(self):
        with pytest.raises(CapacityError):
            init_plus_state(0)

    def test_above_limit_rejected(self):
        with pytest.raises(CapacityError):
            init_plus_state(21)


class TestApplyGate:
    def test_rx_pi_flips_z(self):
        state = init_plus_state(1)
        # build |0> by undoing the initial Hadamard
        state = apply_gate(state, GateOp("h", (0,)))
        state = apply_gate(state, GateOp("rx", (0,), np.pi))
        assert expectation(state, Observable.z(0)) == pytest.approx(-1.0, abs=1e-12)

    def test_rzz_pi_on_basis_state_global_phase(self):
        state = init_plus_state(2)
        state = apply_gate(state, GateOp("h", (0,)))
        state = apply_gate(state, GateOp("h", (1,)))  # now |00>
        out = apply_gate(state, GateOp("rzz", (0, 1), np.pi))
        expected = np.exp(-1j * np.pi / 2) * state.amplitudes
        np.testing.assert_allclose(out.amplitudes, expected, atol=1e-12)
        assert expectation(out, Observable.zz(0, 1)) == pytest.approx(1.0, abs=1e-12)

    def test_rzz_on_superposition_matches_matrix_exponential(self):
        state = init_plus_state(2)
        out = apply_gate(state, GateOp("rzz", (0, 1), 0.7))
        dense = rotation_matrix(2, "rzz", (0, 1), 0.7) @ state.amplitudes
        np.testing.assert_allclose(out.amplitudes, dense, atol=1e-12)
        x0 = dense_observable(2, Observable.x(0))
        assert expectation(out, Observable.x(0)) == pytest.approx(
            dense_expectation(dense, x0), abs=1e-12)

    def test_index_out_of_range(self):
        state = init_plus_state(2)
        with pytest.raises(IndexError):
            apply_gate(state, GateOp("rx", (2,), 0.1))

    def test_all_gates_match_dense_matrices(self):
        for kind in ["h", "rx", "ry", "rz", "rzz"]:
            n = 3
            state = init_plus_state(n)
            state = apply_gate(state, GateOp("ry", (1,), 0.4))  # entangle-ish start
            angle = 1.234
            qubits = (0, 2) if kind == "rzz" else (1,)
            out = apply_gate(state, GateOp(kind, qubits, None if kind == "h" else angle))
            dense = rotation_matrix(n, kind, qubits, angle) @ state.amplitudes
            np.testing.assert_allclose(out.amplitudes, dense, atol=1e-12)


class TestExpectation:
    def test_z_on_zero_state(self):
        state = init_plus_state(1)
        state = apply_gate(state, GateOp("h", (0,)))
        assert expectation(state, Observable.z(0)) == pytest.approx(1.0)

    def test_x_on_plus_state(self):
        assert expectation(init_plus_state(1), Observable.x(0)) == pytest.approx(1.0)

    def test_weighted_diagonal_on_basis_state(self):
        # |01> means qubit 0 clear, qubit 1 set (basis index 2)
        amps = np.zeros(4, dtype=complex)
        amps[2] = 1.0
        from hqrl.statesim import StateVector
        state = StateVector(2, amps)
        obs = Observable.sum_of([Observable.zz(0, 1, 0.5), Observable.z(1, -2.0)])
        assert expectation(state, obs) == pytest.approx(1.5, abs=1e-12)
        dense = dense_observable(2, obs)
        assert expectation(state, obs) == pytest.approx(dense_expectation(amps, dense))

    def test_out_of_range_qubit(self):
        with pytest.raises(IndexError):
            expectation(init_plus_state(1), Observable.z(1))

    def test_single_pauli_bounded(self):
        rng = np.random.default_rng(3)
        tpl = random_template(3, 12, rng)
        state = run_circuit(tpl, rng.uniform(-np.pi, np.pi, tpl.param_count))
        for obs in [Observable.z(0), Observable.x(1), Observable.zz(0, 2)]:
            assert -1.0 - 1e-12 <= expectation(state, obs) <= 1.0 + 1e-12


class TestSampling:
    def test_deterministic_state(self):
        amps = np.zeros(4, dtype=complex)
        amps[1] = 1.0  # qubit 0 set -> "10"
        from hqrl.statesim import StateVector
        outcomes = sample_bitstrings(StateVector(2, amps), 100, np.random.default_rng(0))
        assert outcomes == ["10"] * 100

    def test_uniform_frequencies_within_4_sigma(self):
        shots = 10 ** 5
        outcomes = sample_bitstrings(init_plus_state(2), shots, np.random.default_rng(42))
        sigma = np.sqrt(shots * 0.25 * 0.75)
        for s in ["00", "10", "01", "11"]:
            assert abs(outcomes.count(s) - shots * 0.25) < 4 * sigma

    def test_seed_reproducibility(self):
        a = sample_bitstrings(init_plus_state(3), 500, np.random.default_rng(9))
        b = sample_bitstrings(init_plus_state(3), 500, np.random.default_rng(9))
        assert a == b

    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(11)
        tpl = random_template(4, 30, rng)
        state = run_circuit(tpl, rng.uniform(-np.pi, np.pi, tpl.param_count))
        assert abs(state.probabilities().sum() - 1.0) < 1e-12


class TestRunCircuit:
    def test_empty_template_gives_uniform(self):
        tpl = TemplateBuilder(2).build()
        state = run_circuit(tpl, np.array([]))
        np.testing.assert_allclose(state.amplitudes, [0.5] * 4, atol=1e-15)

    def test_param_length_mismatch(self):
        b = TemplateBuilder(1)
        b.begin_layer()
        b.add("rx", (0,), param=b.new_param())
        with pytest.raises(ValueError):
            run_circuit(b.build(), np.array([0.1, 0.2]))

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            tpl = random_template(3, 15, rng)
            params = rng.uniform(-np.pi, np.pi, tpl.param_count)
            np.testing.assert_allclose(
                run_circuit(tpl, params).amplitudes, dense_run(tpl, params), atol=1e-10)

    def test_batch_matches_single(self):
        rng = np.random.default_rng(6)
        tpl = random_template(3, 20, rng)
        params = rng.uniform(-np.pi, np.pi, (8, tpl.param_count))
        batch = run_many(tpl, params)
        for i in range(8):
            np.testing.assert_allclose(
                batch[i], run_circuit(tpl, params[i]).amplitudes, atol=1e-12)


class TestGradient:
    def one_rx_template(self):
        b = TemplateBuilder(1)
        b.begin_layer()
        b.add("h", (0,))  # undo the plus state so the circuit starts from |0>
        b.add("rx", (0,), param=b.new_param())
        return b.build()

    def test_zero_slope_at_origin(self):
        g = gradient(self.one_rx_template(), np.array([0.0]), Observable.z(0))
        assert g[0] == pytest.approx(0.0, abs=1e-12)

    def test_slope_at_half_pi(self):
        g = gradient(self.one_rx_template(), np.array([np.pi / 2]), Observable.z(0))
        assert g[0] == pytest.approx(-1.0, abs=1e-12)

    def test_matches_finite_differences_random(self):
        rng = np.random.default_rng(17)
        obs = Observable.sum_of(
            [Observable.z(0, 0.7), Observable.x(1, -1.3), Observable.zz(0, 2, 0.4)])
        for _ in range(5):
            tpl = random_template(3, 18, rng)
            params = rng.uniform(-np.pi, np.pi, tpl.param_count)
            exact = gradient(tpl, params, obs)
            fd = finite_difference(
                lambda p: expectation(run_circuit(tpl, p), obs), params)
            np.testing.assert_allclose(exact, fd, rtol=1e-5, atol=1e-8)

    def test_shared_parameter_chain_rule(self):
        # two gates bound to one parameter with different scales
        b = TemplateBuilder(2)
        b.begin_layer()
        p = b.new_param()
        b.add("rx", (0,), param=p, scale=1.0)
        b.add("ry", (1,), param=p, scale=-0.5)
        tpl = b.build()
        obs = Observable.sum_of([Observable.z(0), Observable.z(1)])
        params = np.array([0.83])
        exact = gradient(tpl, params, obs)
        fd = finite_difference(lambda q: expectation(run_circuit(tpl, q), obs), params)
        np.testing.assert_allclose(exact, fd, rtol=1e-6, atol=1e-10)

    def test_gradient_many_matches_single(self):
        rng = np.random.default_rng(23)
        tpl = random_template(3, 14, rng)
        obs = Observable.z(0)
        plan, coeffs = ObservablePlan.from_observable(3, obs)
        params = rng.uniform(-1, 1, (6, tpl.param_count))
        batch = gradient_many(tpl, params, plan, coeffs)
        for i in range(6):
            np.testing.assert_allclose(batch[i], gradient(tpl, params[i], obs), atol=1e-12)

    def test_stacked_templates_use_per_row_scales(self):
        rng = np.random.default_rng(29)
        templates = []
        for _ in range(4):
            b = TemplateBuilder(2)
            b.begin_layer()
            p0 = b.new_param()
            b.add("rzz", (0, 1), param=p0, scale=float(rng.uniform(0.2, 1.5)))
            p1 = b.new_param()
            b.add("rx", (0,), param=p1, scale=float(rng.uniform(0.2, 1.5)))
            b.add("rx", (1,), param=p1, scale=float(rng.uniform(0.2, 1.5)))
            templates.append(b.build())
        stack = stack_templates(templates)
        params = rng.uniform(-1, 1, (4, 2))
        obs = Observable.sum_of([Observable.z(0), Observable.zz(0, 1)])
        plan, coeffs = ObservablePlan.from_observable(2, obs)
        batch_states = run_many(stack, params)
        batch_grads = gradient_many(stack, params, plan, coeffs)
        for i, tpl in enumerate(templates):
            np.testing.assert_allclose(
                batch_states[i], run_circuit(tpl, params[i]).amplitudes, atol=1e-12)
            np.testing.assert_allclose(batch_grads[i], gradient(tpl, params[i], obs), atol=1e-12)


class TestInvariants:
    @settings(max_examples=10, deadline=None)
    @given(st.integers(min_value=0, max_value=10 ** 6))
    def test_norm_preserved_over_long_random_sequences(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 5))
        tpl = random_template(n, 1000, rng)
        state = run_circuit(tpl, rng.uniform(-np.pi, np.pi, tpl.param_count))
        assert abs(state.norm() - 1.0) < 1e-10

    def test_diagonal_gates_preserve_measurement_probabilities(self):
        rng = np.random.default_rng(31)
        tpl = random_template(3, 10, rng)
        state = run_circuit(tpl, rng.uniform(-np.pi, np.pi, tpl.param_count))
        before = state.probabilities()
        for gate in [GateOp("rz", (1,), 0.77), GateOp("rzz", (0, 2), -1.1)]:
            after = apply_gate(state, gate).probabilities()
            np.testing.assert_allclose(after, before, atol=1e-14)

    def test_weighted_sum_expectation_bound(self):
        rng = np.random.default_rng(37)
        obs = Observable.sum_of(
            [Observable.z(0, 2.0), Observable.x(1, -3.0), Observable.zz(0, 1, 0.5)])
        bound = obs.coefficient_bound()
        for _ in range(20):
            tpl = random_template(2, 12, rng)
            state = run_circuit(tpl, rng.uniform(-np.pi, np.pi, tpl.param_count))
            assert abs(expectation(state, obs)) <= bound + 1e-12
