"""Dense statevector engine for the H / RX / RY / RZ / RZZ gate set.

Little-endian indexing throughout: bit i of a basis index is qubit i, and
character i of a bitstring is qubit i. Rotation conventions are
RP(theta) = exp(-i*theta/2 * P) for P in {X, Y, Z} and
RZZ(theta) = exp(-i*theta/2 * Z(x)Z). Amplitudes are complex128 and are
never silently renormalized; norm drift is a bug signal, not noise.

The engine works on batches of states stacked as (B, 2^n) arrays so that
many circuit evaluations (gradient samples, replay batches, finite
difference probes) share the per-gate numpy dispatch cost. The public
single-state operations wrap the batched kernels with B = 1.

Gradients of expectation values are computed by an exact reverse sweep
over the gate sequence (one forward pass, one backward pass, one generator
application per trainable gate). Gates bound to a shared parameter
accumulate their contributions through the binding scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

MAX_QUBITS = 20

# gate codes used in template arrays
H, RX, RY, RZ, RZZ = 0, 1, 2, 3, 4
GATE_NAMES = {H: "h", RX: "rx", RY: "ry", RZ: "rz", RZZ: "rzz"}
GATE_CODES = {v: k for k, v in GATE_NAMES.items()}

_SQRT2_INV = 1.0 / np.sqrt(2.0)


class CapacityError(ValueError):
    """Requested register exceeds the dense-simulation limit."""


def _check_num_qubits(n: int) -> None:
    if not (1 <= n <= MAX_QUBITS):
        raise CapacityError(f"qubit count {n} outside supported range [1, {MAX_QUBITS}]")


# ---------------------------------------------------------------------------
# cached index helpers, keyed by (num_qubits, qubit indices)

_ZSIGNS: dict[tuple[int, int], np.ndarray] = {}
_ZZSIGNS: dict[tuple[int, int, int], np.ndarray] = {}
_XPERMS: dict[tuple[int, int], np.ndarray] = {}
_PARITY_IDX: dict[tuple[int, int, int], tuple[np.ndarray, np.ndarray]] = {}


def _zsign(n: int, q: int) -> np.ndarray:
    key = (n, q)
    sign = _ZSIGNS.get(key)
    if sign is None:
        bits = (np.arange(1 << n) >> q) & 1
        sign = (1.0 - 2.0 * bits).astype(np.float64)
        _ZSIGNS[key] = sign
    return sign


def _zzsign(n: int, qa: int, qb: int) -> np.ndarray:
    qa, qb = min(qa, qb), max(qa, qb)
    key = (n, qa, qb)
    sign = _ZZSIGNS.get(key)
    if sign is None:
        sign = _zsign(n, qa) * _zsign(n, qb)
        _ZZSIGNS[key] = sign
    return sign


def _xperm(n: int, q: int) -> np.ndarray:
    key = (n, q)
    perm = _XPERMS.get(key)
    if perm is None:
        perm = np.arange(1 << n) ^ (1 << q)
        _XPERMS[key] = perm
    return perm


def _parity_split(n: int, qa: int, qb: int) -> tuple[np.ndarray, np.ndarray]:
    """Basis indices with even / odd parity of bits qa, qb."""
    qa, qb = min(qa, qb), max(qa, qb)
    key = (n, qa, qb)
    cached = _PARITY_IDX.get(key)
    if cached is None:
        idx = np.arange(1 << n)
        parity = ((idx >> qa) ^ (idx >> qb)) & 1
        cached = (np.nonzero(parity == 0)[0], np.nonzero(parity == 1)[0])
        _PARITY_IDX[key] = cached
    return cached


# ---------------------------------------------------------------------------
# gate kernels on (B, dim) batches, in place

def _mix_1q(amps: np.ndarray, n: int, q: int, m00, m01, m10, m11) -> None:
    """Apply a 2x2 matrix on qubit q; matrix entries are scalars or (B,) arrays."""
    B = amps.shape[0]
    hi = 1 << (n - 1 - q)
    lo = 1 << q
    v = amps.reshape(B, hi, 2, lo)
    a0 = v[:, :, 0, :].copy()
    a1 = v[:, :, 1, :]
    v[:, :, 0, :] = m00 * a0 + m01 * a1
    v[:, :, 1, :] = m10 * a0 + m11 * a1


def _col(x: np.ndarray | float) -> np.ndarray | float:
    """Reshape a (B,) coefficient vector for broadcasting over (B, hi, lo)."""
    if isinstance(x, np.ndarray) and x.ndim == 1:
        return x[:, None, None]
    return x


def _apply_code(amps: np.ndarray, n: int, code: int, qa: int, qb: int, angle) -> None:
    """Apply one gate to every row of amps. angle is a scalar or (B,) array."""
    if code == H:
        _mix_1q(amps, n, qa, _SQRT2_INV, _SQRT2_INV, _SQRT2_INV, -_SQRT2_INV)
    elif code == RX:
        half = 0.5 * np.asarray(angle)
        c = _col(np.cos(half))
        s = _col(-1j * np.sin(half))
        _mix_1q(amps, n, qa, c, s, s, c)
    elif code == RY:
        half = 0.5 * np.asarray(angle)
        c = _col(np.cos(half))
        s = _col(np.sin(half))
        _mix_1q(amps, n, qa, c, -s, s, c)
    elif code == RZ:
        half = 0.5 * np.asarray(angle)
        p = np.exp(-1j * half)
        B = amps.shape[0]
        hi = 1 << (n - 1 - qa)
        lo = 1 << qa
        v = amps.reshape(B, hi, 2, lo)
        v[:, :, 0, :] *= _col(p)
        v[:, :, 1, :] *= _col(np.conj(p))
    elif code == RZZ:
        half = 0.5 * np.asarray(angle)
        p = np.exp(-1j * half)
        idx_even, idx_odd = _parity_split(n, qa, qb)
        if isinstance(p, np.ndarray) and p.ndim == 1:
            amps[:, idx_even] *= p[:, None]
            amps[:, idx_odd] *= np.conj(p)[:, None]
        else:
            amps[:, idx_even] *= p
            amps[:, idx_odd] *= np.conj(p)
    else:
        raise ValueError(f"unknown gate code {code}")


def _pauli_rows(states: np.ndarray, n: int, kind: str, qa: int, qb: int) -> np.ndarray:
    """Return P|psi> for each row. kind in {'i','x','y','z','zz'}."""
    if kind == "i":
        return states.copy()
    if kind == "x":
        return states[:, _xperm(n, qa)]
    if kind == "y":
        out = states[:, _xperm(n, qa)].copy()
        out *= (-1j) * _zsign(n, qa)
        return out
    if kind == "z":
        return states * _zsign(n, qa)
    if kind == "zz":
        return states * _zzsign(n, qa, qb)
    raise ValueError(f"unknown pauli kind {kind!r}")


# ---------------------------------------------------------------------------
# public domain types

@dataclass
class StateVector:
    """Dense state of num_qubits qubits; amplitudes[b] belongs to basis index b."""

    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        _check_num_qubits(self.num_qubits)
        if self.amplitudes.shape != (1 << self.num_qubits,):
            raise ValueError("amplitude length must be 2^num_qubits")

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class GateOp:
    """One gate: kind in {'h','rx','ry','rz','rzz'}; angle in radians (None for h)."""

    kind: str
    qubits: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        if self.kind not in GATE_CODES:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        want = 2 if self.kind == "rzz" else 1
        if len(self.qubits) != want:
            raise ValueError(f"{self.kind} expects {want} qubit(s)")
        if self.kind == "rzz" and self.qubits[0] == self.qubits[1]:
            raise ValueError("rzz qubits must differ")
        if self.kind != "h" and self.angle is None:
            raise ValueError(f"{self.kind} requires an angle")


_VALID_OBS_PAULIS = {"X", "Z"}


@dataclass(frozen=True)
class Observable:
    """Weighted sum of Pauli strings over {I, X, Z}, at most 2 non-identity factors.

    terms is a tuple of (coefficient, factors) with factors a tuple of
    (qubit, pauli) pairs; the empty factor tuple is the identity.
    """

    terms: tuple[tuple[float, tuple[tuple[int, str], ...]], ...]

    def __post_init__(self):
        for coeff, factors in self.terms:
            if len(factors) > 2:
                raise ValueError("at most two non-identity factors per term")
            qubits = [q for q, _ in factors]
            if len(set(qubits)) != len(qubits):
                raise ValueError("repeated qubit in a Pauli term")
            for _, p in factors:
                if p not in _VALID_OBS_PAULIS:
                    raise ValueError(f"unsupported Pauli {p!r}")

    @classmethod
    def z(cls, q: int, coeff: float = 1.0) -> "Observable":
        return cls(((float(coeff), ((q, "Z"),)),))

    @classmethod
    def x(cls, q: int, coeff: float = 1.0) -> "Observable":
        return cls(((float(coeff), ((q, "X"),)),))

    @classmethod
    def zz(cls, qa: int, qb: int, coeff: float = 1.0) -> "Observable":
        if qa == qb:
            raise ValueError("zz qubits must differ")
        qa, qb = min(qa, qb), max(qa, qb)
        return cls(((float(coeff), ((qa, "Z"), (qb, "Z"))),))

    @classmethod
    def constant(cls, coeff: float) -> "Observable":
        return cls(((float(coeff), ()),))

    @classmethod
    def sum_of(cls, parts: Iterable["Observable"]) -> "Observable":
        terms: list = []
        for part in parts:
            terms.extend(part.terms)
        return cls(tuple(terms))

    def coefficient_bound(self) -> float:
        return float(sum(abs(c) for c, _ in self.terms))

    def max_qubit(self) -> int:
        return max((q for _, fs in self.terms for q, _ in fs), default=-1)


def ising_observable(ham) -> Observable:
    """Observable for an IsingHamiltonian: sum of J*ZZ + h*Z + const."""
    parts = [Observable.zz(i, j, c) for (i, j), c in sorted(ham.J.items())]
    parts += [Observable.z(i, c) for i, c in sorted(ham.h.items())]
    if ham.const != 0.0:
        parts.append(Observable.constant(ham.const))
    return Observable.sum_of(parts)


# ---------------------------------------------------------------------------
# circuit templates

@dataclass
class CircuitTemplate:
    """Gate sequence with per-gate angle sources.

    Structure-of-arrays layout: gate g has kind codes[g] on qubits
    (qa[g], qb[g]); its angle is params[param[g]] * scale[g] when
    param[g] >= 0, otherwise the fixed angle fixed[g]. Structural arrays
    (codes, qa, qb, param) may be shared between templates built from the
    same skeleton; scale and fixed are per-template.
    """

    num_qubits: int
    codes: np.ndarray
    qa: np.ndarray
    qb: np.ndarray
    param: np.ndarray
    scale: np.ndarray
    fixed: np.ndarray
    param_count: int
    layer_params: list[list[int]] = field(default_factory=list)
    layer_slices: list[tuple[int, int]] = field(default_factory=list)

    @property
    def num_gates(self) -> int:
        return len(self.codes)

    def gate_list(self, params: np.ndarray | None = None) -> list[GateOp]:
        """Materialize GateOps; requires params when trainable gates exist."""
        ops = []
        for g in range(self.num_gates):
            if self.param[g] >= 0:
                if params is None:
                    raise ValueError("params required to resolve trainable angles")
                angle = float(params[self.param[g]] * self.scale[g])
            else:
                angle = float(self.fixed[g])
            kind = GATE_NAMES[int(self.codes[g])]
            qubits = (int(self.qa[g]),) if kind != "rzz" else (int(self.qa[g]), int(self.qb[g]))
            ops.append(GateOp(kind, qubits, None if kind == "h" else angle))
        return ops


class TemplateBuilder:
    """Incrementally assemble a CircuitTemplate."""

    def __init__(self, num_qubits: int):
        _check_num_qubits(num_qubits)
        self.n = num_qubits
        self._codes: list[int] = []
        self._qa: list[int] = []
        self._qb: list[int] = []
        self._param: list[int] = []
        self._scale: list[float] = []
        self._fixed: list[float] = []
        self._param_count = 0
        self.layer_params: list[list[int]] = []
        self._layer_starts: list[int] = []

    def new_param(self) -> int:
        idx = self._param_count
        self._param_count += 1
        if self.layer_params:
            self.layer_params[-1].append(idx)
        return idx

    def begin_layer(self) -> None:
        self.layer_params.append([])
        self._layer_starts.append(len(self._codes))

    def add(self, kind: str, qubits: Sequence[int], param: int | None = None,
            scale: float = 1.0, angle: float = 0.0) -> None:
        code = GATE_CODES[kind]
        for q in qubits:
            if not (0 <= q < self.n):
                raise IndexError(f"qubit {q} out of range for n={self.n}")
        self._codes.append(code)
        self._qa.append(qubits[0])
        self._qb.append(qubits[1] if len(qubits) > 1 else -1)
        self._param.append(-1 if param is None else param)
        self._scale.append(float(scale))
        self._fixed.append(float(angle))

    def build(self) -> CircuitTemplate:
        starts = self._layer_starts + [len(self._codes)]
        slices = [(starts[i], starts[i + 1]) for i in range(len(self._layer_starts))]
        return CircuitTemplate(
            num_qubits=self.n,
            codes=np.asarray(self._codes, dtype=np.int8),
            qa=np.asarray(self._qa, dtype=np.int32),
            qb=np.asarray(self._qb, dtype=np.int32),
            param=np.asarray(self._param, dtype=np.int32),
            scale=np.asarray(self._scale, dtype=np.float64),
            fixed=np.asarray(self._fixed, dtype=np.float64),
            param_count=self._param_count,
            layer_params=self.layer_params,
            layer_slices=slices,
        )


@dataclass
class TemplateStack:
    """B templates sharing one gate structure, with per-row scales/fixed angles."""

    base: CircuitTemplate
    scales: np.ndarray  # (B, G)
    fixed: np.ndarray   # (B, G)

    @property
    def batch_size(self) -> int:
        return self.scales.shape[0]


def stack_templates(templates: Sequence[CircuitTemplate]) -> TemplateStack:
    base = templates[0]
    for t in templates[1:]:
        same = (t.num_qubits == base.num_qubits
                and t.param_count == base.param_count
                and (t.codes is base.codes or np.array_equal(t.codes, base.codes))
                and (t.qa is base.qa or np.array_equal(t.qa, base.qa))
                and (t.qb is base.qb or np.array_equal(t.qb, base.qb))
                and (t.param is base.param or np.array_equal(t.param, base.param)))
        if not same:
            raise ValueError("templates do not share a gate structure")
    scales = np.stack([t.scale for t in templates])
    fixed = np.stack([t.fixed for t in templates])
    return TemplateStack(base=base, scales=scales, fixed=fixed)


def _resolve_angles(template: CircuitTemplate | TemplateStack,
                    params: np.ndarray) -> tuple[CircuitTemplate, np.ndarray]:
    """Angles matrix (B, G) from a params matrix (B, P)."""
    if isinstance(template, TemplateStack):
        base, scales, fixed = template.base, template.scales, template.fixed
    else:
        base, scales, fixed = template, template.scale[None, :], template.fixed[None, :]
    params = np.atleast_2d(np.asarray(params, dtype=np.float64))
    B = params.shape[0]
    if params.shape[1] != base.param_count:
        raise ValueError(f"expected {base.param_count} parameters, got {params.shape[1]}")
    G = base.num_gates
    angles = np.broadcast_to(fixed, (B, G)).copy()
    trainable = base.param >= 0
    if trainable.any():
        pidx = base.param[trainable]
        sc = np.broadcast_to(scales, (B, G))[:, trainable]
        angles[:, trainable] = params[:, pidx] * sc
    return base, angles


# ---------------------------------------------------------------------------
# observable evaluation plans (shared term structure, per-row coefficients)

@dataclass
class ObservablePlan:
    """Shared list of Pauli terms; coefficients supplied per evaluation."""

    num_qubits: int
    kinds: list[str]
    qa: list[int]
    qb: list[int]

    @classmethod
    def from_terms(cls, n: int, terms: Sequence[tuple[str, int, int]]) -> "ObservablePlan":
        kinds = [t[0] for t in terms]
        qa = [t[1] for t in terms]
        qb = [t[2] for t in terms]
        for kind, a, b in terms:
            if kind not in ("i", "x", "z", "zz"):
                raise ValueError(f"unsupported term kind {kind!r}")
            for q in ((a,) if kind in ("i", "x", "z") else (a, b)):
                if kind != "i" and not (0 <= q < n):
                    raise IndexError(f"observable qubit {q} out of range")
        return cls(num_qubits=n, kinds=kinds, qa=qa, qb=qb)

    @classmethod
    def from_observable(cls, n: int, obs: Observable) -> tuple["ObservablePlan", np.ndarray]:
        terms = []
        coeffs = []
        for coeff, factors in obs.terms:
            coeffs.append(coeff)
            if len(factors) == 0:
                terms.append(("i", 0, -1))
            elif len(factors) == 1:
                q, p = factors[0]
                terms.append((p.lower(), q, -1))
            else:
                (q1, p1), (q2, p2) = factors
                if p1 != "Z" or p2 != "Z":
                    raise ValueError("two-qubit terms must be ZZ")
                terms.append(("zz", min(q1, q2), max(q1, q2)))
        plan = cls.from_terms(n, terms)
        return plan, np.asarray(coeffs, dtype=np.float64)

    @property
    def num_terms(self) -> int:
        return len(self.kinds)

    def apply(self, states: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
        """O|psi> per row; coeffs is (K,) or (B, K)."""
        n = self.num_qubits
        coeffs = np.asarray(coeffs, dtype=np.float64)
        if coeffs.ndim == 1:
            coeffs = np.broadcast_to(coeffs, (states.shape[0], self.num_terms))
        out = np.zeros_like(states)
        for k, kind in enumerate(self.kinds):
            c = coeffs[:, k][:, None]
            if kind == "i":
                out += c * states
            elif kind == "x":
                out += c * states[:, _xperm(n, self.qa[k])]
            elif kind == "z":
                out += c * (states * _zsign(n, self.qa[k]))
            else:
                out += c * (states * _zzsign(n, self.qa[k], self.qb[k]))
        return out

    def expectations(self, states: np.ndarray) -> np.ndarray:
        """Per-term expectation values, shape (B, K). Imag parts must vanish."""
        n = self.num_qubits
        B = states.shape[0]
        out = np.empty((B, self.num_terms), dtype=np.float64)
        probs = None
        for k, kind in enumerate(self.kinds):
            if kind == "i":
                if probs is None:
                    probs = np.abs(states) ** 2
                out[:, k] = probs.sum(axis=1)
            elif kind == "z":
                if probs is None:
                    probs = np.abs(states) ** 2
                out[:, k] = probs @ _zsign(n, self.qa[k])
            elif kind == "zz":
                if probs is None:
                    probs = np.abs(states) ** 2
                out[:, k] = probs @ _zzsign(n, self.qa[k], self.qb[k])
            else:  # x
                vals = np.sum(np.conj(states) * states[:, _xperm(n, self.qa[k])], axis=1)
                if np.max(np.abs(vals.imag), initial=0.0) > 1e-10:
                    raise ArithmeticError("expectation acquired an imaginary part > 1e-10")
                out[:, k] = vals.real
        return out


# ---------------------------------------------------------------------------
# core operations

def init_plus_state(n: int) -> StateVector:
    """Uniform superposition H^(x)n |0...0>, every amplitude 2^(-n/2)."""
    _check_num_qubits(n)
    dim = 1 << n
    amps = np.full(dim, 2.0 ** (-n / 2.0), dtype=np.complex128)
    return StateVector(num_qubits=n, amplitudes=amps)


def apply_gate(state: StateVector, gate: GateOp) -> StateVector:
    n = state.num_qubits
    for q in gate.qubits:
        if not (0 <= q < n):
            raise IndexError(f"qubit {q} out of range for n={n}")
    amps = state.amplitudes[None, :].copy()
    code = GATE_CODES[gate.kind]
    qb = gate.qubits[1] if gate.kind == "rzz" else -1
    _apply_code(amps, n, code, gate.qubits[0], qb, 0.0 if gate.angle is None else gate.angle)
    return StateVector(num_qubits=n, amplitudes=amps[0])


def expectation(state: StateVector, obs: Observable) -> float:
    if obs.max_qubit() >= state.num_qubits:
        raise IndexError("observable addresses a qubit outside the register")
    plan, coeffs = ObservablePlan.from_observable(state.num_qubits, obs)
    e = plan.expectations(state.amplitudes[None, :])[0]
    return float(e @ coeffs)


def sample_bitstrings(state: StateVector, shots: int, rng: np.random.Generator) -> list[str]:
    """Draw shots bitstrings from |amplitude|^2; char i of each string is qubit i."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    probs = state.probabilities()
    total = probs.sum()
    if abs(total - 1.0) > 1e-12:
        raise ArithmeticError(f"probabilities sum to {total}, outside 1 +/- 1e-12")
    edges = np.cumsum(probs)
    edges[-1] = total
    draws = np.searchsorted(edges, rng.random(shots) * total, side="right")
    n = state.num_qubits
    return [format_bitstring(int(d), n) for d in draws]


def format_bitstring(index: int, n: int) -> str:
    return "".join("1" if (index >> i) & 1 else "0" for i in range(n))


def bitstring_to_index(bits: Sequence[int] | str) -> int:
    return sum((1 << i) for i, b in enumerate(bits) if int(b))


def run_many(template: CircuitTemplate | TemplateStack, params: np.ndarray) -> np.ndarray:
    """Evaluate the circuit on a batch of parameter rows; returns (B, 2^n) states."""
    base, angles = _resolve_angles(template, params)
    n = base.num_qubits
    B = angles.shape[0]
    amps = np.full((B, 1 << n), 2.0 ** (-n / 2.0), dtype=np.complex128)
    for g in range(base.num_gates):
        _apply_code(amps, n, int(base.codes[g]), int(base.qa[g]), int(base.qb[g]), angles[:, g])
    return amps


def run_circuit(template: CircuitTemplate, params: np.ndarray) -> StateVector:
    """Prepare the plus state, then apply every gate with its resolved angle."""
    params = np.asarray(params, dtype=np.float64)
    if params.ndim != 1:
        raise ValueError("params must be a flat vector")
    amps = run_many(template, params[None, :])
    return StateVector(num_qubits=template.num_qubits, amplitudes=amps[0])


_GENERATORS = {RX: "x", RY: "y", RZ: "z", RZZ: "zz"}


def gradient_many(template: CircuitTemplate | TemplateStack, params: np.ndarray,
                  plan: ObservablePlan, coeffs: np.ndarray) -> np.ndarray:
    """Reverse-sweep gradients d<O>/d(theta) for every row; returns (B, P)."""
    base, angles = _resolve_angles(template, params)
    if isinstance(template, TemplateStack):
        scales = template.scales
    else:
        scales = np.broadcast_to(template.scale, angles.shape)
    n = base.num_qubits
    B = angles.shape[0]
    ket = np.full((B, 1 << n), 2.0 ** (-n / 2.0), dtype=np.complex128)
    for g in range(base.num_gates):
        _apply_code(ket, n, int(base.codes[g]), int(base.qa[g]), int(base.qb[g]), angles[:, g])
    bra = plan.apply(ket, coeffs)
    grads = np.zeros((B, base.param_count), dtype=np.float64)
    for g in range(base.num_gates - 1, -1, -1):
        code = int(base.codes[g])
        qa = int(base.qa[g])
        qb = int(base.qb[g])
        pidx = int(base.param[g])
        if pidx >= 0:
            gen = _pauli_rows(ket, n, _GENERATORS[code], qa, qb)
            # d/d(angle) exp(-i*angle/2*P) contributes Im(<bra|P|ket>)
            ga = np.sum(np.conj(bra) * gen, axis=1).imag
            grads[:, pidx] += scales[:, g] * ga
        _apply_code(ket, n, code, qa, qb, -angles[:, g])
        _apply_code(bra, n, code, qa, qb, -angles[:, g])
    return grads


def gradient(template: CircuitTemplate, params: np.ndarray, obs: Observable) -> np.ndarray:
    """Exact gradient of <obs> after run_circuit, one entry per trainable parameter."""
    params = np.asarray(params, dtype=np.float64)
    if params.ndim != 1:
        raise ValueError("params must be a flat vector")
    plan, coeffs = ObservablePlan.from_observable(template.num_qubits, obs)
    return gradient_many(template, params[None, :], plan, coeffs)[0]
