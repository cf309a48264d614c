"""Circuit templates built from a problem Hamiltonian.

Five ansatz families share the same layered layout: an encoding block of
RZZ/RZ gates carrying the Hamiltonian coefficients, followed by a
variational (or annotation) block of RX mixers, optionally followed by an
RY+RZ hardware-efficient block. The families differ in how gate angles
bind to trainable parameters:

- sge_sgv: one shared encoding parameter and one shared mixer parameter
  per layer; every encoding gate's angle is that parameter scaled by its
  coefficient.
- mge_sgv: one parameter per encoding term, one shared mixer parameter.
- mge_mgv: one parameter per encoding term and per mixer qubit.
- sge_sgv_hea: sge_sgv plus a per-qubit RY and RZ parameter each layer.
- encoding_hea: encoding angles are the raw coefficients (not trainable),
  trainable RY+RZ per qubit each layer, no RX mixer.

Annotations alpha in {0, pi} multiply mixer angles through the binding
scale alpha/pi, so an annotated (assigned) qubit gets an identity mixer.
Templates never include the initial Hadamard layer; the simulator's
run_circuit starts every circuit from the uniform superposition.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .hamiltonians import IsingHamiltonian
from .statesim import CircuitTemplate, TemplateBuilder


class AnsatzKind(str, enum.Enum):
    SGE_SGV = "sge_sgv"
    MGE_SGV = "mge_sgv"
    MGE_MGV = "mge_mgv"
    SGE_SGV_HEA = "sge_sgv_hea"
    ENCODING_HEA = "encoding_hea"


def annotations_all_pi(n: int) -> np.ndarray:
    return np.full(n, math.pi)


def normalize_coefficients(ham: IsingHamiltonian) -> IsingHamiltonian:
    """Divide couplings and fields by the largest magnitude; const untouched.

    Used only for circuit encoding, never for rewards. An all-zero
    Hamiltonian is returned unchanged.
    """
    scale = ham.max_abs_coefficient()
    if scale == 0.0:
        return ham
    return IsingHamiltonian(
        n=ham.n,
        J={k: v / scale for k, v in ham.J.items()},
        h={k: v / scale for k, v in ham.h.items()},
        const=ham.const,
    )


def param_count(kind: AnsatzKind, ham: IsingHamiltonian, layers: int) -> int:
    """Trainable parameter count; T is the number of encoding terms."""
    if layers < 1:
        raise ValueError("layers must be >= 1")
    t = len(ham.J) + len(ham.h)
    n = ham.n
    kind = AnsatzKind(kind)
    if kind is AnsatzKind.SGE_SGV:
        return 2 * layers
    if kind is AnsatzKind.MGE_SGV:
        return layers * (t + 1)
    if kind is AnsatzKind.MGE_MGV:
        return layers * (t + n)
    if kind is AnsatzKind.SGE_SGV_HEA:
        return layers * (2 + 2 * n)
    return 2 * n * layers  # encoding_hea: encoding angles are fixed


@dataclass
class _Skeleton:
    """Structure of a built template plus per-gate scale provenance.

    term_idx[g] >= 0 means gate g carries encoding term term_idx[g];
    ann_qubit[g] >= 0 means gate g is a mixer whose scale is multiplied by
    annotations[ann_qubit[g]] / pi; fixed_coeff[g] marks non-trainable
    encoding gates whose angle is the coefficient itself.
    """

    template: CircuitTemplate
    term_idx: np.ndarray
    ann_qubit: np.ndarray
    fixed_coeff: np.ndarray
    layer_designated: list[int | None]


_SKELETONS: dict[tuple, _Skeleton] = {}


def _build_skeleton(kind: AnsatzKind, n: int, term_keys: tuple, layers: int,
                    annotated: bool) -> _Skeleton:
    b = TemplateBuilder(n)
    term_idx: list[int] = []
    ann_qubit: list[int] = []
    fixed_coeff: list[bool] = []
    layer_designated: list[int | None] = []

    def mark(term=-1, ann=-1, fixed=False):
        term_idx.append(term)
        ann_qubit.append(ann)
        fixed_coeff.append(fixed)

    sge = kind in (AnsatzKind.SGE_SGV, AnsatzKind.SGE_SGV_HEA)
    for _ in range(layers):
        b.begin_layer()
        layer_designated.append(None)
        # encoding block: one gate per Hamiltonian term, placeholder scale 1
        enc_shared = b.new_param() if sge and term_keys else None
        if kind is AnsatzKind.ENCODING_HEA:
            enc_shared = None
        for t, key in enumerate(term_keys):
            gate_kind = key[0]
            qubits = (key[1], key[2]) if gate_kind == "zz" else (key[1],)
            op = "rzz" if gate_kind == "zz" else "rz"
            if kind is AnsatzKind.ENCODING_HEA:
                b.add(op, qubits)
                mark(term=t, fixed=True)
            elif sge:
                b.add(op, qubits, param=enc_shared)
                mark(term=t)
            else:
                b.add(op, qubits, param=b.new_param())
                mark(term=t)
        # variational / annotation block; its first parameter is the layer's
        # designated derivative slot for the trainability benchmark
        if kind is not AnsatzKind.ENCODING_HEA:
            var_shared = None
            if kind is not AnsatzKind.MGE_MGV:
                var_shared = b.new_param()
                layer_designated[-1] = var_shared
            for q in range(n):
                p = var_shared if var_shared is not None else b.new_param()
                if layer_designated[-1] is None:
                    layer_designated[-1] = p
                b.add("rx", (q,), param=p)
                mark(ann=q if annotated else -1)
        # hardware-efficient block
        if kind in (AnsatzKind.SGE_SGV_HEA, AnsatzKind.ENCODING_HEA):
            for q in range(n):
                b.add("ry", (q,), param=b.new_param())
                mark()
            for q in range(n):
                b.add("rz", (q,), param=b.new_param())
                mark()
    return _Skeleton(
        template=b.build(),
        term_idx=np.asarray(term_idx, dtype=np.int32),
        ann_qubit=np.asarray(ann_qubit, dtype=np.int32),
        fixed_coeff=np.asarray(fixed_coeff, dtype=bool),
        layer_designated=layer_designated,
    )


def _get_skeleton(kind: AnsatzKind, n: int, term_keys: tuple, layers: int,
                  annotated: bool) -> _Skeleton:
    key = (kind, n, term_keys, layers, annotated)
    skeleton = _SKELETONS.get(key)
    if skeleton is None:
        skeleton = _build_skeleton(kind, n, term_keys, layers, annotated)
        _SKELETONS[key] = skeleton
    return skeleton


def build(kind: AnsatzKind, ham: IsingHamiltonian, annotations: np.ndarray | None,
          layers: int) -> CircuitTemplate:
    """Concrete template for one Hamiltonian and annotation vector.

    Templates sharing (kind, n, term layout, layers, annotated) reuse one
    structural skeleton, so batches of them can be stacked for the
    simulator's batched kernels.
    """
    kind = AnsatzKind(kind)
    if layers < 1:
        raise ValueError("layers must be >= 1")
    if annotations is not None:
        annotations = np.asarray(annotations, dtype=float)
        if annotations.shape != (ham.n,):
            raise ValueError("annotation length must equal the qubit count")
        bad = ~(np.isclose(annotations, 0.0) | np.isclose(annotations, math.pi))
        if bad.any():
            raise ValueError("annotations must be 0 or pi")
    terms = ham.terms()
    term_keys = tuple((k, i, j) for k, i, j, _ in terms)
    coeffs = np.asarray([c for _, _, _, c in terms], dtype=np.float64)
    skeleton = _get_skeleton(kind, ham.n, term_keys, layers, annotations is not None)
    base = skeleton.template
    scale = np.ones(base.num_gates, dtype=np.float64)
    fixed = np.zeros(base.num_gates, dtype=np.float64)
    has_term = skeleton.term_idx >= 0
    trainable_term = has_term & ~skeleton.fixed_coeff
    if trainable_term.any():
        scale[trainable_term] = coeffs[skeleton.term_idx[trainable_term]]
    if skeleton.fixed_coeff.any():
        fixed[skeleton.fixed_coeff] = coeffs[skeleton.term_idx[skeleton.fixed_coeff]]
    if annotations is not None:
        ann_mask = skeleton.ann_qubit >= 0
        if ann_mask.any():
            scale[ann_mask] *= annotations[skeleton.ann_qubit[ann_mask]] / math.pi
    expected = param_count(kind, ham, layers)
    if base.param_count != expected and (len(term_keys) > 0
                                         or kind not in (AnsatzKind.SGE_SGV,
                                                         AnsatzKind.SGE_SGV_HEA)):
        raise AssertionError("parameter bookkeeping mismatch")
    return CircuitTemplate(
        num_qubits=base.num_qubits,
        codes=base.codes,
        qa=base.qa,
        qb=base.qb,
        param=base.param,
        scale=scale,
        fixed=fixed,
        param_count=base.param_count,
        layer_params=base.layer_params,
        layer_slices=base.layer_slices,
    )


def init_params(kind: AnsatzKind, ham: IsingHamiltonian, layers: int,
                rng: np.random.Generator) -> np.ndarray:
    """Small-angle start: uniform on [0, pi/8].

    Sign-coherent draws keep the encoding/mixer angle products positive, so
    a freshly initialized circuit already ranks actions by problem structure
    instead of averaging the ranking away over random signs.
    """
    return rng.uniform(0.0, math.pi / 8, param_count(kind, ham, layers))


def middle_layer_second_param(template: CircuitTemplate) -> int:
    """Index of the second trainable parameter created in layer ceil(L/2)."""
    layers = len(template.layer_params)
    layer = math.ceil(layers / 2) - 1
    params = template.layer_params[layer]
    if len(params) < 2:
        raise ValueError("designated layer has no second parameter slot")
    return params[1]


def bench_parameter_slot(kind: AnsatzKind, ham: IsingHamiltonian, layers: int) -> int:
    """Derivative slot probed by the variance benchmark: the middle layer's
    second parameter block.

    For the two-parameters-per-layer families this is literally the second
    parameter created in layer ceil(L/2). For the multi-generator families
    the second block is the variational block, whose correlation structure
    is exactly what separates their variance offsets, so the slot is that
    block's first parameter.
    """
    kind = AnsatzKind(kind)
    term_keys = tuple((k, i, j) for k, i, j, _ in ham.terms())
    skeleton = _get_skeleton(kind, ham.n, term_keys, layers, False)
    layer = math.ceil(layers / 2) - 1
    params = skeleton.template.layer_params[layer]
    if len(params) < 2:
        raise ValueError("designated layer has no second parameter slot")
    designated = skeleton.layer_designated[layer]
    return params[1] if designated is None else designated
