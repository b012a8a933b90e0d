"""Dense state-vector simulation for small gate circuits.

Qubit ``k`` is bit ``k`` (least significant) of the basis-state index, so
``|q1 q0> = |10>`` lives at index 2.  Amplitudes are complex128 throughout.
The simulator is exact: no sampling, no noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MAX_QUBITS = 24

GATE_KINDS = ("RX", "RY", "H", "CNOT")

_INV_SQRT2 = 1.0 / np.sqrt(2.0)


@dataclass(frozen=True)
class GateOp:
    """A single gate: its kind, target qubit, angle, and control qubits.

    ``controls`` lists qubits that must be 1 for the unitary to fire.  A
    CNOT carries its control here, and ``controlled()`` can stack another
    control on any gate (a CNOT with two controls is a Toffoli).
    """

    kind: str
    target: int
    angle: float = 0.0
    controls: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.kind == "CNOT" and not self.controls:
            raise ValueError("CNOT requires a control qubit")
        if self.target in self.controls:
            raise ValueError(f"qubit {self.target} is both control and target")
        if len(set(self.controls)) != len(self.controls):
            raise ValueError(f"duplicate control qubits in {self.controls}")

    def inverse(self) -> "GateOp":
        if self.kind in ("RX", "RY"):
            return GateOp(self.kind, self.target, -self.angle, self.controls)
        return self  # H and CNOT are self-inverse

    def controlled(self, control: int) -> "GateOp":
        return GateOp(self.kind, self.target, self.angle, self.controls + (control,))

    def qubits(self) -> tuple[int, ...]:
        return (self.target,) + self.controls


@dataclass
class StateVector:
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        if not 1 <= self.num_qubits <= MAX_QUBITS:
            raise ValueError(
                f"num_qubits must be in [1, {MAX_QUBITS}], got {self.num_qubits}"
            )
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (2**self.num_qubits,):
            raise ValueError(
                f"expected {2**self.num_qubits} amplitudes, "
                f"got shape {self.amplitudes.shape}"
            )

    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))


@dataclass
class Circuit:
    num_qubits: int
    gates: list[GateOp] = field(default_factory=list)

    def __post_init__(self) -> None:
        for gate in self.gates:
            _check_gate_bounds(gate, self.num_qubits)


def new_zero_state(num_qubits: int) -> StateVector:
    """All-zeros computational basis state on ``num_qubits`` qubits."""
    if not 1 <= num_qubits <= MAX_QUBITS:
        raise ValueError(
            f"num_qubits must be in [1, {MAX_QUBITS}], got {num_qubits}"
        )
    amps = np.zeros(2**num_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(num_qubits, amps)


def apply_gate(state: StateVector, gate: GateOp) -> StateVector:
    """Return the state after ``gate``; the input state is left untouched."""
    _check_gate_bounds(gate, state.num_qubits)
    amps = state.amplitudes.copy()
    apply_gate_inplace(amps, state.num_qubits, gate)
    return StateVector(state.num_qubits, amps)


def run_circuit(state: StateVector, circuit: Circuit) -> StateVector:
    if circuit.num_qubits != state.num_qubits:
        raise ValueError(
            f"circuit acts on {circuit.num_qubits} qubits, "
            f"state has {state.num_qubits}"
        )
    amps = state.amplitudes.copy()
    for gate in circuit.gates:
        apply_gate_inplace(amps, state.num_qubits, gate)
    return StateVector(state.num_qubits, amps)


def prob_all_zero(state: StateVector) -> float:
    return float(np.abs(state.amplitudes[0]) ** 2)


def prob_qubit_zero(state: StateVector, qubit: int) -> float:
    """Marginal probability of measuring ``qubit`` as 0."""
    if not 0 <= qubit < state.num_qubits:
        raise IndexError(f"qubit {qubit} out of range for {state.num_qubits} qubits")
    view = state.amplitudes.reshape((2,) * state.num_qubits)
    zero_slice = np.take(view, 0, axis=state.num_qubits - 1 - qubit)
    return float(np.sum(np.abs(zero_slice) ** 2))


def inner_product(a: StateVector, b: StateVector) -> complex:
    """<a|b> with the conjugate on ``a``."""
    if a.num_qubits != b.num_qubits:
        raise ValueError(
            f"qubit counts differ: {a.num_qubits} vs {b.num_qubits}"
        )
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def _check_gate_bounds(gate: GateOp, num_qubits: int) -> None:
    for q in gate.qubits():
        if not 0 <= q < num_qubits:
            raise IndexError(
                f"gate {gate.kind} touches qubit {q}, "
                f"state has {num_qubits} qubits"
            )


def _gate_coeffs(gate: GateOp) -> tuple[complex, complex, complex, complex]:
    """Entries (u00, u01, u10, u11) of the single-qubit unitary."""
    if gate.kind == "RX":
        c = np.cos(gate.angle / 2)
        s = np.sin(gate.angle / 2)
        return c, -1j * s, -1j * s, c
    if gate.kind == "RY":
        c = np.cos(gate.angle / 2)
        s = np.sin(gate.angle / 2)
        return c, -s, s, c
    if gate.kind == "H":
        return _INV_SQRT2, _INV_SQRT2, _INV_SQRT2, -_INV_SQRT2
    raise ValueError(f"no matrix for gate kind {gate.kind!r}")


def apply_gate_inplace(amps: np.ndarray, num_qubits: int, gate: GateOp) -> None:
    """Apply ``gate`` to ``amps`` of shape ``(..., 2**num_qubits)`` in place.

    Leading axes are batch axes: every row evolves under the same gate.
    """
    if gate.kind == "CNOT":
        apply_x_inplace(amps, num_qubits, gate.target, gate.controls)
    else:
        u00, u01, u10, u11 = _gate_coeffs(gate)
        apply_1q_inplace(
            amps, num_qubits, u00, u01, u10, u11, gate.target, gate.controls
        )


def apply_1q_inplace(
    amps: np.ndarray,
    num_qubits: int,
    u00,
    u01,
    u10,
    u11,
    target: int,
    controls: Sequence[int] = (),
) -> None:
    """In-place (controlled) single-qubit unitary on batched amplitudes.

    ``amps`` has shape ``(..., 2**num_qubits)``.  The matrix entries may be
    scalars, or arrays shaped like the batch to give every row its own
    rotation (used for embedding many image windows at once).
    """
    batch_shape = amps.shape[:-1]
    view = amps.reshape(batch_shape + (2,) * num_qubits)
    ndim = view.ndim

    def axis(qubit: int) -> int:
        return ndim - 1 - qubit

    index: list = [slice(None)] * ndim
    for c in controls:
        index[axis(c)] = 1
    sub = view[tuple(index)]
    # integer-indexing the control axes drops them, shifting the target axis
    # left once per control that sat on a lower axis number
    target_axis = axis(target) - sum(1 for c in controls if c > target)

    sel0: list = [slice(None)] * sub.ndim
    sel1: list = [slice(None)] * sub.ndim
    sel0[target_axis] = 0
    sel1[target_axis] = 1
    a0 = sub[tuple(sel0)].copy()
    a1 = sub[tuple(sel1)]

    def per_row(u):
        u = np.asarray(u)
        if u.ndim == 0:
            return u
        # align a batch-shaped coefficient against the qubit axes on the right
        return u.reshape(u.shape + (1,) * (a0.ndim - u.ndim))

    u00, u01, u10, u11 = map(per_row, (u00, u01, u10, u11))
    sub[tuple(sel0)] = u00 * a0 + u01 * a1
    sub[tuple(sel1)] = u10 * a0 + u11 * a1


def apply_x_inplace(
    amps: np.ndarray, num_qubits: int, target: int, controls: Sequence[int]
) -> None:
    """In-place (multi-)controlled X: swap the target-0/1 amplitude pairs."""
    batch_shape = amps.shape[:-1]
    view = amps.reshape(batch_shape + (2,) * num_qubits)
    ndim = view.ndim

    index: list = [slice(None)] * ndim
    for c in controls:
        index[ndim - 1 - c] = 1
    sub = view[tuple(index)]
    target_axis = (ndim - 1 - target) - sum(1 for c in controls if c > target)

    sel0: list = [slice(None)] * sub.ndim
    sel1: list = [slice(None)] * sub.ndim
    sel0[target_axis] = 0
    sel1[target_axis] = 1
    tmp = sub[tuple(sel0)].copy()
    sub[tuple(sel0)] = sub[tuple(sel1)]
    sub[tuple(sel1)] = tmp
