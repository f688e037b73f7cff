"""State-vector simulation of the {H, CNOT, R_pi/8, oracle, measure} gate set.

Conventions, fixed here once and used everywhere:

* Qubit ordering is little-endian: qubit 0 is the least significant bit of a
  basis index, so a contiguous block [start, start + width) encodes the
  sub-index (i >> start) & (2^width - 1).
* Basis labels: bit value 0 <-> sign +1, bit value 1 <-> sign -1.  The
  all-zero index is the initialization state.  A measurement of qubit q
  returns the sign (+1 for bit 0, -1 for bit 1) with the Born probability
  and collapses the state.
* An oracle for a sign string s multiplies the amplitude of sub-index i of
  its block by s[i] when i < len(s) and leaves larger sub-indices fixed.
* Controlled gates act when the control bit is 1 (the -1 label).

Unitary kernels mutate the amplitude array in place; a StateVector is owned
by one logical thread while it is being mutated.  Measurement is the only
operation that consumes randomness, always from a caller-provided generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from ._bits import base64_to_signs, signs_to_base64
from .boolean_fourier import SignVector
from .errors import ResourceLimitError

__all__ = [
    "DEFAULT_QUBIT_CAP",
    "StateVector",
    "Hadamard",
    "CNot",
    "RPi8",
    "Oracle",
    "Measure",
    "Gate",
    "Circuit",
    "apply_gate",
    "simulate",
    "controlled_h",
    "controlled_h_gates",
    "not_gates",
    "e_operator",
    "e_operator_gates",
    "swap_test",
    "swap_test_probability",
    "swap_test_shots",
    "bell_pairs",
    "bell_prep_gates",
    "circuit_to_json",
    "circuit_from_json",
    "verify_controlled_h_decomposition",
]

DEFAULT_QUBIT_CAP = 26

_COS8 = math.cos(math.pi / 8)
_SIN8 = math.sin(math.pi / 8)
_INV_SQRT2 = 1.0 / math.sqrt(2.0)


class StateVector:
    """Normalized complex amplitude vector over m qubits."""

    __slots__ = ("m", "amps")

    def __init__(self, m: int, amps: np.ndarray, *, cap: int = DEFAULT_QUBIT_CAP):
        if m < 1:
            raise ValueError(f"qubit count must be positive, got {m}")
        if m > cap:
            raise ResourceLimitError(f"{m} qubits exceeds the cap of {cap}")
        amps = np.asarray(amps, dtype=np.complex128)
        if amps.shape != (1 << m,):
            raise ValueError(
                f"amplitude vector for m={m} must have length {1 << m}")
        self.m = m
        self.amps = amps

    @classmethod
    def zero(cls, m: int, *, cap: int = DEFAULT_QUBIT_CAP) -> "StateVector":
        """The all-zero basis state (every register at the +1 label)."""
        amps = np.zeros(1 << m, dtype=np.complex128)
        amps[0] = 1.0
        return cls(m, amps, cap=cap)

    @classmethod
    def from_amplitudes(cls, amps: np.ndarray, *,
                        cap: int = DEFAULT_QUBIT_CAP) -> "StateVector":
        amps = np.asarray(amps, dtype=np.complex128)
        m = int(amps.shape[0]).bit_length() - 1
        if amps.ndim != 1 or (1 << m) != amps.shape[0]:
            raise ValueError("amplitude vector length must be a power of two")
        state = cls(m, amps.copy(), cap=cap)
        if abs(state.norm() - 1.0) > 1e-9:
            raise ValueError(f"state is not normalized: |amps| = {state.norm()}")
        return state

    def copy(self) -> "StateVector":
        return StateVector(self.m, self.amps.copy(), cap=self.m)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def _check_qubit(self, q: int):
        if not 0 <= q < self.m:
            raise ValueError(f"qubit {q} out of range for m={self.m}")


# ---------------------------------------------------------------------------
# Gates

@dataclass(frozen=True)
class Hadamard:
    q: int


@dataclass(frozen=True)
class CNot:
    control: int
    target: int

    def __post_init__(self):
        if self.control == self.target:
            raise ValueError("CNOT control and target must differ")


@dataclass(frozen=True)
class RPi8:
    """Rotation by pi/8: [[cos, -sin], [sin, cos]]; its 16th power is I."""

    q: int


@dataclass(frozen=True)
class Oracle:
    """Sign oracle on the contiguous qubit block [start, start + width)."""

    signs: SignVector
    start: int
    width: int = -1  # derived from len(signs) when left at the sentinel

    def __post_init__(self):
        needed = max(1, (self.signs.n - 1).bit_length())
        if self.width == -1:
            object.__setattr__(self, "width", needed)
        elif self.width != needed:
            raise ValueError(
                f"oracle block width must be ceil(log2({self.signs.n})) = "
                f"{needed}, got {self.width}")


@dataclass(frozen=True)
class Measure:
    q: int


Gate = Union[Hadamard, CNot, RPi8, Oracle, Measure]


@dataclass
class Circuit:
    """An ordered gate list; ``size`` is the operator count."""

    m: int
    gates: list = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.gates)


# ---------------------------------------------------------------------------
# Kernels (in-place on the raw amplitude array)

def _pair_view(amps: np.ndarray, q: int) -> np.ndarray:
    """View with axis 1 enumerating the value of bit q."""
    return amps.reshape(-1, 2, 1 << q)


def _apply_h(amps: np.ndarray, q: int):
    view = _pair_view(amps, q)
    a0 = view[:, 0, :]
    a1 = view[:, 1, :]
    top = (a0 + a1) * _INV_SQRT2
    bot = (a0 - a1) * _INV_SQRT2
    view[:, 0, :] = top
    view[:, 1, :] = bot


def _apply_r(amps: np.ndarray, q: int):
    view = _pair_view(amps, q)
    a0 = view[:, 0, :]
    a1 = view[:, 1, :]
    top = _COS8 * a0 - _SIN8 * a1
    bot = _SIN8 * a0 + _COS8 * a1
    view[:, 0, :] = top
    view[:, 1, :] = bot


def _apply_cnot(amps: np.ndarray, control: int, target: int):
    hi, lo = max(control, target), min(control, target)
    view = amps.reshape(-1, 2, 1 << (hi - lo - 1), 2, 1 << lo)
    if control == hi:
        sel0 = (slice(None), 1, slice(None), 0, slice(None))
        sel1 = (slice(None), 1, slice(None), 1, slice(None))
    else:
        sel0 = (slice(None), 0, slice(None), 1, slice(None))
        sel1 = (slice(None), 1, slice(None), 1, slice(None))
    tmp = view[sel0].copy()
    view[sel0] = view[sel1]
    view[sel1] = tmp


def _apply_oracle(amps: np.ndarray, signs: np.ndarray, start: int, width: int):
    block = 1 << width
    factor = np.ones(block)
    factor[: signs.shape[0]] = signs
    view = amps.reshape(-1, block, 1 << start)
    view *= factor[None, :, None]


def _bit_probabilities(amps: np.ndarray, q: int) -> tuple[float, float]:
    view = _pair_view(amps, q)
    sq = np.square(view.real) + np.square(view.imag)
    p0 = float(sq[:, 0, :].sum())
    p1 = float(sq[:, 1, :].sum())
    if abs(p0 + p1 - 1.0) > 1e-6:
        raise ValueError(
            f"measurement on a denormalized state: total probability {p0 + p1}")
    return p0, p1


def _apply_measure(amps: np.ndarray, q: int, rng: np.random.Generator) -> int:
    p0, _ = _bit_probabilities(amps, q)
    bit = 0 if rng.uniform() < p0 else 1
    view = _pair_view(amps, q)
    view[:, 1 - bit, :] = 0.0
    keep = p0 if bit == 0 else 1.0 - p0
    view /= math.sqrt(keep)
    return 1 if bit == 0 else -1


# ---------------------------------------------------------------------------
# Public operations

def apply_gate(state: StateVector, gate: Gate,
               rng: np.random.Generator | None = None) -> int | None:
    """Apply one gate in place; measurement returns its +-1 outcome.

    Unitary gates preserve the norm; measurement collapses and renormalizes
    the state, drawing only from the provided generator.
    """
    if isinstance(gate, Hadamard):
        state._check_qubit(gate.q)
        _apply_h(state.amps, gate.q)
        return None
    if isinstance(gate, RPi8):
        state._check_qubit(gate.q)
        _apply_r(state.amps, gate.q)
        return None
    if isinstance(gate, CNot):
        state._check_qubit(gate.control)
        state._check_qubit(gate.target)
        _apply_cnot(state.amps, gate.control, gate.target)
        return None
    if isinstance(gate, Oracle):
        state._check_qubit(gate.start)
        state._check_qubit(gate.start + gate.width - 1)
        _apply_oracle(state.amps, gate.signs.signs, gate.start, gate.width)
        return None
    if isinstance(gate, Measure):
        state._check_qubit(gate.q)
        if rng is None:
            raise ValueError("measurement requires a random generator")
        return _apply_measure(state.amps, gate.q, rng)
    raise TypeError(f"unknown gate {gate!r}")


def simulate(circuit: Circuit, rng: np.random.Generator | None = None,
             state: StateVector | None = None,
             cap: int = DEFAULT_QUBIT_CAP) -> tuple[StateVector, list[int], int]:
    """Run a circuit from the all-zero state (or ``state``) and return
    (final state, measurement outcomes in order, operator count)."""
    if state is None:
        state = StateVector.zero(circuit.m, cap=cap)
    elif state.m != circuit.m:
        raise ValueError(f"state has {state.m} qubits, circuit needs {circuit.m}")
    outcomes = []
    for gate in circuit.gates:
        out = apply_gate(state, gate, rng)
        if out is not None:
            outcomes.append(out)
    return state, outcomes, circuit.size


def not_gates(q: int) -> list:
    """Bit flip on qubit q synthesized from the native set: X = R_pi/8^2 H."""
    return [Hadamard(q), RPi8(q), RPi8(q)]


def controlled_h_gates(control: int, target: int) -> list:
    """Controlled Hadamard as the native five-gate sequence on the target:
    H, R_pi/8, CNOT, H, R_pi/8."""
    if control == target:
        raise ValueError("controlled-H control and target must differ")
    return [Hadamard(target), RPi8(target), CNot(control, target),
            Hadamard(target), RPi8(target)]


_ch_checked = False


def verify_controlled_h_decomposition(tol: float = 1e-10) -> float:
    """Max deviation of the five-gate sequence from diag(I, H) up to global
    phase, reconstructed column by column on two qubits."""
    gates = controlled_h_gates(control=1, target=0)
    built = np.zeros((4, 4), dtype=np.complex128)
    for col in range(4):
        amps = np.zeros(4, dtype=np.complex128)
        amps[col] = 1.0
        for g in gates:
            apply_gate(StateVector(2, amps), g)
        built[:, col] = amps
    want = np.eye(4, dtype=np.complex128)
    want[2:, 2:] = np.array([[1, 1], [1, -1]]) * _INV_SQRT2
    k = np.unravel_index(np.abs(built).argmax(), built.shape)
    phase = want[k] / built[k]
    deviation = float(np.abs(built * phase - want).max())
    if deviation > tol:
        raise AssertionError(
            "controlled-H gate sequence does not reproduce diag(I, H) up to "
            f"global phase (deviation {deviation:.3e}); refusing to proceed")
    return deviation


def controlled_h(state: StateVector, control: int, target: int,
                 use_direct: bool = False) -> StateVector:
    """Apply H to ``target`` when ``control`` carries the -1 label (bit 1),
    identity otherwise.

    The default path runs the native five-gate sequence, validated once per
    process against the directly constructed block matrix; ``use_direct``
    applies the block matrix itself.
    """
    state._check_qubit(control)
    state._check_qubit(target)
    if control == target:
        raise ValueError("controlled-H control and target must differ")
    if use_direct:
        # Mix the target pair only where the control bit is 1.
        view = _pair_view(state.amps, target)
        idx = np.arange(state.amps.shape[0]).reshape(-1, 2, 1 << target)
        on = ((idx[:, 0, :] >> control) & 1) == 1
        a0 = view[:, 0, :].copy()
        a1 = view[:, 1, :].copy()
        view[:, 0, :] = np.where(on, (a0 + a1) * _INV_SQRT2, a0)
        view[:, 1, :] = np.where(on, (a0 - a1) * _INV_SQRT2, a1)
        return state
    global _ch_checked
    if not _ch_checked:
        verify_controlled_h_decomposition()
        _ch_checked = True
    for g in controlled_h_gates(control, target):
        apply_gate(state, g)
    return state


def _block_list(block: Sequence[int]) -> list[int]:
    return list(block)


def e_operator_gates(block_a: Sequence[int], block_b: Sequence[int]) -> list:
    """CNOT cascade from block_a bit j to block_b bit j."""
    a, b = _block_list(block_a), _block_list(block_b)
    if len(a) != len(b):
        raise ValueError(f"blocks must have equal length, got {len(a)} and {len(b)}")
    if set(a) & set(b):
        raise ValueError("blocks must be disjoint")
    return [CNot(ai, bi) for ai, bi in zip(a, b)]


def e_operator(state: StateVector, block_a: Sequence[int],
               block_b: Sequence[int]) -> StateVector:
    """Entangle/erase operator: on basis states |a>|b> -> |a>|b xor a>, so
    |i>|i> and |i>|0> are exchanged.  Self-inverse."""
    for g in e_operator_gates(block_a, block_b):
        apply_gate(state, g)
    return state


def swap_test(state: StateVector, control: int, rng: np.random.Generator) -> int:
    """Swap test on a state (|0>|phi> + |1>|psi>)/sqrt(2) over the control
    qubit: Hadamard the control, measure it, and negate the outcome, so
    P[outcome = 1] = (1 + <phi|psi>)/2.  Consumes the state."""
    apply_gate(state, Hadamard(control))
    sign = apply_gate(state, Measure(control), rng)
    return 1 if sign == 1 else 0


def swap_test_probability(state: StateVector, control: int) -> float:
    """P[outcome = 1] of the swap test, without consuming the state."""
    work = state.copy()
    apply_gate(work, Hadamard(control))
    p0, _ = _bit_probabilities(work.amps, control)
    return p0


def swap_test_shots(state: StateVector, control: int, shots: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Outcomes of ``shots`` swap tests, each on a fresh copy of the state.

    The pre-measurement evolution is deterministic, so the shots are i.i.d.
    Bernoulli draws at the exact circuit probability; one uniform variate is
    consumed per shot, as a one-shot run would.
    """
    p = swap_test_probability(state, control)
    return (rng.uniform(size=shots) < p).astype(np.uint8)


def bell_prep_gates(m: int) -> list:
    """Prepare (1/sqrt(2^m)) sum_i |i>|i> from all-zero: Hadamard the first
    m registers, then the entangle cascade onto the second m."""
    gates = [Hadamard(q) for q in range(m)]
    gates += e_operator_gates(range(m), range(m, 2 * m))
    return gates


def bell_pairs(m: int, *, cap: int = DEFAULT_QUBIT_CAP) -> StateVector:
    """m shared Bell pairs as one 2m-qubit state; amplitude 2^{-m/2} on
    every doubled index a + 2^m a, zero elsewhere."""
    if 2 * m > cap:
        raise ResourceLimitError(f"{2 * m} qubits exceeds the cap of {cap}")
    state = StateVector.zero(2 * m, cap=cap)
    for g in bell_prep_gates(m):
        apply_gate(state, g)
    return state


# ---------------------------------------------------------------------------
# Circuit serialization

def _gate_to_obj(gate: Gate) -> dict:
    if isinstance(gate, Hadamard):
        return {"kind": "H", "q": gate.q}
    if isinstance(gate, CNot):
        return {"kind": "CNOT", "c": gate.control, "t": gate.target}
    if isinstance(gate, RPi8):
        return {"kind": "R_PI8", "q": gate.q}
    if isinstance(gate, Oracle):
        return {"kind": "ORACLE", "block": [gate.start, gate.width],
                "n": gate.signs.n, "signs": signs_to_base64(gate.signs.signs)}
    if isinstance(gate, Measure):
        return {"kind": "MEASURE", "q": gate.q}
    raise TypeError(f"unknown gate {gate!r}")


def _gate_from_obj(obj: dict) -> Gate:
    kind = obj["kind"]
    if kind == "H":
        return Hadamard(obj["q"])
    if kind == "CNOT":
        return CNot(obj["c"], obj["t"])
    if kind == "R_PI8":
        return RPi8(obj["q"])
    if kind == "ORACLE":
        signs = SignVector(base64_to_signs(obj["signs"], obj["n"]))
        return Oracle(signs, obj["block"][0], obj["block"][1])
    if kind == "MEASURE":
        return Measure(obj["q"])
    raise ValueError(f"unknown gate kind {kind!r}")


def circuit_to_json(circuit: Circuit) -> str:
    import json
    return json.dumps({"m": circuit.m,
                       "gates": [_gate_to_obj(g) for g in circuit.gates]})


def circuit_from_json(text: str) -> Circuit:
    import json
    obj = json.loads(text)
    return Circuit(obj["m"], [_gate_from_obj(g) for g in obj["gates"]])
