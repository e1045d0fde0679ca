"""Exact statevector simulation of small circuits.

Conventions used throughout the package:

* little-endian: qubit 0 is the least significant bit of a basis index, and
  both bitstrings and Pauli labels are written with qubit 0 rightmost
  (``"01"`` means qubit 0 is 1, ``"ZI"`` is Z on qubit 1);
* ``rzx(theta)`` on ``(control, target)`` is ``exp(-i theta/2 Z_c X_t)``;
* ``sq(theta, phi, lam)`` is the physical single-qubit pulse
  ``Rz(phi) Ry(theta) Rz(lam)``; ``rz`` is virtual (a frame change).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np

from .errors import CapacityError, UnsupportedGateError

RZ, SQ, RZX, CX, MEASURE = "rz", "sq", "rzx", "cx", "measure"

# kind -> (number of qubits, number of angle slots); None means "any"
_SIGNATURE = {RZ: (1, 1), SQ: (1, 3), RZX: (2, 1), CX: (2, 0), MEASURE: (None, 0)}
SHIFTABLE = frozenset({RZ, SQ, RZX})
MAX_UNITARY_QUBITS = 6


@dataclass(frozen=True)
class Param:
    """Reference to entry ``index`` of a circuit's parameter vector."""

    index: int


Slot = Union[float, Param]


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    args: tuple[Slot, ...] = ()
    # single-qubit correction folded into the post pulse of the preceding CR gate
    merged: bool = False

    def __post_init__(self):
        if self.kind not in _SIGNATURE:
            raise UnsupportedGateError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "args", tuple(self.args))
        nq, na = _SIGNATURE[self.kind]
        if nq is not None and len(self.qubits) != nq:
            raise ValueError(f"{self.kind} acts on {nq} qubit(s), got {self.qubits}")
        if len(self.args) != na:
            raise ValueError(f"{self.kind} takes {na} angle(s), got {len(self.args)}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"{self.kind} needs distinct qubits, got {self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise ValueError(f"negative qubit index in {self.qubits}")

    @property
    def is_parameterized(self) -> bool:
        return any(isinstance(a, Param) for a in self.args)

    def angles(self, params: Sequence[float] | None = None) -> tuple[float, ...]:
        out = []
        for a in self.args:
            if isinstance(a, Param):
                if params is None or a.index >= len(params):
                    raise IndexError(f"parameter {a.index} is not bound")
                out.append(float(params[a.index]))
            else:
                out.append(float(a))
        return tuple(out)

    def to_dict(self) -> dict:
        def enc(a):
            return {"p": a.index} if isinstance(a, Param) else float(a)

        if not self.args:
            param = None
        elif self.kind == SQ:
            param = [enc(a) for a in self.args]
        else:
            param = enc(self.args[0])
        d = {"kind": self.kind, "qubits": list(self.qubits), "param": param}
        if self.merged:
            d["merged"] = True
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Gate":
        def dec(a):
            return Param(int(a["p"])) if isinstance(a, dict) else float(a)

        p = d.get("param")
        if p is None:
            args = ()
        elif isinstance(p, list):
            args = tuple(dec(a) for a in p)
        else:
            args = (dec(p),)
        return cls(d["kind"], tuple(d["qubits"]), args, bool(d.get("merged", False)))


@dataclass
class Circuit:
    """Ordered gate list over ``n`` qubits plus a parameter vector."""

    n: int
    gates: list[Gate] = field(default_factory=list)
    params: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=float).reshape(-1)
        if self.n < 1:
            raise ValueError("a circuit needs at least one qubit")

    # -- building -------------------------------------------------------
    def new_param(self, value: float = 0.0) -> Param:
        self.params = np.append(self.params, float(value))
        return Param(len(self.params) - 1)

    def append(self, gate: Gate) -> "Circuit":
        self.gates.append(gate)
        return self

    def rz(self, q, a):
        return self.append(Gate(RZ, (q,), (a,)))

    def sq(self, q, theta, phi, lam):
        return self.append(Gate(SQ, (q,), (theta, phi, lam)))

    def rx(self, q, a):
        return self.sq(q, a, -math.pi / 2, math.pi / 2)

    def ry(self, q, a):
        return self.sq(q, a, 0.0, 0.0)

    def h(self, q):
        return self.sq(q, math.pi / 2, 0.0, math.pi)

    def x(self, q):
        return self.sq(q, math.pi, 0.0, math.pi)

    def rzx(self, control, target, a):
        return self.append(Gate(RZX, (control, target), (a,)))

    def cx(self, control, target):
        return self.append(Gate(CX, (control, target)))

    def measure(self, *qubits):
        return self.append(Gate(MEASURE, tuple(qubits) or tuple(range(self.n))))

    # -- inspection -----------------------------------------------------
    @property
    def num_params(self) -> int:
        return len(self.params)

    def validate(self) -> None:
        for i, g in enumerate(self.gates):
            if any(q >= self.n for q in g.qubits):
                raise ValueError(f"gate {i} ({g.kind}) touches qubit >= {self.n}")
            for a in g.args:
                if isinstance(a, Param) and not 0 <= a.index < self.num_params:
                    raise ValueError(f"gate {i} references missing parameter {a.index}")

    def param_slots(self) -> list[tuple[int, int, int]]:
        """(gate index, slot index, parameter index) for every bound slot."""
        return [
            (gi, si, a.index)
            for gi, g in enumerate(self.gates)
            for si, a in enumerate(g.args)
            if isinstance(a, Param)
        ]

    def rzx_param_indices(self) -> list[int]:
        return sorted({a.index for g in self.gates if g.kind == RZX
                       for a in g.args if isinstance(a, Param)})

    def bind(self, params: Sequence[float] | None = None) -> "Circuit":
        """Copy with every parameter slot replaced by its numeric value."""
        p = self.params if params is None else np.asarray(params, dtype=float)
        gates = [replace(g, args=g.angles(p)) if g.is_parameterized else g for g in self.gates]
        return Circuit(self.n, gates)

    def copy(self) -> "Circuit":
        return Circuit(self.n, list(self.gates), self.params.copy())

    def to_dict(self) -> dict:
        return {"n": self.n, "gates": [g.to_dict() for g in self.gates],
                "params": [float(v) for v in self.params]}

    @classmethod
    def from_dict(cls, d: dict) -> "Circuit":
        c = cls(int(d["n"]), [Gate.from_dict(g) for g in d["gates"]], d.get("params", []))
        c.validate()
        return c


@dataclass(frozen=True)
class Observable:
    """Real linear combination of Pauli strings (qubit 0 rightmost)."""

    n: int
    terms: tuple[tuple[float, str], ...]

    def __post_init__(self):
        terms = tuple((float(c), str(p).upper()) for c, p in self.terms)
        for c, p in terms:
            if len(p) != self.n or set(p) - set("IXYZ"):
                raise ValueError(f"bad Pauli label {p!r} for {self.n} qubits")
            if not math.isfinite(c):
                raise ValueError(f"non-finite coefficient on {p}")
        object.__setattr__(self, "terms", terms)

    def to_matrix(self) -> np.ndarray:
        out = np.zeros((2 ** self.n, 2 ** self.n), dtype=complex)
        for c, label in self.terms:
            m = np.ones((1, 1), dtype=complex)
            for ch in label:
                m = np.kron(m, PAULI[ch])
            out += c * m
        return out

    def to_dict(self) -> dict:
        return {"n": self.n, "terms": [[c, p] for c, p in self.terms]}

    @classmethod
    def from_dict(cls, d: dict) -> "Observable":
        return cls(int(d["n"]), tuple((c, p) for c, p in d["terms"]))


# -- matrices -------------------------------------------------------------

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
ZX = np.kron(PAULI["Z"], PAULI["X"])  # control is the high factor
CX_MATRIX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def rz_matrix(a: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)])


def ry_matrix(a: float) -> np.ndarray:
    c, s = math.cos(a / 2), math.sin(a / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def sq_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    return rz_matrix(phi) @ ry_matrix(theta) @ rz_matrix(lam)


def rzx_matrix(a: float) -> np.ndarray:
    return math.cos(a / 2) * np.eye(4) - 1j * math.sin(a / 2) * ZX


def gate_matrix(kind: str, angles: Sequence[float]) -> np.ndarray:
    if kind == RZ:
        return rz_matrix(*angles)
    if kind == SQ:
        return sq_matrix(*angles)
    if kind == RZX:
        return rzx_matrix(*angles)
    if kind == CX:
        return CX_MATRIX
    raise UnsupportedGateError(f"{kind} has no unitary")


# -- state evolution ------------------------------------------------------

def zero_state(n: int) -> np.ndarray:
    psi = np.zeros(2 ** n, dtype=complex)
    psi[0] = 1.0
    return psi


def apply_matrix(states: np.ndarray, mat: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Apply ``mat`` to ``qubits`` of a batch of states with shape (B, 2**n).

    ``mat`` may be a single (2**k, 2**k) matrix or a per-state stack of shape
    (B, 2**k, 2**k). The first listed qubit is the most significant factor.
    """
    b, k = states.shape[0], len(qubits)
    psi = states.reshape((b,) + (2,) * n)
    axes = [n - q for q in qubits]
    front = list(range(1, k + 1))
    psi = np.moveaxis(psi, axes, front)
    shape = psi.shape
    psi = np.matmul(mat, psi.reshape(b, 2 ** k, -1)).reshape(shape)
    return np.moveaxis(psi, front, axes).reshape(b, 2 ** n)


def _check_qubits(gate: Gate, n: int) -> None:
    if any(q >= n for q in gate.qubits):
        raise ValueError(f"{gate.kind} on {gate.qubits} is out of range for {n} qubits")


def apply_gate(state: np.ndarray, gate: Gate, params: Sequence[float] | None = None) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    n = int(round(math.log2(state.size)))
    if 2 ** n != state.size:
        raise ValueError("state length is not a power of two")
    _check_qubits(gate, n)
    if gate.kind == MEASURE:
        return state.copy()
    mat = gate_matrix(gate.kind, gate.angles(params))
    return apply_matrix(state[None, :], mat, gate.qubits, n)[0]


def _ops(circuit: Circuit, params) -> list[tuple[np.ndarray, tuple[int, ...]]]:
    ops = []
    for g in circuit.gates:
        _check_qubits(g, circuit.n)
        if g.kind != MEASURE:
            ops.append((gate_matrix(g.kind, g.angles(params)), g.qubits))
    return ops


def _evolve(states: np.ndarray, ops, n: int) -> np.ndarray:
    for mat, qubits in ops:
        states = apply_matrix(states, mat, qubits, n)
    return states


def simulate(circuit: Circuit, params: Sequence[float] | None = None,
             initial: np.ndarray | None = None) -> np.ndarray:
    p = circuit.params if params is None else params
    psi = zero_state(circuit.n) if initial is None else np.asarray(initial, dtype=complex)
    return _evolve(psi[None, :], _ops(circuit, p), circuit.n)[0]


def unitary_of(circuit: Circuit, params: Sequence[float] | None = None) -> np.ndarray:
    if circuit.n > MAX_UNITARY_QUBITS:
        raise CapacityError(f"dense unitary limited to {MAX_UNITARY_QUBITS} qubits, got {circuit.n}")
    p = circuit.params if params is None else params
    basis = np.eye(2 ** circuit.n, dtype=complex)
    return _evolve(basis, _ops(circuit, p), circuit.n).T


def probabilities(state: np.ndarray) -> np.ndarray:
    return np.abs(np.asarray(state)) ** 2


# -- observables ----------------------------------------------------------

def _pauli_action(label: str, n: int):
    """(index permutation, phase vector) with P|j> = phase[j] |perm[j]>."""
    x_mask = z_mask = 0
    ny = 0
    for pos, ch in enumerate(label):
        q = n - 1 - pos
        if ch in "XY":
            x_mask |= 1 << q
        if ch in "ZY":
            z_mask |= 1 << q
        ny += ch == "Y"
    idx = np.arange(2 ** n)
    parity = np.zeros(2 ** n, dtype=int)
    zm = z_mask
    while zm:
        low = zm & -zm
        parity ^= (idx & low) != 0
        zm ^= low
    phase = (1j ** ny) * (1 - 2 * parity)
    return idx ^ x_mask, phase


def apply_pauli(states: np.ndarray, label: str) -> np.ndarray:
    n = len(label)
    perm, phase = _pauli_action(label, n)
    out = np.empty_like(states)
    out[..., perm] = states * phase
    return out


def apply_observable(state: np.ndarray, obs: Observable) -> np.ndarray:
    out = np.zeros_like(state, dtype=complex)
    for c, label in obs.terms:
        out += c * apply_pauli(state, label)
    return out


def expectation(state: np.ndarray, obs: Observable) -> float:
    state = np.asarray(state, dtype=complex)
    if state.size != 2 ** obs.n:
        raise ValueError(f"state has {state.size} amplitudes, observable needs {2 ** obs.n}")
    val = np.vdot(state, apply_observable(state, obs))
    if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise ArithmeticError(f"expectation has imaginary part {val.imag:.3e}")
    return float(val.real)


def circuit_expectation(circuit: Circuit, obs: Observable, params=None) -> float:
    return expectation(simulate(circuit, params), obs)


# -- sampling -------------------------------------------------------------

def bitstring(index: int, n: int) -> str:
    return format(index, f"0{n}b")


def sample_counts(state: np.ndarray, shots: int, seed: int) -> dict[str, int]:
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p = probabilities(state)
    n = int(round(math.log2(p.size)))
    counts = np.random.default_rng(seed).multinomial(shots, p / p.sum())
    return {bitstring(i, n): int(c) for i, c in enumerate(counts) if c}


def counts_to_probs(counts: dict[str, int], n: int) -> np.ndarray:
    p = np.zeros(2 ** n)
    for k, v in counts.items():
        p[int(k, 2)] += v
    return p / p.sum()


def tvd(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


# -- gradients ------------------------------------------------------------

def _check_shiftable(circuit: Circuit) -> None:
    for gi, _, _ in circuit.param_slots():
        kind = circuit.gates[gi].kind
        if kind not in SHIFTABLE:
            raise UnsupportedGateError(f"gate {gi} ({kind}) cannot be differentiated by shifting")


def _initial(circuit: Circuit, initial) -> np.ndarray:
    return (zero_state(circuit.n) if initial is None else np.asarray(initial, dtype=complex))[None, :]


def parameter_shift_gradient(circuit: Circuit, obs: Observable, params=None,
                             initial: np.ndarray | None = None) -> np.ndarray:
    """Exact gradient from +-pi/2 evaluations of every parameterized slot."""
    p = np.asarray(circuit.params if params is None else params, dtype=float)
    _check_shiftable(circuit)
    grad = np.zeros(len(p))
    positions, k = {}, 0
    for gi, g in enumerate(circuit.gates):
        if g.kind != MEASURE:
            positions[gi] = k
            k += 1
    ops = _ops(circuit, p)
    init = _initial(circuit, initial)
    for gi, si, pi in circuit.param_slots():
        g = circuit.gates[gi]
        k = positions[gi]
        angles = list(g.angles(p))
        vals = []
        for shift in (math.pi / 2, -math.pi / 2):
            shifted = list(angles)
            shifted[si] += shift
            trial = list(ops)
            trial[k] = (gate_matrix(g.kind, shifted), g.qubits)
            vals.append(expectation(_evolve(init, trial, circuit.n)[0], obs))
        grad[pi] += 0.5 * (vals[0] - vals[1])
    return grad


def _generator_derivatives(kind: str, angles: Sequence[float]) -> list[np.ndarray]:
    if kind == RZ:
        return [-0.5j * PAULI["Z"] @ rz_matrix(angles[0])]
    if kind == RZX:
        return [-0.5j * ZX @ rzx_matrix(angles[0])]
    if kind == SQ:
        t, p, l = angles
        a, b, c = rz_matrix(p), ry_matrix(t), rz_matrix(l)
        return [
            a @ (-0.5j * PAULI["Y"] @ b) @ c,
            (-0.5j * PAULI["Z"] @ a) @ b @ c,
            a @ b @ (-0.5j * PAULI["Z"] @ c),
        ]
    raise UnsupportedGateError(f"{kind} has no generator")


def adjoint_gradient(circuit: Circuit, obs: Observable, params=None,
                     initial: np.ndarray | None = None) -> np.ndarray:
    """Reverse-mode gradient of <obs> using one forward and one backward sweep."""
    p = np.asarray(circuit.params if params is None else params, dtype=float)
    _check_shiftable(circuit)
    n = circuit.n
    grad = np.zeros(len(p))
    gates = [g for g in circuit.gates if g.kind != MEASURE]
    mats = [gate_matrix(g.kind, g.angles(p)) for g in gates]
    phi = _evolve(_initial(circuit, initial), list(zip(mats, (g.qubits for g in gates))), n)
    lam = apply_observable(phi, obs)
    for g, m in zip(reversed(gates), reversed(mats)):
        phi = apply_matrix(phi, m.conj().T, g.qubits, n)
        if g.is_parameterized:
            derivs = _generator_derivatives(g.kind, g.angles(p))
            for slot, d in zip(g.args, derivs):
                if isinstance(slot, Param):
                    dphi = apply_matrix(phi, d, g.qubits, n)
                    grad[slot.index] += 2.0 * np.vdot(lam[0], dphi[0]).real
        lam = apply_matrix(lam, m.conj().T, g.qubits, n)
    return grad


def random_state(n: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    return v / np.linalg.norm(v)


def phase_aligned_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Frobenius distance between ``u`` and ``v`` after removing a global phase."""
    overlap = np.vdot(v, u)
    phase = overlap / abs(overlap) if abs(overlap) > 1e-300 else 1.0
    return float(np.linalg.norm(u - phase * v))

