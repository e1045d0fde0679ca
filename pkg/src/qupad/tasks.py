"""Training objectives: Hamiltonian energies and a small classification task."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ansatz import angle_encoding
from .quantum import (Circuit, Observable, adjoint_gradient, apply_matrix, expectation,
                      parameter_shift_gradient, simulate)


def tfim_hamiltonian(n: int, h: float = 1.0) -> Observable:
    """Open-chain transverse-field Ising model -sum Z_i Z_{i+1} - h sum X_i."""
    terms = []
    for i in range(n - 1):
        label = ["I"] * n
        label[n - 1 - i] = label[n - 2 - i] = "Z"
        terms.append((-1.0, "".join(label)))
    for i in range(n):
        label = ["I"] * n
        label[n - 1 - i] = "X"
        terms.append((-h, "".join(label)))
    return Observable(n, tuple(terms))


def ground_energy(obs: Observable) -> float:
    return float(np.linalg.eigvalsh(obs.to_matrix())[0])


def _gradient(circuit, obs, params, source, initial=None) -> np.ndarray:
    if source == "shift":
        return parameter_shift_gradient(circuit, obs, params, initial)
    return adjoint_gradient(circuit, obs, params, initial)


@dataclass
class VQETask:
    observable: Observable
    kind: str = "vqe"

    def loss(self, circuit: Circuit, params) -> float:
        return expectation(simulate(circuit, params), self.observable)

    def grad(self, circuit: Circuit, params, source: str = "adjoint") -> np.ndarray:
        return _gradient(circuit, self.observable, params, source)

    def to_dict(self) -> dict:
        return {"kind": "vqe", "observable": self.observable.to_dict()}


def _z_label(n: int, q: int) -> str:
    label = ["I"] * n
    label[n - 1 - q] = "Z"
    return "".join(label)


def default_readout(n_classes: int = 3, n_qubits: int = 4) -> np.ndarray:
    w = np.zeros((n_classes, n_qubits))
    for k in range(n_classes):
        w[k, k % n_qubits] = 1.0
        w[k, (k + 1) % n_qubits] = -1.0
    return w


@dataclass
class ClassifyTask:
    """Cross-entropy over softmax(scale * W <Z>), inputs angle-encoded on Ry."""

    features: np.ndarray
    labels: np.ndarray
    readout: np.ndarray = field(default_factory=default_readout)
    scale: float = 3.0
    kind: str = "classify"

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        self.readout = np.asarray(self.readout, dtype=float)
        if self.features.ndim != 2 or self.features.shape[1] != self.readout.shape[1]:
            raise ValueError("feature width must match the readout map's qubit count")

    @property
    def n_qubits(self) -> int:
        return self.features.shape[1]

    def _z(self, circuit, params, x) -> np.ndarray:
        psi = simulate(circuit, params, initial=angle_encoding(x))
        n = circuit.n
        return np.array([expectation(psi, Observable(n, ((1.0, _z_label(n, q)),)))
                         for q in range(self.n_qubits)])

    def class_probs(self, circuit, params, x) -> np.ndarray:
        logits = self.scale * self.readout @ self._z(circuit, params, x)
        e = np.exp(logits - logits.max())
        return e / e.sum()

    def loss(self, circuit: Circuit, params) -> float:
        total = 0.0
        for x, y in zip(self.features, self.labels):
            total -= np.log(max(self.class_probs(circuit, params, x)[y], 1e-300))
        return total / len(self.labels)

    def accuracy(self, circuit: Circuit, params) -> float:
        hits = [np.argmax(self.class_probs(circuit, params, x)) == y
                for x, y in zip(self.features, self.labels)]
        return float(np.mean(hits))

    def grad(self, circuit: Circuit, params, source: str = "adjoint") -> np.ndarray:
        n = circuit.n
        g = np.zeros(len(params))
        for x, y in zip(self.features, self.labels):
            p = self.class_probs(circuit, params, x)
            onehot = np.eye(len(p))[y]
            # d CE / d <Z_q> collapses into one weighted observable per sample
            coeff = self.scale * self.readout.T @ (p - onehot)
            obs = Observable(n, tuple((float(c), _z_label(n, q)) for q, c in enumerate(coeff)))
            g += _gradient(circuit, obs, params, source, angle_encoding(x))
        return g / len(self.labels)

    def to_dict(self) -> dict:
        return {"kind": "classify", "features": self.features.tolist(),
                "labels": self.labels.tolist(), "readout": self.readout.tolist(),
                "scale": self.scale}


def make_classification(n_samples: int = 60, n_classes: int = 3, n_features: int = 4,
                        seed: int = 0, spread: float = 0.25) -> ClassifyTask:
    """Gaussian blobs in angle space, one centre per class."""
    rng = np.random.default_rng(seed)
    centres = rng.uniform(0.3, np.pi - 0.3, size=(n_classes, n_features))
    labels = np.arange(n_samples) % n_classes
    feats = centres[labels] + rng.normal(0.0, spread, size=(n_samples, n_features))
    return ClassifyTask(np.clip(feats, 0.0, np.pi), labels,
                        default_readout(n_classes, n_features))


def task_from_dict(d: dict):
    if d["kind"] == "vqe":
        return VQETask(Observable.from_dict(d["observable"]))
    if d["kind"] == "classify":
        return ClassifyTask(d["features"], d["labels"], d["readout"], d.get("scale", 3.0))
    raise ValueError(f"unknown task kind {d['kind']!r}")


# -- estimating energies from shot counts ----------------------------------

def measurement_groups(obs: Observable) -> list[str]:
    """Greedy qubit-wise commuting grouping; each group is a basis label."""
    groups: list[list[str]] = []
    for _, label in obs.terms:
        for g in groups:
            if all(a == "I" or b == "I" or a == b for a, b in zip(label, g)):
                for i, ch in enumerate(label):
                    if ch != "I":
                        g[i] = ch
                break
        else:
            groups.append(list(label))
    return ["".join(g).replace("I", "Z") for g in groups]


def basis_rotated(circuit: Circuit, basis: str) -> Circuit:
    """Append rotations mapping ``basis`` onto Z, then measure all qubits."""
    c = circuit.copy()
    n = c.n
    for pos, ch in enumerate(basis):
        q = n - 1 - pos
        if ch == "X":
            c.h(q)
        elif ch == "Y":
            c.rx(q, np.pi / 2)
    c.measure()
    return c


def term_from_counts(label: str, counts: dict[str, int]) -> float:
    support = [i for i, ch in enumerate(label) if ch != "I"]
    shots = sum(counts.values())
    total = 0
    for bits, k in counts.items():
        parity = sum(bits[i] == "1" for i in support) % 2
        total += -k if parity else k
    return total / shots


def energy_from_counts(obs: Observable, counts_by_basis: dict[str, dict[str, int]]) -> float:
    energy = 0.0
    for c, label in obs.terms:
        basis = next(b for b in counts_by_basis
                     if all(a == "I" or a == bb for a, bb in zip(label, b)))
        energy += c * term_from_counts(label, counts_by_basis[basis])
    return energy


def rotated_state(state: np.ndarray, basis: str) -> np.ndarray:
    """Statevector after the basis change of :func:`basis_rotated` (for oracles)."""
    from .quantum import gate_matrix

    n = len(basis)
    psi = state[None, :]
    for pos, ch in enumerate(basis):
        q = n - 1 - pos
        if ch == "X":
            psi = apply_matrix(psi, gate_matrix("sq", (np.pi / 2, 0.0, np.pi)), (q,), n)
        elif ch == "Y":
            psi = apply_matrix(psi, gate_matrix("sq", (np.pi / 2, -np.pi / 2, np.pi / 2)), (q,), n)
    return psi[0]
