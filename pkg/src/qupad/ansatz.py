"""Hardware-efficient ansatz builders in either two-qubit basis."""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .quantum import Circuit, Param

Pair = tuple[int, int]


def chain_pairs(n: int) -> list[Pair]:
    return [(i, i + 1) for i in range(n - 1)]


def _zz_entangler(c: Circuit, pair: Pair, phi: Param, basis: str) -> None:
    ctl, tgt = pair
    if basis == "rzx":
        c.h(tgt)
        c.rzx(ctl, tgt, phi)
        c.h(tgt)
    elif basis == "cx":
        c.cx(ctl, tgt)
        c.rz(tgt, phi)
        c.cx(ctl, tgt)
    else:
        raise ValueError(f"unknown basis {basis!r}")


def hardware_efficient_ansatz(n: int, layers: int, pairs: Sequence[Pair] | None = None,
                              basis: str = "rzx", seed: int | None = 0,
                              init_scale: float = 0.1) -> Circuit:
    """``layers`` blocks of Ry and Rz on every qubit followed by ZZ(phi)
    entanglers along ``pairs`` (a chain by default), then a closing Ry layer.

    Both bases produce the same unitary for the same parameter vector.
    """
    pairs = chain_pairs(n) if pairs is None else [tuple(p) for p in pairs]
    rng = np.random.default_rng(seed)

    def new():
        v = 0.0 if seed is None else float(rng.normal(0.0, init_scale))
        return c.new_param(v)

    c = Circuit(n)
    for _ in range(layers):
        for q in range(n):
            c.ry(q, new())
        for q in range(n):
            c.rz(q, new())
        for p in pairs:
            _zz_entangler(c, p, new(), basis)
    for q in range(n):
        c.ry(q, new())
    return c


def angle_encoding(x: Sequence[float]) -> np.ndarray:
    """Product state with Ry(x_i) applied to |0> of qubit i."""
    psi = np.ones(1, dtype=complex)
    for xi in x:
        # qubit i is bit i, so later qubits become the high factor
        psi = np.kron(np.array([math.cos(xi / 2), math.sin(xi / 2)], dtype=complex), psi)
    return psi
