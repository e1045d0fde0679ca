"""Synthetic drifting device: executes compiled programs shot by shot.

Noise mechanisms, applied per Monte Carlo trajectory:

* coherent over-rotation of each CR tone. A tone for Rzx(beta) on a pair
  with parameters (k1, k2, b) and stretch ``dsr`` carries, with probability
  ``k1``, the angle ``beta - e * sgn(beta)`` where ``e = k2 (dsr - 1) + b``
  and ``sgn`` is zero at |beta| = pi/2;
* a stochastic Pauli (X, Y or Z uniformly) on each qubit a pulse touches,
  with probability ``1 - exp(-d / T1)``;
* independent readout bit flips.

Two opt-in extras: ``dephasing`` adds a Z at the pure-dephasing rate
``1/T2 - 1/(2 T1)``, and ``idle_decoherence`` applies the channels to idle
windows from a qubit's first operation to the end of the schedule.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .errors import ConfigurationError
from .pulse import GaussianSquarePulse, check_dsr
from .quantum import (CX, MEASURE, RZ, RZX, SQ, Circuit, apply_matrix, bitstring, gate_matrix,
                      rzx_matrix, simulate)

if TYPE_CHECKING:
    from .compiler import CompiledProgram

Pair = tuple[int, int]
ERROR_KEYS = ("k1", "k2", "b")
# clamp ranges keep every drifting parameter inside the model's invariants
BOUNDS = {"k1": (0.05, 1.0), "k2": (-0.5, 0.5), "b": (-0.2, 0.2),
          "t1_us": (20.0, 400.0), "t2_us": (10.0, 400.0)}
DEFAULT_BASE_PULSE = GaussianSquarePulse(amp=0.25, sigma=64.0, width=336.0, risefall=128.0)
_CHUNK_AMPLITUDES = 1 << 22


@dataclass
class DriftConfig:
    """Ornstein-Uhlenbeck rates (1/day) and stationary std per parameter kind."""

    rate: dict[str, float] = field(default_factory=lambda: {
        "k1": 0.2, "k2": 0.3, "b": 0.3, "t1_us": 0.2, "t2_us": 0.2})
    std: dict[str, float] = field(default_factory=lambda: {
        "k1": 0.03, "k2": 0.08, "b": 0.04, "t1_us": 10.0, "t2_us": 10.0})


@dataclass
class DeviceModel:
    n: int
    coupling: list[Pair]
    base_pulses: dict[Pair, GaussianSquarePulse]
    errors: dict[Pair, dict[str, float]]
    t1_us: list[float]
    t2_us: list[float]
    readout: list[float]
    error_means: dict[Pair, dict[str, float]] = field(default_factory=dict)
    t1_means: list[float] = field(default_factory=list)
    t2_means: list[float] = field(default_factory=list)
    drift_config: DriftConfig = field(default_factory=DriftConfig)
    rng_state: dict | None = None
    clock: float = 0.0
    dt_ns: float = 0.2222
    sq_duration: int = 160
    # optional channels beyond the per-pulse T1 Pauli error
    idle_decoherence: bool = False
    dephasing: bool = False

    def __post_init__(self):
        self.coupling = [tuple(int(q) for q in p) for p in self.coupling]
        if not self.error_means:
            self.error_means = copy.deepcopy(self.errors)
        if not self.t1_means:
            self.t1_means = list(self.t1_us)
        if not self.t2_means:
            self.t2_means = list(self.t2_us)
        if self.rng_state is None:
            self.rng_state = np.random.default_rng(0).bit_generator.state
        self.validate()

    def validate(self) -> None:
        for p in self.coupling:
            if len(p) != 2 or p[0] == p[1] or not all(0 <= q < self.n for q in p):
                raise ConfigurationError(f"coupling pair {p} is invalid for {self.n} qubits")
            if p not in self.base_pulses or p not in self.errors:
                raise ConfigurationError(f"coupling pair {p} lacks a base pulse or error entry")
            e = self.errors[p]
            if not 0 < e["k1"] <= 1 or abs(e["b"]) > 0.2 or abs(e["k2"]) > 0.5:
                raise ConfigurationError(f"error parameters {e} of pair {p} out of range")
        for name in ("t1_us", "t2_us", "readout"):
            vals = getattr(self, name)
            if len(vals) != self.n:
                raise ConfigurationError(f"{name} needs {self.n} entries")
        if any(t <= 0 for t in self.t1_us + self.t2_us):
            raise ConfigurationError("T1 and T2 must be positive")
        if any(not 0 <= r < 0.5 for r in self.readout):
            raise ConfigurationError("readout flip probabilities must lie in [0, 0.5)")

    def base_pulse(self, pair: Pair) -> GaussianSquarePulse:
        try:
            return self.base_pulses[tuple(pair)]
        except KeyError:
            raise ConfigurationError(f"pair {tuple(pair)} is not in the coupling map") from None

    # -- construction ----------------------------------------------------
    @classmethod
    def random(cls, n: int, seed: int = 0, noiseless: bool = False) -> "DeviceModel":
        """Chain-coupled device (both directions calibrated) with seeded parameters."""
        if n < 2:
            raise ConfigurationError("a device needs at least two qubits")
        rng = np.random.default_rng(seed)
        coupling = [(i, i + 1) for i in range(n - 1)] + [(i + 1, i) for i in range(n - 1)]
        errors = {}
        for p in coupling:
            if noiseless:
                errors[p] = {"k1": 1.0, "k2": 0.0, "b": 0.0}
            else:
                errors[p] = {
                    "k1": float(rng.uniform(0.85, 1.0)),
                    "k2": float(np.clip(rng.normal(0.3, 0.05), 0.1, 0.5)),
                    "b": float(rng.choice([-1.0, 1.0]) * rng.uniform(0.04, 0.08)),
                }
        if noiseless:
            t1 = [math.inf] * n
            t2 = [math.inf] * n
            readout = [0.0] * n
        else:
            t1 = [float(np.clip(rng.normal(112.36, 15.0), 40.0, 300.0)) for _ in range(n)]
            t2 = [float(min(np.clip(rng.normal(91.21, 15.0), 30.0, 300.0), 2 * a)) for a in t1]
            readout = [float(rng.uniform(0.005, 0.015)) for _ in range(n)]
        return cls(n, coupling, {p: DEFAULT_BASE_PULSE for p in coupling}, errors, t1, t2,
                   readout, rng_state=np.random.default_rng(seed + 1).bit_generator.state)

    # -- persistence -----------------------------------------------------
    def to_dict(self) -> dict:
        def pairs(m):
            return [{"pair": list(p), **m[p]} for p in self.coupling]

        return {
            "n": self.n,
            "clock": self.clock,
            "dt_ns": self.dt_ns,
            "sq_duration": self.sq_duration,
            "idle_decoherence": self.idle_decoherence,
            "dephasing": self.dephasing,
            "coupling": [list(p) for p in self.coupling],
            "base_pulses": [{"pair": list(p), **self.base_pulses[p].to_dict()} for p in self.coupling],
            "errors": pairs(self.errors),
            "error_means": pairs(self.error_means),
            "t1_us": self.t1_us, "t2_us": self.t2_us,
            "t1_means": self.t1_means, "t2_means": self.t2_means,
            "readout": self.readout,
            "drift": {"rate": self.drift_config.rate, "std": self.drift_config.std},
            "rng_state": self.rng_state,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DeviceModel":
        def need(obj, key, path):
            if not isinstance(obj, dict) or key not in obj:
                raise ConfigurationError(f"snapshot field {path}.{key} is missing")
            return obj[key]

        def pair_map(key, fields):
            out = {}
            for i, e in enumerate(need(d, key, "$")):
                path = f"$.{key}[{i}]"
                p = tuple(int(q) for q in need(e, "pair", path))
                out[p] = {f: float(need(e, f, path)) for f in fields}
            return out

        try:
            pulses = {}
            for i, e in enumerate(need(d, "base_pulses", "$")):
                p = tuple(int(q) for q in need(e, "pair", f"$.base_pulses[{i}]"))
                pulses[p] = GaussianSquarePulse.from_dict(e)
            drift = need(d, "drift", "$")
            return cls(
                n=int(need(d, "n", "$")),
                coupling=[tuple(p) for p in need(d, "coupling", "$")],
                base_pulses=pulses,
                errors=pair_map("errors", ERROR_KEYS),
                t1_us=[float(x) for x in need(d, "t1_us", "$")],
                t2_us=[float(x) for x in need(d, "t2_us", "$")],
                readout=[float(x) for x in need(d, "readout", "$")],
                error_means=pair_map("error_means", ERROR_KEYS),
                t1_means=[float(x) for x in need(d, "t1_means", "$")],
                t2_means=[float(x) for x in need(d, "t2_means", "$")],
                drift_config=DriftConfig(dict(need(drift, "rate", "$.drift")),
                                         dict(need(drift, "std", "$.drift"))),
                rng_state=need(d, "rng_state", "$"),
                clock=float(need(d, "clock", "$")),
                dt_ns=float(d.get("dt_ns", 0.2222)),
                sq_duration=int(d.get("sq_duration", 160)),
                idle_decoherence=bool(d.get("idle_decoherence", False)),
                dephasing=bool(d.get("dephasing", False)),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"malformed snapshot: {exc}") from exc


def _ou_step(x: float, mean: float, rate: float, std: float, days: float, z: float) -> float:
    # exact transition of dx = -rate (x - mean) dt + sqrt(2 rate) std dW
    decay = math.exp(-rate * days)
    return mean + (x - mean) * decay + std * math.sqrt(max(0.0, 1 - decay * decay)) * z


def drift(dev: DeviceModel, days: float) -> DeviceModel:
    """New snapshot ``days`` later; the input snapshot is not modified."""
    if days < 0:
        raise ValueError("days must be non-negative")
    out = copy.deepcopy(dev)
    if days == 0:
        return out
    rng = np.random.default_rng()
    rng.bit_generator.state = dev.rng_state
    cfg = dev.drift_config

    def step(x, mean, kind):
        lo, hi = BOUNDS[kind]
        if not math.isfinite(x):
            return x
        return float(np.clip(_ou_step(x, mean, cfg.rate[kind], cfg.std[kind], days,
                                      rng.standard_normal()), lo, hi))

    for p in out.coupling:
        for k in ERROR_KEYS:
            out.errors[p][k] = step(dev.errors[p][k], dev.error_means[p][k], k)
    out.t1_us = [step(x, m, "t1_us") for x, m in zip(dev.t1_us, dev.t1_means)]
    out.t2_us = [min(step(x, m, "t2_us"), 2 * t1) for x, m, t1 in zip(dev.t2_us, dev.t2_means, out.t1_us)]
    out.rng_state = rng.bit_generator.state
    out.clock = dev.clock + days
    out.validate()
    return out


def over_rotation(dev: DeviceModel, pair: Pair, beta: float, dsr: float) -> float:
    """Signed shift applied to ``beta`` on an affected shot."""
    e = dev.errors[pair]
    mag = e["k2"] * (dsr - 1.0) + e["b"]
    if abs(abs(beta) - math.pi / 2) < 1e-9 or beta == 0:
        return 0.0
    return -mag * math.copysign(1.0, beta)


@dataclass
class ExecutionResult:
    counts: dict[str, int]
    shots: int
    duration_dt: int
    duration_us: float
    clock: float
    measured: tuple[int, ...]
    probs: np.ndarray  # trajectory-averaged outcome distribution incl. readout flips
    state_fidelity: float  # mean |<ideal|trajectory>|^2 before readout

    def p(self, bits: str) -> float:
        return self.counts.get(bits, 0) / self.shots

    def to_dict(self) -> dict:
        return {"counts": dict(sorted(self.counts.items())), "shots": self.shots,
                "duration_dt": self.duration_dt, "duration_us": self.duration_us,
                "clock": self.clock, "measured": list(self.measured),
                "state_fidelity": self.state_fidelity}


def _decay_prob(duration: float, tau_us: float, dt_ns: float) -> float:
    if duration <= 0 or not math.isfinite(tau_us):
        return 0.0
    return 1.0 - math.exp(-duration * dt_ns * 1e-3 / tau_us)


class _Trajectories:
    """Batch of per-shot statevectors over the active qubits."""

    def __init__(self, m: int, shots: int, rng: np.random.Generator):
        self.m = m
        self.rng = rng
        self.states = np.zeros((shots, 2 ** m), dtype=complex)
        self.states[:, 0] = 1.0
        idx = np.arange(2 ** m)
        self.bit = [(idx >> q) & 1 for q in range(m)]

    def pauli_channel(self, q: int, p_any: float, p_z: float) -> None:
        s = self.states
        if p_any > 0:
            hit = self.rng.random(len(s)) < p_any
            which = self.rng.integers(0, 3, len(s))  # 0 X, 1 Y, 2 Z
            self._apply(q, hit & (which < 2), hit & (which > 0))
        if p_z > 0:
            self._apply(q, np.zeros(len(s), bool), self.rng.random(len(s)) < p_z)

    def _apply(self, q: int, flip: np.ndarray, phase: np.ndarray) -> None:
        s = self.states
        if phase.any():
            sign = 1.0 - 2.0 * self.bit[q]
            s[phase] *= sign
        if flip.any():
            perm = np.arange(2 ** self.m) ^ (1 << q)
            s[flip] = s[flip][:, perm]


def _channel_probs(dev: DeviceModel, q: int, duration: float) -> tuple[float, float]:
    t1, t2 = dev.t1_us[q], dev.t2_us[q]
    p_any = _decay_prob(duration, t1, dev.dt_ns)
    if not dev.dephasing:
        return p_any, 0.0
    rate_phi = (1.0 / t2 if math.isfinite(t2) else 0.0) - (0.5 / t1 if math.isfinite(t1) else 0.0)
    p_z = _decay_prob(duration, 1.0 / rate_phi, dev.dt_ns) if rate_phi > 0 else 0.0
    return p_any, p_z


def _check_program(prog: "CompiledProgram", dev: DeviceModel) -> None:
    for g in prog.circuit.gates:
        if g.kind in (RZX, CX) and tuple(g.qubits) not in dev.base_pulses:
            raise ConfigurationError(f"program uses pair {g.qubits} absent from the coupling map")
    if prog.circuit.n > dev.n:
        raise ConfigurationError("program is wider than the device")
    for v in prog.pair_dsr.values():
        check_dsr(v)


def execute(prog: "CompiledProgram", dev: DeviceModel, shots: int, seed: int) -> ExecutionResult:
    if shots < 1:
        raise ValueError("shots must be >= 1")
    _check_program(prog, dev)
    circ = prog.circuit
    measured = sorted({q for g in circ.gates if g.kind == MEASURE for q in g.qubits}) or list(range(circ.n))
    active = sorted({q for g in circ.gates if g.kind != MEASURE for q in g.qubits})
    local = {q: i for i, q in enumerate(active)}
    m = max(1, len(active))
    total = prog.total_duration

    ideal_circ = Circuit(m, [type(g)(g.kind, tuple(local[q] for q in g.qubits), g.args, g.merged)
                             for g in circ.gates if g.kind != MEASURE])
    ideal = simulate(ideal_circ)

    rng = np.random.default_rng(seed)
    chunk = max(1, _CHUNK_AMPLITUDES // (2 ** m))
    outcome_local = np.empty(shots, dtype=np.int64)
    prob_sum = np.zeros(2 ** m)
    fid_sum = 0.0
    done = 0
    while done < shots:
        b = min(chunk, shots - done)
        traj = _run_chunk(prog, dev, active, local, m, b, rng, total)
        pr = np.abs(traj.states) ** 2
        prob_sum += pr.sum(axis=0)
        fid_sum += float((np.abs(traj.states @ ideal.conj()) ** 2).sum())
        cdf = np.cumsum(pr, axis=1)
        u = rng.random(b)[:, None] * cdf[:, -1:]
        outcome_local[done:done + b] = np.minimum((cdf < u).sum(axis=1), 2 ** m - 1)
        done += b

    # expand to measured-qubit bitstrings and apply readout flips
    k = len(measured)
    bits = np.zeros((shots, k), dtype=np.int64)
    for j, q in enumerate(measured):
        if q in local:
            bits[:, j] = (outcome_local >> local[q]) & 1
        flip = rng.random(shots) < dev.readout[q]
        bits[:, j] ^= flip
    index = (bits << np.arange(k)).sum(axis=1)
    hist = np.bincount(index, minlength=2 ** k)
    counts = {bitstring(i, k): int(c) for i, c in enumerate(hist) if c}

    probs = _marginal_with_readout(prob_sum / shots, measured, local, dev.readout)
    return ExecutionResult(counts, shots, total, total * dev.dt_ns * 1e-3, dev.clock,
                           tuple(measured), probs, fid_sum / shots)


def _marginal_with_readout(p_local: np.ndarray, measured, local, readout) -> np.ndarray:
    k = len(measured)
    out = np.zeros(2 ** k)
    idx = np.arange(p_local.size)
    target = np.zeros_like(idx)
    for j, q in enumerate(measured):
        if q in local:
            target |= ((idx >> local[q]) & 1) << j
    np.add.at(out, target, p_local)
    psi = out.reshape((2,) * k)
    for j, q in enumerate(measured):
        r = readout[q]
        conf = np.array([[1 - r, r], [r, 1 - r]])
        axis = k - 1 - j
        psi = np.moveaxis(np.tensordot(conf, psi, axes=([1], [axis])), 0, axis)
    return psi.reshape(-1)


def _run_chunk(prog, dev, active, local, m, b, rng, total) -> _Trajectories:
    traj = _Trajectories(m, b, rng)
    last = {}  # qubit -> tick it became free; absent until first use
    gates = prog.circuit.gates
    for g, (start, stop) in zip(gates, prog.gate_times):
        if g.kind == MEASURE:
            continue
        qs = [local[q] for q in g.qubits]
        for q, lq in zip(g.qubits, qs):
            if dev.idle_decoherence and q in last and start > last[q]:
                traj.pauli_channel(lq, *_channel_probs(dev, q, start - last[q]))
        if g.kind == RZX:
            pair = tuple(g.qubits)
            beta = float(g.args[0])
            shift = over_rotation(dev, pair, beta, prog.pair_dsr[pair])
            if shift == 0.0:
                traj.states = apply_matrix(traj.states, rzx_matrix(beta), qs, m)
            else:
                affected = rng.random(b) < dev.errors[pair]["k1"]
                mats = np.where(affected[:, None, None], rzx_matrix(beta + shift)[None],
                                rzx_matrix(beta)[None])
                traj.states = apply_matrix(traj.states, mats, qs, m)
        elif g.kind in (RZ, SQ, CX):
            traj.states = apply_matrix(traj.states, gate_matrix(g.kind, g.args), qs, m)
        if stop > start:
            for q, lq in zip(g.qubits, qs):
                traj.pauli_channel(lq, *_channel_probs(dev, q, stop - start))
        for q in g.qubits:
            last[q] = max(stop, last.get(q, stop))
    for q, t in last.items():
        if dev.idle_decoherence and total > t:
            traj.pauli_channel(local[q], *_channel_probs(dev, q, total - t))
    return traj


def mitigate_readout(probs: np.ndarray, flips) -> np.ndarray:
    """Undo independent readout flips (``flips[j]`` for bit j) and renormalize."""
    k = len(flips)
    psi = np.asarray(probs, dtype=float).reshape((2,) * k)
    for j, r in enumerate(flips):
        inv = np.linalg.inv(np.array([[1 - r, r], [r, 1 - r]]))
        axis = k - 1 - j
        psi = np.moveaxis(np.tensordot(inv, psi, axes=([1], [axis])), 0, axis)
    out = np.clip(psi.reshape(-1), 0.0, None)
    return out / out.sum()


def benchmark_circuit(pair: Pair, theta: float, n: int | None = None) -> Circuit:
    c, t = pair
    circ = Circuit(n or max(pair) + 1)
    circ.rzx(c, t, theta)
    circ.measure(*sorted(pair))
    return circ


def benchmark_rzx(dev: DeviceModel, pair: Pair, theta: float, dsr: float, shots: int,
                  seed: int) -> float:
    """Measured P(00) after Rzx(theta) on |00> of ``pair``."""
    from .compiler import schedule_asap

    pair = tuple(pair)
    if pair not in dev.base_pulses:
        raise ConfigurationError(f"pair {pair} is not in the coupling map")
    prog = schedule_asap(benchmark_circuit(pair, theta), {pair: dsr}, dev)
    res = execute(prog, dev, shots, seed)
    return res.p("00")

