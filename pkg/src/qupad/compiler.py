"""Rzx-basis rewriting, Rzx angle normalization and ASAP pulse scheduling.

Timing model (all in dt):

* ``rz`` is a virtual frame change and costs nothing;
* ``sq`` is one fixed-length drive pulse (``dev.sq_duration``);
* ``rzx(beta)`` is a pre pulse, one CR tone scaled to ``|beta|`` (and
  stretched by the pair's dsr) and a post pulse; negative ``beta`` flips the
  tone's phase;
* ``cx`` (CNOT basis only) is the echoed sequence of two unscaled CR tones
  and three single-qubit pulses;
* an ``sq`` flagged ``merged`` rides on the preceding post pulse for free.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Mapping

from .errors import ConfigurationError, ContractViolation
from .pulse import (PulseInstruction, PulseSchedule, SQPulse, check_dsr, control_channel,
                    drive_channel, rzx_base_pulse, stretch_pulse)
from .quantum import CX, MEASURE, RZ, RZX, SQ, Circuit, Gate

if TYPE_CHECKING:
    from .device import DeviceModel

Pair = tuple[int, int]
HALF_PI = math.pi / 2
_EPS = 1e-12


def wrap_angle(theta: float) -> float:
    """Representative of ``theta`` in (-pi, pi]."""
    t = math.remainder(float(theta), 2 * math.pi)
    return math.pi if t <= -math.pi else t


def cx_template(control: int, target: int) -> list[Gate]:
    """CX as Rzx(-pi/2) plus Rz(pi/2) on the control and Rx(pi/2) on the target.

    The three factors commute; the product equals CX times exp(-i pi/4).
    """
    return [
        Gate(RZX, (control, target), (-HALF_PI,)),
        Gate(RZ, (control,), (HALF_PI,)),
        Gate(SQ, (target,), (HALF_PI, -HALF_PI, HALF_PI)),
    ]


def rewrite_cnot_to_rzx(c: Circuit) -> Circuit:
    if not any(g.kind == CX for g in c.gates):
        return c
    gates: list[Gate] = []
    for g in c.gates:
        gates.extend(cx_template(*g.qubits) if g.kind == CX else [g])
    return Circuit(c.n, gates, c.params.copy())


def rewrite_rzx_to_cnot(c: Circuit) -> Circuit:
    """Express every Rzx(phi) as H_t CX Rz_t(phi) CX H_t (the CNOT-basis form)."""
    gates: list[Gate] = []
    for g in c.gates:
        if g.kind != RZX:
            gates.append(g)
            continue
        ctl, tgt = g.qubits
        h = Gate(SQ, (tgt,), (HALF_PI, 0.0, math.pi))
        gates += [h, Gate(CX, (ctl, tgt)), Gate(RZ, (tgt,), g.args),
                  Gate(CX, (ctl, tgt)), h]
    return Circuit(c.n, gates, c.params.copy())


def normalize_rzx_angle(theta: float, control: int = 0, target: int = 1) -> list[Gate]:
    """Gates realizing Rzx(theta) (up to global phase) with every |beta| <= pi/2.

    Returns ``[]`` for theta = 0. For |theta| > pi/2 the Rzx(theta -+ pi)
    is followed by Z on the control (virtual) and X on the target (merged
    into the post pulse, or a standalone pulse when no tone remains).
    """
    t = wrap_angle(theta)
    if abs(t) < _EPS:
        return []
    if abs(t) <= HALF_PI + _EPS:
        return [Gate(RZX, (control, target), (t,))]
    beta = t - math.copysign(math.pi, t)
    gates = []
    if abs(beta) >= _EPS:
        gates.append(Gate(RZX, (control, target), (beta,)))
    gates.append(Gate(RZ, (control,), (math.pi,)))
    gates.append(Gate(SQ, (target,), (math.pi, 0.0, math.pi), merged=bool(gates[:-1])))
    return gates


def normalize_circuit(c: Circuit, params=None) -> Circuit:
    """Bind parameters and normalize every Rzx angle; other gates pass through."""
    bound = c.bind(params)
    gates: list[Gate] = []
    for g in bound.gates:
        gates.extend(normalize_rzx_angle(g.args[0], *g.qubits) if g.kind == RZX else [g])
    return Circuit(c.n, gates)


def used_pairs(c: Circuit) -> list[Pair]:
    """Directed pairs carrying a two-qubit gate, in first-use order."""
    seen: dict[Pair, None] = {}
    for g in c.gates:
        if g.kind in (RZX, CX):
            seen.setdefault(tuple(g.qubits), None)
    return list(seen)


@dataclass
class CompiledProgram:
    """A normalized, bound circuit with its pulse schedule.

    ``provenance[i]`` lists the schedule instruction indices emitted for
    gate ``i``; ``gate_times[i]`` is the (start, stop) window in which gate
    ``i`` occupies its qubits (zero-length for virtual gates).
    """

    circuit: Circuit
    schedule: PulseSchedule
    provenance: list[list[int]]
    gate_times: list[tuple[int, int]]
    pair_dsr: dict[Pair, float]
    exposure: dict[Pair, int] = field(default_factory=dict)
    dt_ns: float = 0.2222

    @property
    def total_duration(self) -> int:
        return self.schedule.total_duration

    @property
    def duration_us(self) -> float:
        return self.total_duration * self.dt_ns * 1e-3

    @property
    def basis(self) -> str:
        return "cx" if any(g.kind == CX for g in self.circuit.gates) else "rzx"

    def to_dict(self) -> dict:
        d = self.schedule.to_dict()
        d.update({
            "dt_ns": self.dt_ns,
            "circuit": self.circuit.to_dict(),
            "provenance": self.provenance,
            "gate_times": [list(t) for t in self.gate_times],
            "dsr": [[list(p), v] for p, v in sorted(self.pair_dsr.items())],
            "exposure": [[list(p), v] for p, v in sorted(self.exposure.items())],
        })
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CompiledProgram":
        return cls(
            Circuit.from_dict(d["circuit"]),
            PulseSchedule.from_dict(d),
            [list(p) for p in d["provenance"]],
            [tuple(t) for t in d["gate_times"]],
            {tuple(p): float(v) for p, v in d["dsr"]},
            {tuple(p): int(v) for p, v in d.get("exposure", [])},
            float(d.get("dt_ns", 0.2222)),
        )


def _resolve_dsr(pairs, dsr: Mapping[Pair, float] | None) -> dict[Pair, float]:
    if dsr is None:
        return {p: 1.0 for p in pairs}
    out = {}
    for p in pairs:
        if p not in dsr:
            raise ConfigurationError(f"no dsr given for coupling pair {p}")
        out[p] = check_dsr(dsr[p])
    return out


def cr_tone(dev: "DeviceModel", pair: Pair, beta: float, dsr: float):
    """The stretched CR pulse implementing Rzx(beta) on ``pair``."""
    if not 0 < abs(beta) <= HALF_PI + _EPS:
        raise ContractViolation(f"Rzx angle {beta} was not normalized")
    pulse = rzx_base_pulse(min(abs(beta), HALF_PI), dev.base_pulse(pair))
    pulse = stretch_pulse(pulse, dsr)
    return replace(pulse, phase=math.pi) if beta < 0 else pulse


def _overlap_exposure(schedule: PulseSchedule) -> dict[Pair, int]:
    tones = [(i.start, i.stop, i.channel) for i in schedule.instructions if i.channel.startswith("u")]
    out: dict[Pair, int] = {}
    for s, e, ch in tones:
        pair = tuple(int(x) for x in ch[1:].split("_"))
        busy = sum(max(0, min(e, e2) - max(s, s2)) for s2, e2, ch2 in tones if ch2 != ch)
        out[pair] = out.get(pair, 0) + busy
    return out


def schedule_asap(c: Circuit, dsr: Mapping[Pair, float] | None, dev: "DeviceModel",
                  params=None) -> CompiledProgram:
    """Normalize ``c`` and place every gate at the earliest tick its qubits are free.

    ``dsr=None`` means 1.0 on every pair. CX gates are scheduled as echoed
    CNOTs, so this also times CNOT-basis circuits.
    """
    circ = normalize_circuit(c, params)
    if circ.n > dev.n:
        raise ConfigurationError(f"circuit needs {circ.n} qubits, device has {dev.n}")
    pairs = used_pairs(circ)
    for p in pairs:
        if p not in dev.coupling:
            raise ConfigurationError(f"pair {p} is not in the coupling map")
    rzx_pairs = [tuple(g.qubits) for g in circ.gates if g.kind == RZX]
    pair_dsr = _resolve_dsr(dict.fromkeys(rzx_pairs), dsr)

    sq_len = dev.sq_duration
    sched = PulseSchedule()
    free = [0] * circ.n
    provenance: list[list[int]] = []
    times: list[tuple[int, int]] = []

    def emit(ch, t, payload):
        return sched.add(PulseInstruction(ch, t, payload))

    for g in circ.gates:
        qs = g.qubits
        start = max(free[q] for q in qs)
        ids: list[int] = []
        if g.kind == RZ or g.kind == MEASURE or (g.kind == SQ and g.merged):
            stop = start  # virtual, folded, or a barrier
        elif g.kind == SQ:
            ids.append(emit(drive_channel(qs[0]), start, SQPulse(sq_len)))
            stop = start + sq_len
        elif g.kind == RZX:
            ctl, tgt = qs
            tone = cr_tone(dev, (ctl, tgt), g.args[0], pair_dsr[(ctl, tgt)])
            t = start
            ids.append(emit(drive_channel(tgt), t, SQPulse(sq_len, "rzx_pre")))
            t += sq_len
            ids.append(emit(control_channel(ctl, tgt), t, tone))
            t += int(round(tone.duration))
            ids.append(emit(drive_channel(tgt), t, SQPulse(sq_len, "rzx_post")))
            stop = t + sq_len
        elif g.kind == CX:
            ctl, tgt = qs
            base = dev.base_pulse((ctl, tgt))
            d = int(round(base.duration))
            t = start
            ids.append(emit(drive_channel(ctl), t, SQPulse(sq_len, "cx_pre")))
            t += sq_len
            ids.append(emit(control_channel(ctl, tgt), t, base))
            t += d
            ids.append(emit(drive_channel(ctl), t, SQPulse(sq_len, "cx_echo")))
            t += sq_len
            ids.append(emit(control_channel(ctl, tgt), t, replace(base, phase=math.pi)))
            t += d
            ids.append(emit(drive_channel(tgt), t, SQPulse(sq_len, "cx_post")))
            stop = t + sq_len
        else:  # pragma: no cover - Gate validates kinds
            raise ContractViolation(g.kind)
        for q in qs:
            free[q] = stop
        provenance.append(ids)
        times.append((start, stop))

    return CompiledProgram(circ, sched, provenance, times, pair_dsr,
                           _overlap_exposure(sched), dev.dt_ns)


def compile_circuit(c: Circuit, dev: "DeviceModel", dsr: Mapping[Pair, float] | None = None,
                    params=None, basis: str = "rzx") -> CompiledProgram:
    """Full pipeline: optional CX rewrite, normalization, scheduling."""
    if basis == "rzx":
        c = rewrite_cnot_to_rzx(c)
    elif basis == "cx":
        c = rewrite_rzx_to_cnot(c)
    else:
        raise ConfigurationError(f"unknown basis {basis!r}")
    return schedule_asap(c, dsr, dev, params)
