"""GaussianSquare cross-resonance pulses, their area, and schedules.

All times are in hardware sample ticks (``dt``). A pulse is rise (``risefall``
ticks of Gaussian flank), flat top (``width`` ticks) and fall, so its
duration is ``width + 2 * risefall``.

Two areas are used. :func:`pulse_area` is the closed-form calibration area
(flanks integrated as unlifted Gaussians); it sets the rotation angle of a
scaled CR tone. :func:`lifted_area` integrates the waveform actually played,
whose flanks are lifted so the pulse starts at zero; amplitude-preserving
stretches hold this one fixed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np
from scipy.special import erf

from .errors import AmplitudeSaturationError, ContractViolation

GRANULARITY = 16  # AWG duration multiple, in dt
DSR_MIN, DSR_MAX = 0.6, 1.5


@dataclass(frozen=True)
class GaussianSquarePulse:
    amp: float
    sigma: float
    width: float
    risefall: float
    phase: float = 0.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.risefall > 0:
            raise ValueError(f"risefall must be positive, got {self.risefall}")
        if self.width < 0:
            raise ValueError(f"width must be non-negative, got {self.width}")
        if self.amp < 0:
            raise ValueError("amp is a magnitude; carry the sign in phase")
        if self.amp > 1.0 + 1e-12:
            raise AmplitudeSaturationError(f"|A| = {self.amp:.6f} exceeds 1")

    @property
    def duration(self) -> float:
        return self.width + 2.0 * self.risefall

    def to_dict(self) -> dict:
        return {"A": self.amp, "phase": self.phase, "sigma": self.sigma, "width": self.width,
                "risefall": self.risefall, "duration": int(round(self.duration))}

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianSquarePulse":
        return cls(float(d["A"]), float(d["sigma"]), float(d["width"]), float(d["risefall"]),
                   float(d.get("phase", 0.0)))


def flank_area(sigma: float, risefall: float) -> float:
    """Area of both unit-height flanks, i.e. sqrt(2 pi) sigma erf(rf / (sqrt(2) sigma))."""
    return math.sqrt(2 * math.pi) * sigma * float(erf(risefall / (math.sqrt(2) * sigma)))


def pulse_area(p: GaussianSquarePulse) -> float:
    if p.sigma <= 0:
        raise ValueError("sigma must be positive")
    return abs(p.amp) * (p.width + flank_area(p.sigma, p.risefall))


def _baseline(p: GaussianSquarePulse) -> float:
    # unlifted waveform one sample before the pulse starts
    return math.exp(-0.5 * (p.risefall + 1.0) ** 2 / p.sigma ** 2)


def unit_shape(p: GaussianSquarePulse, x) -> np.ndarray:
    """Lifted, unit-amplitude envelope g(x) on 0 <= x < duration (zero outside)."""
    x = np.asarray(x, dtype=float)
    rise = np.exp(-0.5 * (x - p.risefall) ** 2 / p.sigma ** 2)
    fall = np.exp(-0.5 * (x - p.risefall - p.width) ** 2 / p.sigma ** 2)
    raw = np.where(x < p.risefall, rise, np.where(x < p.risefall + p.width, 1.0, fall))
    lift = _baseline(p)
    g = (raw - lift) / (1.0 - lift)
    return np.where((x >= 0) & (x < p.duration), g, 0.0)


def waveform(p: GaussianSquarePulse, x) -> np.ndarray:
    return p.amp * np.exp(1j * p.phase) * unit_shape(p, x)


def unit_lifted_area(p: GaussianSquarePulse) -> float:
    lift = _baseline(p)
    raw = p.width + flank_area(p.sigma, p.risefall)
    return (raw - p.duration * lift) / (1.0 - lift)


def lifted_area(p: GaussianSquarePulse) -> float:
    return p.amp * unit_lifted_area(p)


def area_for_theta(theta: float, alpha_star: float) -> float:
    """Area of an Rzx(theta) tone given the CNOT-calibrated area."""
    if not 0 < theta <= math.pi / 2 + 1e-12:
        raise ContractViolation(f"theta must lie in (0, pi/2], got {theta}")
    return theta * alpha_star / (math.pi / 2)


def rzx_base_pulse(theta: float, base: GaussianSquarePulse) -> GaussianSquarePulse:
    """Scale the CNOT-calibrated CR tone down to a rotation of ``theta``.

    The flat width shrinks first (linear in theta); only once it reaches
    zero is the amplitude scaled.
    """
    target = area_for_theta(theta, pulse_area(base))
    if theta >= math.pi / 2:
        return base
    flanks = flank_area(base.sigma, base.risefall)
    width = target / base.amp - flanks
    if width >= 0:
        return replace(base, width=width)
    return replace(base, width=0.0, amp=target / flanks)


def quantize_duration(duration: float, m: int = GRANULARITY) -> int:
    """Nearest multiple of ``m`` (halves round up), never below ``m``."""
    return max(m, int(math.floor(duration / m + 0.5)) * m)


def check_dsr(value: float) -> float:
    value = float(value)
    if not DSR_MIN - 1e-12 <= value <= DSR_MAX + 1e-12:
        raise ValueError(f"dsr {value} outside [{DSR_MIN}, {DSR_MAX}]")
    return value


def stretch_pulse(p: GaussianSquarePulse, dsr: float) -> GaussianSquarePulse:
    """Stretch duration by ``dsr`` (quantized) at fixed lifted area.

    Raises :class:`AmplitudeSaturationError` when the compensating amplitude
    would exceed 1.
    """
    if not dsr > 0:
        raise ValueError(f"dsr must be positive, got {dsr}")
    d0 = p.duration
    if dsr == 1.0 and d0 == quantize_duration(d0):
        return p
    d1 = quantize_duration(d0 * dsr)
    r = d1 / d0
    rf = p.risefall * r
    shaped = replace(p, sigma=p.sigma * r, risefall=rf, width=max(0.0, d1 - 2 * rf), amp=0.0)
    amp = p.amp * unit_lifted_area(p) / unit_lifted_area(shaped)
    if amp > 1.0 + 1e-12:
        raise AmplitudeSaturationError(
            f"stretching by {dsr} needs |A| = {amp:.4f} > 1 (duration {d0:g} -> {d1})")
    return replace(shaped, amp=amp)


@dataclass(frozen=True)
class SQPulse:
    """Fixed-shape single-qubit drive pulse; only its duration matters here."""

    duration: int
    label: str = "sq"

    def to_dict(self) -> dict:
        return {"kind": self.label, "duration": self.duration}


Payload = Union[GaussianSquarePulse, SQPulse]


def drive_channel(q: int) -> str:
    return f"d{q}"


def control_channel(control: int, target: int) -> str:
    return f"u{control}_{target}"


@dataclass(frozen=True)
class PulseInstruction:
    channel: str
    start: int
    payload: Payload

    @property
    def stop(self) -> int:
        return self.start + int(round(self.payload.duration))

    def to_dict(self) -> dict:
        return {"channel": self.channel, "start": self.start, "pulse": self.payload.to_dict()}


@dataclass
class PulseSchedule:
    instructions: list[PulseInstruction] = field(default_factory=list)

    def add(self, inst: PulseInstruction) -> int:
        if inst.start < 0:
            raise ValueError("instruction starts before t=0")
        self.instructions.append(inst)
        return len(self.instructions) - 1

    @property
    def total_duration(self) -> int:
        return max((i.stop for i in self.instructions), default=0)

    @property
    def channels(self) -> list[str]:
        return sorted({i.channel for i in self.instructions})

    def validate(self) -> None:
        by_channel: dict[str, list[PulseInstruction]] = {}
        for inst in self.instructions:
            by_channel.setdefault(inst.channel, []).append(inst)
        for ch, insts in by_channel.items():
            insts = sorted(insts, key=lambda i: i.start)
            for a, b in zip(insts, insts[1:]):
                if b.start < a.stop:
                    raise ValueError(f"overlapping instructions on {ch} at t={b.start}")

    def to_dict(self) -> dict:
        return {"channels": self.channels, "total_duration": self.total_duration,
                "instructions": [i.to_dict() for i in self.instructions]}

    @classmethod
    def from_dict(cls, d: dict) -> "PulseSchedule":
        out = cls()
        for i in d["instructions"]:
            pd = i["pulse"]
            payload = (GaussianSquarePulse.from_dict(pd) if "A" in pd
                       else SQPulse(int(pd["duration"]), pd.get("kind", "sq")))
            out.add(PulseInstruction(i["channel"], int(i["start"]), payload))
        return out


def schedule_duration(s: PulseSchedule) -> int:
    return s.total_duration
