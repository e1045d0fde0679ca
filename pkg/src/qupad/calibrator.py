"""Per-pair duration-stretch search against a fitted error table.

Objective for a dsr assignment::

    loss = D(dsr) / D(1) + alpha * sum over used pairs of max_k Er(theta_k, dsr_pair)

``D`` is the ASAP schedule length; ``Er`` comes from the LUT, so the search
never touches the device. Stretches needing |A| > 1 score +inf.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Mapping

import numpy as np

from .cmaes import CMAResult, cma_es_minimize, default_popsize
from .compiler import cr_tone, normalize_circuit
from .errors import AmplitudeSaturationError, ConfigurationError
from .lut import LUT, gate_error
from .pulse import DSR_MAX, DSR_MIN, check_dsr
from .quantum import CX, MEASURE, RZ, RZX, SQ, Circuit

Pair = tuple[int, int]


@dataclass
class CalibConfig:
    alpha: float = 10.0
    generations: int = 30
    popsize: int | None = None  # 4 + floor(3 ln dim) when unset
    sigma0: float = 0.15
    seed: int = 0
    penalty: float = 10.0

    def __post_init__(self):
        if self.generations < 1:
            raise ConfigurationError("generations must be >= 1")
        if self.popsize is not None and self.popsize < 4:
            raise ConfigurationError("population must be >= 4")
        if self.sigma0 <= 0:
            raise ConfigurationError("sigma0 must be positive")


class DurationModel:
    """ASAP schedule length of one circuit as a function of per-pair dsr.

    Mirrors :func:`schedule_asap` but keeps only what the length depends on,
    caching every stretched tone by (gate, dsr).
    """

    def __init__(self, circuit: Circuit, dev, params=None):
        circ = normalize_circuit(circuit, params)
        self.n = circ.n
        self.dev = dev
        sq = dev.sq_duration
        self.ops: list[tuple] = []  # (qubits, fixed length) or (qubits, pair, beta)
        for g in circ.gates:
            if g.kind in (RZ, MEASURE) or (g.kind == SQ and g.merged):
                self.ops.append((g.qubits, 0))
            elif g.kind == SQ:
                self.ops.append((g.qubits, sq))
            elif g.kind == CX:
                d = int(round(dev.base_pulse(g.qubits).duration))
                self.ops.append((g.qubits, 2 * d + 3 * sq))
            elif g.kind == RZX:
                self.ops.append((g.qubits, tuple(g.qubits), float(g.args[0])))
        self.pairs: list[Pair] = sorted({op[1] for op in self.ops if len(op) == 3})
        for p in self.pairs:
            dev.base_pulse(p)
        self._cache: dict[tuple[Pair, float, float], float] = {}

    def _tone(self, pair: Pair, beta: float, dsr: float) -> float:
        key = (pair, abs(beta), dsr)
        hit = self._cache.get(key)
        if hit is None:
            try:
                hit = float(round(cr_tone(self.dev, pair, beta, dsr).duration))
            except AmplitudeSaturationError:
                hit = math.inf
            self._cache[key] = hit
        return hit

    def duration(self, dsr: Mapping[Pair, float] | None = None) -> float:
        free = [0.0] * self.n
        sq = self.dev.sq_duration
        for op in self.ops:
            qs = op[0]
            start = max(free[q] for q in qs)
            if len(op) == 2:
                stop = start + op[1]
            else:
                d = 1.0 if dsr is None else dsr[op[1]]
                stop = start + 2 * sq + self._tone(op[1], op[2], d)
            for q in qs:
                free[q] = stop
        return max(free, default=0.0)


class CalibrationProblem:
    """Pre-bound pieces of the objective for one circuit, LUT and device."""

    def __init__(self, circuit: Circuit, lut: LUT, dev, alpha: float = 10.0, params=None):
        self.alpha = float(alpha)
        self.durations = DurationModel(circuit, dev, params)
        self.pairs = self.durations.pairs
        self.fits = {p: lut.fit_for(p) for p in self.pairs}
        bound = circuit.bind(params)  # CX carries no stretch and no modeled coherent error
        self.thetas: dict[Pair, np.ndarray] = {p: [] for p in self.pairs}
        for g in bound.gates:
            if g.kind == RZX and tuple(g.qubits) in self.thetas:
                self.thetas[tuple(g.qubits)].append(float(g.args[0]))
        self.thetas = {p: np.array(v) for p, v in self.thetas.items()}
        self.base = self.durations.duration(None)

    @property
    def dim(self) -> int:
        return len(self.pairs)

    def assignment(self, x) -> dict[Pair, float]:
        return {p: float(v) for p, v in zip(self.pairs, np.atleast_1d(x))}

    def error_term(self, dsr: Mapping[Pair, float]) -> float:
        return sum(float(np.max(gate_error(self.thetas[p], dsr[p], self.fits[p])))
                   for p in self.pairs)

    def loss(self, dsr: Mapping[Pair, float]) -> float:
        for p in self.pairs:
            check_dsr(dsr[p])
        d = self.durations.duration(dsr)
        if not math.isfinite(d):
            return math.inf
        norm = d / self.base if self.base > 0 else 1.0
        return norm + self.alpha * self.error_term(dsr)

    def loss_vector(self, x) -> float:
        return self.loss(self.assignment(x))


def calib_loss(dsr: Mapping[Pair, float], circuit: Circuit, lut: LUT, dev, alpha: float = 10.0,
               params=None) -> float:
    prob = CalibrationProblem(circuit, lut, dev, alpha, params)
    missing = [p for p in prob.pairs if p not in dsr]
    if missing:
        raise ConfigurationError(f"dsr assignment lacks pairs {missing}")
    return prob.loss(dsr)


@dataclass
class CalibrationReport:
    assignment: dict[Pair, float]
    best_loss: float
    initial_loss: float
    alpha: float
    config: CalibConfig
    lut_clock: float
    trace: list = field(default_factory=list)
    evaluations: int = 0

    def to_dict(self) -> dict:
        return {
            "dsr": [{"pair": list(p), "dsr": v} for p, v in sorted(self.assignment.items())],
            "best_loss": self.best_loss,
            "initial_loss": self.initial_loss,
            "alpha": self.alpha,
            "config": asdict(self.config),
            "lut_clock": self.lut_clock,
            "evaluations": self.evaluations,
            "trace": [r.to_dict() for r in self.trace],
        }

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["generation", "best_in_generation", "best_so_far", "sigma"])
        for r in self.trace:
            w.writerow([r.generation, repr(r.best_in_generation), repr(r.best_so_far), repr(r.sigma)])
        return buf.getvalue()


def calibrate(circuit: Circuit, lut: LUT, dev, cfg: CalibConfig | None = None,
              params=None) -> tuple[dict[Pair, float], CalibrationReport]:
    """CMA-ES over one dsr per used pair, starting from 1.0 everywhere."""
    cfg = cfg or CalibConfig()
    prob = CalibrationProblem(circuit, lut, dev, cfg.alpha, params)
    ones = {p: 1.0 for p in prob.pairs}
    initial = prob.loss(ones)
    if prob.dim == 0:
        return {}, CalibrationReport({}, initial, initial, cfg.alpha, cfg, lut.device_clock)
    res: CMAResult = cma_es_minimize(
        prob.loss_vector, np.ones(prob.dim), cfg.sigma0, (DSR_MIN, DSR_MAX),
        generations=cfg.generations, popsize=cfg.popsize or default_popsize(prob.dim),
        seed=cfg.seed, penalty=cfg.penalty)
    best_x, best_f = res.x, res.fun
    if initial <= best_f:  # the starting point is a valid answer too
        best_x, best_f = np.ones(prob.dim), initial
    assignment = prob.assignment(best_x)
    report = CalibrationReport(assignment, best_f, initial, cfg.alpha, cfg, lut.device_clock,
                               res.trace, res.evaluations)
    return assignment, report


def assignment_from_dict(d: dict) -> dict[Pair, float]:
    return {tuple(e["pair"]): check_dsr(e["dsr"]) for e in d["dsr"]}

