"""Duration-aware variational training.

The regularizer pulls every Rzx angle toward the nearest multiple of pi,
where the normalized CR tone vanishes (the gate is elided or collapses to
single-qubit corrections), so trained circuits compile to shorter schedules.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .compiler import schedule_asap
from .errors import ConfigurationError, DivergenceError
from .quantum import Circuit

_KINK_TOL = 1e-12


@dataclass
class TrainConfig:
    beta: float = 0.0
    lr: float = 0.05
    iterations: int = 200
    optimizer: str = "adam"  # adam | gd | cobyla
    seed: int = 0
    gradient: str = "adjoint"  # adjoint (statevector) | shift
    adam_betas: tuple[float, float] = (0.9, 0.999)

    def __post_init__(self):
        if self.beta < 0:
            raise ConfigurationError("beta must be non-negative")
        if self.lr <= 0:
            raise ConfigurationError("learning rate must be positive")
        if self.optimizer not in ("adam", "gd", "cobyla"):
            raise ConfigurationError(f"unknown optimizer {self.optimizer!r}")
        if self.gradient not in ("adjoint", "shift"):
            raise ConfigurationError(f"unknown gradient source {self.gradient!r}")


def round_half_away(x):
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def _offsets(params, mask) -> np.ndarray:
    theta = np.asarray(params, dtype=float)[list(mask)]
    return theta - round_half_away(theta / math.pi) * math.pi


def regu_loss(params: Sequence[float], rzx_mask: Sequence[int]) -> float:
    """Mean distance of the masked angles to the nearest multiple of pi."""
    if len(rzx_mask) == 0:
        warnings.warn("regu_loss called with an empty Rzx mask; returning 0")
        return 0.0
    return float(np.mean(np.abs(_offsets(params, rzx_mask))))


def regu_grad(params: Sequence[float], rzx_mask: Sequence[int]) -> np.ndarray:
    """Subgradient of :func:`regu_loss`, zero at every kink."""
    g = np.zeros(len(params))
    if len(rzx_mask) == 0:
        return g
    off = _offsets(params, rzx_mask)
    s = np.sign(off)
    s[np.abs(off) < _KINK_TOL] = 0.0
    s[np.abs(np.abs(off) - math.pi / 2) < _KINK_TOL] = 0.0
    np.add.at(g, list(rzx_mask), s / len(rzx_mask))
    return g


def total_loss(params, task, circuit: Circuit, beta: float) -> float:
    loss = task.loss(circuit, params)
    if beta:
        loss += beta * regu_loss(params, circuit.rzx_param_indices())
    return loss


def total_grad(params, task, circuit: Circuit, beta: float, source: str = "adjoint") -> np.ndarray:
    g = task.grad(circuit, params, source)
    if beta:
        g = g + beta * regu_grad(params, circuit.rzx_param_indices())
    return g


def compiled_duration(circuit: Circuit, params, dev=None) -> int:
    """Schedule length at dsr = 1 on ``dev`` (a noiseless chain device by default)."""
    if dev is None:
        from .device import DeviceModel

        dev = DeviceModel.random(max(2, circuit.n), noiseless=True)
    return schedule_asap(circuit, None, dev, params).total_duration


@dataclass
class TrainResult:
    params: np.ndarray
    loss_trace: list[float] = field(default_factory=list)
    task_trace: list[float] = field(default_factory=list)
    regu_trace: list[float] = field(default_factory=list)
    duration_trace: list[int] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.loss_trace[-1]

    @property
    def final_duration(self) -> int:
        return self.duration_trace[-1]

    def trace_rows(self) -> list[tuple[int, float, float, int]]:
        return list(zip(range(len(self.loss_trace)), self.task_trace, self.regu_trace,
                        self.duration_trace))


def train(circuit: Circuit, task, cfg: TrainConfig, dev=None,
          params: Sequence[float] | None = None) -> TrainResult:
    """Minimize task loss + beta * regu_loss from ``params`` (default: circuit.params)."""
    if circuit.num_params < 1:
        raise ConfigurationError("circuit has no trainable parameters")
    x = np.array(circuit.params if params is None else params, dtype=float)
    mask = circuit.rzx_param_indices()
    if dev is None:
        from .device import DeviceModel

        dev = DeviceModel.random(max(2, circuit.n), noiseless=True)
    result = TrainResult(x.copy())

    def record(p):
        task_val = task.loss(circuit, p)
        reg = regu_loss(p, mask) if mask else 0.0
        total = task_val + cfg.beta * reg
        if not math.isfinite(total):
            raise DivergenceError("loss became non-finite", params=result.params.copy(),
                                  iteration=len(result.loss_trace))
        result.params = np.array(p, dtype=float)
        result.task_trace.append(float(task_val))
        result.regu_trace.append(float(reg))
        result.loss_trace.append(float(total))
        result.duration_trace.append(compiled_duration(circuit, p, dev))
        return total

    if cfg.optimizer == "cobyla":
        best = {"x": x.copy(), "f": math.inf}

        def f(p):
            val = total_loss(p, task, circuit, cfg.beta)
            if not math.isfinite(val):
                raise DivergenceError("loss became non-finite", params=best["x"].copy())
            if val < best["f"]:
                best.update(x=np.array(p), f=val)
            return val

        record(x)
        out = minimize(f, x, method="COBYLA",
                       options={"maxiter": cfg.iterations, "rhobeg": 0.5})
        record(out.x if out.fun <= best["f"] else best["x"])
        return result

    m = np.zeros_like(x)
    v = np.zeros_like(x)
    b1, b2 = cfg.adam_betas
    for it in range(1, cfg.iterations + 1):
        record(x)
        g = total_grad(x, task, circuit, cfg.beta, cfg.gradient)
        if not np.all(np.isfinite(g)):
            raise DivergenceError("gradient became non-finite", params=x.copy(), iteration=it)
        if cfg.optimizer == "gd":
            x = x - cfg.lr * g
        else:
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            mhat = m / (1 - b1 ** it)
            vhat = v / (1 - b2 ** it)
            x = x - cfg.lr * mhat / (np.sqrt(vhat) + 1e-8)
    record(x)
    return result


def model_to_dict(circuit: Circuit, result: TrainResult, cfg: TrainConfig, task) -> dict:
    return {
        "circuit": circuit.to_dict(),
        "params": result.params.tolist(),
        "beta": cfg.beta,
        "config": asdict(cfg),
        "task": task.to_dict(),
        "final_loss": result.final_loss,
        "final_task_loss": result.task_trace[-1],
        "final_regu_loss": result.regu_trace[-1],
        "duration_dsr1": result.final_duration,
    }
