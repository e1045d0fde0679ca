"""A compact (mu/mu_w, lambda) CMA-ES with box handling by clip-and-penalize."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

log = logging.getLogger(__name__)


def default_popsize(dim: int) -> int:
    return 4 + int(math.floor(3 * math.log(max(dim, 1))))


@dataclass
class GenerationRecord:
    generation: int
    best_in_generation: float
    best_so_far: float
    sigma: float
    mean: list[float]
    feasible: int

    def to_dict(self) -> dict:
        return self.__dict__.copy()


@dataclass
class CMAResult:
    x: np.ndarray
    fun: float
    trace: list[GenerationRecord] = field(default_factory=list)
    evaluations: int = 0

    @property
    def best_so_far(self) -> list[float]:
        return [r.best_so_far for r in self.trace]


def cma_es_minimize(loss: Callable[[np.ndarray], float], x0: Sequence[float], sigma0: float,
                    bounds: tuple[Sequence[float], Sequence[float]] | None = None,
                    generations: int = 30, popsize: int | None = None, seed: int = 0,
                    penalty: float = 10.0, ftarget: float | None = None) -> CMAResult:
    """Minimize ``loss`` starting from mean ``x0`` with step size ``sigma0``.

    Candidates outside ``bounds`` are evaluated at their clipped point and
    charged ``penalty * |x - clip(x)|^2`` on top, so a penalized value is
    never below the clipped point's loss. The returned point is the best
    clipped candidate seen (best-so-far), not the final mean.
    """
    mean = np.array(x0, dtype=float)
    dim = mean.size
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    if sigma0 <= 0:
        raise ValueError("sigma0 must be positive")
    lam = popsize or default_popsize(dim)
    if lam < 2:
        raise ValueError("population must hold at least two candidates")
    lo = np.full(dim, -np.inf) if bounds is None else np.broadcast_to(np.asarray(bounds[0], float), (dim,))
    hi = np.full(dim, np.inf) if bounds is None else np.broadcast_to(np.asarray(bounds[1], float), (dim,))
    rng = np.random.default_rng(seed)

    mu = lam // 2
    w = math.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    w /= w.sum()
    mueff = 1.0 / float(w @ w)
    cc = (4 + mueff / dim) / (dim + 4 + 2 * mueff / dim)
    cs = (mueff + 2) / (dim + mueff + 5)
    c1 = 2 / ((dim + 1.3) ** 2 + mueff)
    cmu = min(1 - c1, 2 * (mueff - 2 + 1 / mueff) / ((dim + 2) ** 2 + mueff))
    damps = 1 + 2 * max(0.0, math.sqrt((mueff - 1) / (dim + 1)) - 1) + cs
    chi_n = math.sqrt(dim) * (1 - 1 / (4 * dim) + 1 / (21 * dim * dim))

    sigma = float(sigma0)
    pc = np.zeros(dim)
    ps = np.zeros(dim)
    cov = np.eye(dim)
    eigvec, eigval_sqrt = np.eye(dim), np.ones(dim)
    best_x, best_f = np.clip(mean, lo, hi), math.inf
    trace: list[GenerationRecord] = []
    evals = 0

    for gen in range(1, generations + 1):
        z = rng.standard_normal((lam, dim))
        y = (z * eigval_sqrt) @ eigvec.T
        xs = mean + sigma * y
        fs = np.empty(lam)
        feasible = 0
        for i, x in enumerate(xs):
            xc = np.clip(x, lo, hi)
            f = float(loss(xc))
            evals += 1
            if math.isfinite(f):
                feasible += 1
                if f < best_f:
                    best_f, best_x = f, xc.copy()
            fs[i] = f + penalty * float(np.sum((x - xc) ** 2))
        if feasible == 0:
            log.warning("generation %d: every candidate was infeasible", gen)
            trace.append(GenerationRecord(gen, math.inf, best_f, sigma, mean.tolist(), 0))
            continue

        order = np.argsort(fs, kind="stable")[:mu]
        y_sel = y[order]
        y_w = w @ y_sel
        mean = mean + sigma * y_w

        inv_sqrt = eigvec @ np.diag(1 / eigval_sqrt) @ eigvec.T
        ps = (1 - cs) * ps + math.sqrt(cs * (2 - cs) * mueff) * (inv_sqrt @ y_w)
        hsig = (np.linalg.norm(ps) / math.sqrt(1 - (1 - cs) ** (2 * gen)) / chi_n
                < 1.4 + 2 / (dim + 1))
        pc = (1 - cc) * pc + hsig * math.sqrt(cc * (2 - cc) * mueff) * y_w
        rank_mu = (y_sel.T * w) @ y_sel
        cov = ((1 - c1 - cmu) * cov + c1 * (np.outer(pc, pc) + (1 - hsig) * cc * (2 - cc) * cov)
               + cmu * rank_mu)
        sigma *= math.exp((cs / damps) * (np.linalg.norm(ps) / chi_n - 1))

        cov = (cov + cov.T) / 2
        vals, eigvec = np.linalg.eigh(cov)
        eigval_sqrt = np.sqrt(np.maximum(vals, 1e-30))

        trace.append(GenerationRecord(gen, float(np.min(fs)), best_f, sigma, mean.tolist(), feasible))
        if ftarget is not None and best_f <= ftarget:
            break
    return CMAResult(best_x, best_f, trace, evals)
