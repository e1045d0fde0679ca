"""Per-pair Rzx error model fitted from (theta, dsr) benchmark grids.

Model of the measured P(00) after Rzx(theta) on |00>::

    eps(theta, dsr) = (k2 (dsr - 1) + b) * sign(theta - pi/2)
    y(theta, dsr)   = (cos theta - k1 sin theta sin eps + 1) / 2

with sign(0) = 0. The predicted gate error is the deviation of ``y`` from
the ideal ``(cos theta + 1) / 2``.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConfigurationError, IllPosedFitError
from .pulse import DSR_MAX, DSR_MIN

log = logging.getLogger(__name__)

Pair = tuple[int, int]
HALF_PI = math.pi / 2
LOWER = np.array([1e-3, -0.5, -0.2])
UPPER = np.array([1.5, 0.5, 0.2])


@dataclass
class ErrorFitParams:
    k1: float
    k2: float
    b: float
    residual_rms: float = 0.0
    pair: Pair = (0, 1)
    timestamp: float = 0.0
    n1: int = 0
    n2: int = 0
    shots: int = 0
    ok: bool = True
    message: str = ""

    def __post_init__(self):
        self.pair = tuple(int(q) for q in self.pair)
        if self.ok and not 0 < self.k1 <= 1.5:
            raise ValueError(f"k1 = {self.k1} outside (0, 1.5]")
        if self.residual_rms < 0:
            raise ValueError("residual_rms must be non-negative")

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.k1, self.k2, self.b])

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pair"] = list(self.pair)
        return d


def theta_grid(n1: int) -> np.ndarray:
    """``n1`` angles in [pi/8, 7pi/8], evenly spaced on each side of pi/2, never pi/2."""
    lower = np.linspace(math.pi / 8, HALF_PI, math.ceil(n1 / 2) + 1)[:-1]
    upper = np.linspace(HALF_PI, 7 * math.pi / 8, n1 // 2 + 1)[1:]
    return np.concatenate([lower, upper])


def dsr_grid(n2: int) -> np.ndarray:
    return np.linspace(DSR_MIN, DSR_MAX, n2)


def build_grid(pairs: Iterable[Pair], n1: int, n2: int) -> list[tuple[Pair, float, float]]:
    if n1 < 3 or n2 < 2:
        raise ValueError("need n1 >= 3 and n2 >= 2")
    thetas, dsrs = theta_grid(n1), dsr_grid(n2)
    return [(tuple(p), float(t), float(d)) for p in pairs for t in thetas for d in dsrs]


def _eps(theta, dsr, k2, b):
    theta = np.asarray(theta, dtype=float)
    return (k2 * (np.asarray(dsr, dtype=float) - 1.0) + b) * np.sign(theta - HALF_PI)


def _model(x: np.ndarray, theta, dsr) -> np.ndarray:
    k1, k2, b = x
    return (np.cos(theta) - k1 * np.sin(theta) * np.sin(_eps(theta, dsr, k2, b)) + 1.0) / 2.0


def predict_p00(theta, dsr, fit: ErrorFitParams):
    y = _model(fit.vector, np.asarray(theta, dtype=float), dsr)
    clipped = np.clip(y, 0.0, 1.0)
    if np.any(clipped != y):
        log.debug("predict_p00 clamped %s values to [0, 1]", int(np.sum(clipped != y)))
    return float(clipped) if np.ndim(clipped) == 0 else clipped


def gate_error(theta, dsr, fit: ErrorFitParams):
    """|predicted P(00) - ideal P(00)| for Rzx(theta); even in theta, zero at 0, +-pi/2, +-pi."""
    t = np.abs(np.asarray(theta, dtype=float))
    t = np.where(t > math.pi, 2 * math.pi - t, t)
    eps = _eps(t, dsr, fit.k2, fit.b)
    er = np.abs(fit.k1 * np.sin(t) * np.sin(eps)) / 2.0
    return float(er) if np.ndim(er) == 0 else er


# -- fitting ---------------------------------------------------------------

def _check_design(theta: np.ndarray, dsr: np.ndarray) -> None:
    if theta.size < 6:
        raise IllPosedFitError(f"need at least 6 measurements, got {theta.size}")
    if not (np.any(theta < HALF_PI) and np.any(theta > HALF_PI)):
        raise IllPosedFitError("theta axis: measurements must straddle pi/2")
    if np.unique(np.round(dsr, 12)).size < 2:
        raise IllPosedFitError("dsr axis: measurements need at least two dsr values")


class _Problem:
    def __init__(self, theta, dsr, y, w):
        self.theta, self.dsr, self.y = theta, dsr, y
        self.sw = np.sqrt(w)
        self.s = np.sign(theta - HALF_PI)
        self.sin_t = np.sin(theta)

    def residual(self, x) -> np.ndarray:
        return self.sw * (self.y - _model(x, self.theta, self.dsr))

    def cost(self, x) -> float:
        r = self.residual(x)
        return float(r @ r)

    def jacobian(self, x) -> np.ndarray:
        k1, k2, b = x
        eps = self.s * (k2 * (self.dsr - 1.0) + b)
        dy_dk1 = -self.sin_t * np.sin(eps) / 2.0
        dy_deps = -k1 * self.sin_t * np.cos(eps) / 2.0
        cols = [dy_dk1, dy_deps * self.s * (self.dsr - 1.0), dy_deps * self.s]
        return -self.sw[:, None] * np.stack(cols, axis=1)


def _coordinate_descent(prob: _Problem, x: np.ndarray, sweeps: int = 4) -> np.ndarray:
    x = x.copy()
    for _ in range(sweeps):
        for i in range(3):
            def f(v, i=i):
                z = x.copy()
                z[i] = v
                return prob.cost(z)

            x[i] = minimize_scalar(f, bounds=(LOWER[i], UPPER[i]), method="bounded",
                                   options={"xatol": 1e-10}).x
    return x


def _levenberg_marquardt(prob: _Problem, x: np.ndarray, max_iter: int = 500) -> np.ndarray:
    """Projected LM: steps are clipped into the box, accepted only if cost drops."""
    x = np.clip(x, LOWER, UPPER)
    cost = prob.cost(x)
    lam = 1e-3
    for _ in range(max_iter):
        r = prob.residual(x)
        jac = prob.jacobian(x)
        jtj = jac.T @ jac
        g = jac.T @ r
        # coordinates pinned at a bound with the gradient pushing outward stay fixed
        free = ~(((x <= LOWER) & (g > 0)) | ((x >= UPPER) & (g < 0)))
        if not free.any() or np.linalg.norm(g[free]) < 1e-30:
            break
        improved = False
        while lam < 1e16:
            a = jtj[np.ix_(free, free)]
            a = a + lam * np.diag(np.maximum(np.diag(a), 1e-30))
            try:
                step = np.linalg.solve(a, -g[free])
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            trial = x.copy()
            trial[free] += step
            trial = np.clip(trial, LOWER, UPPER)
            tc = prob.cost(trial)
            if tc < cost:
                small = np.max(np.abs(trial - x)) < 1e-15 * (1 + np.max(np.abs(x)))
                x, cost = trial, tc
                lam = max(lam / 3, 1e-12)
                improved = not small
                break
            lam *= 4
        if not improved:
            break
    return x


def _starts() -> list[np.ndarray]:
    return [np.array([k1, k2, b]) for k1 in (0.5, 1.0) for k2 in (-0.25, 0.0, 0.25)
            for b in (-0.1, 0.0, 0.1)]


def fit_error_params(measurements: Sequence[tuple[float, float, float, int]], pair: Pair = (0, 1),
                     timestamp: float = 0.0) -> ErrorFitParams:
    """Shot-weighted least squares fit of (k1, k2, b) to measured P(00) values.

    ``measurements`` holds (theta, dsr, p00_hat, shots) tuples. Coordinate
    descent from a small grid of starts seeds a projected Levenberg-Marquardt
    refinement; the lowest-cost result wins.
    """
    m = np.asarray(measurements, dtype=float).reshape(-1, 4)
    theta, dsr, y, w = m.T
    _check_design(theta, dsr)
    if np.any(w <= 0):
        raise IllPosedFitError("shot counts must be positive")
    prob = _Problem(theta, dsr, y, w)
    best, best_cost = None, math.inf
    for x0 in _starts():
        x = _levenberg_marquardt(prob, _coordinate_descent(prob, x0))
        c = prob.cost(x)
        if c < best_cost:
            best, best_cost = x, c
    rms = math.sqrt(best_cost / w.sum())
    thetas, dsrs = np.unique(theta), np.unique(dsr)
    return ErrorFitParams(float(best[0]), float(best[1]), float(best[2]), rms, tuple(pair),
                          timestamp, int(thetas.size), int(dsrs.size), int(round(w.mean())))


# -- table -----------------------------------------------------------------

@dataclass
class LUT:
    entries: dict[Pair, ErrorFitParams] = field(default_factory=dict)
    device_clock: float = 0.0
    executions: int = 0

    def fit_for(self, pair: Pair) -> ErrorFitParams:
        pair = tuple(pair)
        e = self.entries.get(pair)
        if e is None:
            raise ConfigurationError(f"LUT has no entry for pair {pair}")
        if not e.ok:
            raise ConfigurationError(f"LUT entry for pair {pair} failed: {e.message}")
        return e

    def to_dict(self) -> dict:
        return {"device_clock": self.device_clock, "executions": self.executions,
                "entries": [self.entries[p].to_dict() for p in sorted(self.entries)]}

    @classmethod
    def from_dict(cls, d: dict, coupling: Iterable[Pair] | None = None) -> "LUT":
        allowed = None if coupling is None else {tuple(p) for p in coupling}
        entries = {}
        for e in d["entries"]:
            fit = ErrorFitParams(**{**e, "pair": tuple(e["pair"])})
            if allowed is not None and fit.pair not in allowed:
                warnings.warn(f"dropping LUT entry for pair {fit.pair}: not in the coupling map")
                continue
            entries[fit.pair] = fit
        return cls(entries, float(d.get("device_clock", 0.0)), int(d.get("executions", 0)))


def _point_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def build_lut(dev, pairs: Iterable[Pair], n1: int = 9, n2: int = 5, shots: int = 8192,
              seed: int = 0, exact: bool = False, mitigate: bool = True) -> LUT:
    """Benchmark every grid point on ``dev`` and fit each pair.

    ``exact=True`` feeds the trajectory-averaged probabilities instead of
    shot frequencies (no sampling noise in the fit input). With ``mitigate``
    the device's per-qubit readout flip rates are inverted out of each
    two-qubit histogram first, so the fit sees gate error only.
    """
    from .compiler import schedule_asap
    from .device import benchmark_circuit, execute, mitigate_readout
    from .quantum import counts_to_probs

    pairs = [tuple(p) for p in pairs]
    for p in pairs:
        if p not in dev.base_pulses:
            raise ConfigurationError(f"pair {p} is not in the coupling map")
    grid = build_grid(pairs, n1, n2)
    data: dict[Pair, list[tuple[float, float, float, int]]] = {p: [] for p in pairs}
    executions = 0
    for i, (pair, theta, dsr) in enumerate(grid):
        prog = schedule_asap(benchmark_circuit(pair, theta), {pair: dsr}, dev)
        res = execute(prog, dev, shots, _point_seed(seed, i))
        executions += 1
        probs = res.probs if exact else counts_to_probs(res.counts, 2)
        if mitigate:
            probs = mitigate_readout(probs, [dev.readout[q] for q in res.measured])
        p00 = float(probs[0])
        data[pair].append((theta, dsr, p00, shots))
    expected = len(pairs) * n1 * n2
    if executions != expected:  # pragma: no cover - structural guard
        raise AssertionError(f"ran {executions} benchmarks, expected {expected}")
    entries = {}
    for p in pairs:
        try:
            entries[p] = fit_error_params(data[p], p, dev.clock)
        except IllPosedFitError as exc:
            entries[p] = ErrorFitParams(math.nan, math.nan, math.nan, 0.0, p, dev.clock, n1, n2,
                                        shots, ok=False, message=str(exc))
    return LUT(entries, dev.clock, executions)
