"""CSV datasets behind the duration, benchmark, fidelity and loss-trace plots."""
from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .compiler import schedule_asap
from .device import DeviceModel, benchmark_rzx, drift, execute
from .quantum import Circuit, counts_to_probs, probabilities, simulate, tvd

HEADERS = {
    "duration": ["theta", "duration_dt", "duration_us"],
    "benchmark": ["theta", "dsr", "p00_measured", "p00_ideal"],
    "fidelity": ["day", "dsr", "fidelity", "duration_dt"],
    "loss-trace": ["generation", "best_in_generation", "best_so_far", "sigma"],
}


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])


def read_csv(path: str | Path) -> tuple[list[str], list[list[float]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], [[float(v) for v in r] for r in rows[1:]]


def duration_curve(dev: DeviceModel, pair=(0, 1), points: int = 101, dsr: float = 1.0):
    """Schedule length of a lone Rzx(theta) over a symmetric grid on [-pi, pi]."""
    rows = []
    for theta in np.linspace(-math.pi, math.pi, points):
        c = Circuit(max(pair) + 1)
        c.rzx(pair[0], pair[1], float(theta))
        d = schedule_asap(c, {tuple(pair): dsr}, dev).total_duration
        rows.append((float(theta), d, d * dev.dt_ns * 1e-3))
    return rows


def benchmark_surface(dev: DeviceModel, pair=(0, 1), thetas=None, dsrs=None, shots: int = 8192,
                      seed: int = 0):
    thetas = np.linspace(0.05, math.pi - 0.05, 25) if thetas is None else thetas
    dsrs = np.linspace(0.6, 1.5, 5) if dsrs is None else dsrs
    rows = []
    for i, t in enumerate(thetas):
        for j, d in enumerate(dsrs):
            p = benchmark_rzx(dev, pair, float(t), float(d), shots, seed + 1000 * i + j)
            rows.append((float(t), float(d), p, math.cos(t / 2) ** 2))
    return rows


def fidelity(result, ideal: np.ndarray) -> float:
    """1 - TVD between the measured histogram and the ideal distribution."""
    return 1.0 - tvd(counts_to_probs(result.counts, len(result.measured)), ideal)


def fidelity_vs_dsr(dev: DeviceModel, circuit: Circuit, params=None, days: Sequence[float] = (0.0,),
                    dsrs=None, shots: int = 8192, seed: int = 0):
    """Output fidelity with one dsr applied to every pair, on several drift days."""
    dsrs = np.linspace(0.6, 1.5, 10) if dsrs is None else dsrs
    measured = circuit.copy()
    if not any(g.kind == "measure" for g in measured.gates):
        measured.measure()
    ideal = probabilities(simulate(circuit, params))
    rows = []
    snap, clock = dev, 0.0
    for day in days:
        if day > clock:
            snap = drift(snap, day - clock)
            clock = day
        for d in dsrs:
            prog = schedule_asap(measured, _uniform(measured, snap, float(d)), snap, params)
            res = execute(prog, snap, shots, seed)
            rows.append((float(day), float(d), fidelity(res, ideal), prog.total_duration))
    return rows


def _uniform(c: Circuit, dev: DeviceModel, value: float):
    return {tuple(g.qubits): value for g in c.gates if g.kind == "rzx"}


def loss_trace_rows(report) -> list[tuple]:
    return [(r.generation, r.best_in_generation, r.best_so_far, r.sigma) for r in report.trace]
