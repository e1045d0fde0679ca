"""Seeded end-to-end trials shared by the CLI, the test suite and scripts/."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ansatz import hardware_efficient_ansatz
from .calibrator import CalibConfig, calibrate
from .compiler import schedule_asap, used_pairs
from .device import DeviceModel, drift, execute
from .lut import build_lut
from .quantum import Circuit, probabilities, simulate
from .reports import fidelity
from .tasks import VQETask, basis_rotated, energy_from_counts, ground_energy, measurement_groups, \
    tfim_hamiltonian
from .trainer import TrainConfig, train


def estimate_energy(circuit: Circuit, params, task: VQETask, dev, dsr, shots: int, seed: int) -> float:
    """Energy from sampled counts, one execution per qubit-wise commuting group."""
    counts = {}
    for i, basis in enumerate(measurement_groups(task.observable)):
        prog = schedule_asap(basis_rotated(circuit, basis), dsr, dev, params)
        counts[basis] = execute(prog, dev, shots, seed + i).counts
    return energy_from_counts(task.observable, counts)


def trained_tfim(n: int = 4, layers: int = 3, beta: float = 0.005, iterations: int = 1000,
                 seed: int = 0, lr: float = 0.05):
    task = VQETask(tfim_hamiltonian(n, 1.0))
    circuit = hardware_efficient_ansatz(n, layers, seed=seed)
    res = train(circuit, task, TrainConfig(beta=beta, lr=lr, iterations=iterations, seed=seed))
    return circuit, res.params, task


@dataclass
class TrialOutcome:
    seed: int
    assignment: dict
    fidelity_default: float
    fidelity_calibrated: float
    gap_default: float | None = None
    gap_calibrated: float | None = None


def run_fidelity(circuit: Circuit, params, dev, dsr, shots: int, seed: int) -> float:
    measured = circuit.copy()
    measured.measure()
    res = execute(schedule_asap(measured, dsr, dev, params), dev, shots, seed)
    return fidelity(res, probabilities(simulate(circuit, params)))


def calibration_trial(circuit: Circuit, params, task=None, seed: int = 0, n: int = 4,
                      days: float = 6.0, shots: int = 100_000, lut_shots: int = 8192,
                      calib: CalibConfig | None = None) -> TrialOutcome:
    """Drift a seeded device, build a LUT on the pairs the circuit uses,
    calibrate, then execute with dsr=1 and with the calibrated dsr on the
    same execution seed."""
    dev = drift(DeviceModel.random(n, seed=seed), days)
    pairs = used_pairs(circuit.bind(params))
    lut = build_lut(dev, pairs, shots=lut_shots, seed=seed)
    cfg = calib or CalibConfig(seed=seed)
    assignment, _ = calibrate(circuit, lut, dev, cfg, params)
    out = TrialOutcome(seed, assignment,
                       run_fidelity(circuit, params, dev, None, shots, seed),
                       run_fidelity(circuit, params, dev, assignment, shots, seed))
    if isinstance(task, VQETask):
        e0 = ground_energy(task.observable)
        out.gap_default = abs(estimate_energy(circuit, params, task, dev, None, shots, seed) - e0)
        out.gap_calibrated = abs(estimate_energy(circuit, params, task, dev, assignment, shots, seed) - e0)
    return out


def drift_sensitivity_trial(circuit: Circuit, params, seed: int = 0, n: int = 4, days: float = 6.0,
                            lut_shots: int = 8192, calib: CalibConfig | None = None):
    """dsr* from LUTs built on the fresh snapshot and on one ``days`` later."""
    fresh = DeviceModel.random(n, seed=seed)
    later = drift(fresh, days)
    pairs = used_pairs(circuit.bind(params))
    cfg = calib or CalibConfig(seed=seed)
    out = []
    for dev in (fresh, later):
        lut = build_lut(dev, pairs, shots=lut_shots, seed=seed)
        out.append(calibrate(circuit, lut, dev, cfg, params)[0])
    return out[0], out[1], max(abs(out[0][p] - out[1][p]) for p in out[0])


def spread(values) -> tuple[float, float]:
    v = np.asarray(values, float)
    return float(v.mean()), float(v.std())
