"""Command-line entry point: ``qupad device|train|lut|calibrate|run|report``.

Exit codes: 0 success, 2 configuration error, 3 numeric failure,
4 infeasible calibration.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import reports
from .ansatz import hardware_efficient_ansatz
from .calibrator import CalibConfig, assignment_from_dict, calibrate
from .compiler import schedule_asap, used_pairs
from .device import DeviceModel, drift, execute
from .experiments import estimate_energy
from .errors import (ConfigurationError, DivergenceError, IllPosedFitError,
                     InfeasibleCalibrationError)
from .lut import LUT, build_lut
from .quantum import Circuit, circuit_expectation, probabilities, simulate
from .tasks import VQETask, make_classification, task_from_dict, tfim_hamiltonian
from .trainer import TrainConfig, model_to_dict, train

log = logging.getLogger("qupad")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_INFEASIBLE = 0, 2, 3, 4


@dataclass
class LutConfig:
    n1: int = 9
    n2: int = 5
    shots: int = 8192


@dataclass
class TaskConfig:
    kind: str = "vqe"  # vqe | classify
    qubits: int = 4
    field: float = 1.0  # transverse field of the Ising chain
    samples: int = 60
    layers: int = 3


@dataclass
class PipelineConfig:
    """Settings shared by every subcommand; CLI flags override file values."""

    device: str | None = None
    task: TaskConfig = field(default_factory=TaskConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    calib: CalibConfig = field(default_factory=CalibConfig)
    lut: LutConfig = field(default_factory=LutConfig)
    out: str | None = None
    seed: int = 0
    shots: int = 8192

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigurationError(f"unknown config keys: {sorted(extra)}")

        def sub(kind, key):
            raw = d.get(key, {})
            names = {f.name for f in fields(kind)}
            bad = set(raw) - names
            if bad:
                raise ConfigurationError(f"unknown keys in {key}: {sorted(bad)}")
            if kind is TrainConfig and "adam_betas" in raw:
                raw = {**raw, "adam_betas": tuple(raw["adam_betas"])}
            return kind(**raw)

        cfg = cls(device=d.get("device"), task=sub(TaskConfig, "task"), train=sub(TrainConfig, "train"),
                  calib=sub(CalibConfig, "calib"), lut=sub(LutConfig, "lut"),
                  out=d.get("out"), seed=int(d.get("seed", 0)),
                  shots=int(d.get("shots", 8192)))
        if cfg.device is not None and not Path(cfg.device).exists():
            raise ConfigurationError(f"device snapshot {cfg.device} does not exist")
        return cfg


def _read_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path} is not valid JSON: {exc}") from None


def _write_json(path, obj) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.from_dict(_read_json(args.config)) if args.config else PipelineConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    return cfg


def _load_device(path) -> DeviceModel:
    if path is None:
        raise ConfigurationError("a device snapshot is required (--device or config 'device')")
    return DeviceModel.from_dict(_read_json(path))


# -- device ------------------------------------------------------------------

def cmd_device(args, cfg: PipelineConfig) -> int:
    if args.action == "new":
        dev = DeviceModel.random(args.qubits, seed=cfg.seed, noiseless=args.noiseless)
        _write_json(cfg.out, dev.to_dict())
        print(f"wrote {cfg.out}: {dev.n} qubits, {len(dev.coupling)} directed pairs")
    elif args.action == "drift":
        dev = drift(_load_device(args.device or cfg.device), args.days)
        _write_json(cfg.out, dev.to_dict())
        print(f"wrote {cfg.out}: clock {dev.clock:g} days")
    else:
        dev = _load_device(args.device or cfg.device)
        print(f"qubits {dev.n}  clock {dev.clock:g} days  dt {dev.dt_ns} ns")
        for q in range(dev.n):
            print(f"  q{q}: T1 {dev.t1_us[q]:.2f} us  T2 {dev.t2_us[q]:.2f} us  "
                  f"readout {dev.readout[q]:.4f}")
        for p in dev.coupling:
            e = dev.errors[p]
            print(f"  {p[0]}->{p[1]}: k1 {e['k1']:.4f}  k2 {e['k2']:+.4f}  b {e['b']:+.4f}")
    return EXIT_OK


# -- train -------------------------------------------------------------------

def _build_task(tc: TaskConfig, seed: int):
    if tc.kind == "vqe":
        return VQETask(tfim_hamiltonian(tc.qubits, tc.field))
    if tc.kind == "classify":
        return make_classification(tc.samples, n_features=tc.qubits, seed=seed)
    raise ConfigurationError(f"unknown task kind {tc.kind!r}")


def cmd_train(args, cfg: PipelineConfig) -> int:
    tc = cfg.task
    if args.beta is not None:
        cfg.train.beta = args.beta
    if args.task is not None:
        tc.kind = args.task
    task = _build_task(tc, cfg.seed)
    circuit = hardware_efficient_ansatz(tc.qubits, tc.layers, seed=cfg.seed)
    cfg.train.seed = cfg.seed
    result = train(circuit, task, cfg.train)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "model.json", model_to_dict(circuit, result, cfg.train, task))
    reports.write_csv(out / "trace.csv", ["iteration", "task_loss", "regu_loss", "duration"],
                      result.trace_rows())
    print(f"final task loss {result.task_trace[-1]:.6f}  regu {result.regu_trace[-1]:.4f}  "
          f"duration {result.final_duration} dt")
    return EXIT_OK


def _load_model(path):
    d = _read_json(path)
    try:
        circuit = Circuit.from_dict(d["circuit"])
        return circuit, np.asarray(d["params"], dtype=float), task_from_dict(d["task"]), d
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"model {path} is malformed: {exc}") from None


# -- lut -------------------------------------------------------------------

def _parse_pairs(text: str) -> list[tuple[int, int]]:
    try:
        return [tuple(int(q) for q in item.split("-")) for item in text.split(",") if item]
    except ValueError:
        raise ConfigurationError(f"bad pair list {text!r}; use e.g. 0-1,1-2") from None


def cmd_lut(args, cfg: PipelineConfig) -> int:
    dev = _load_device(args.device or cfg.device)
    if args.pairs:
        pairs = _parse_pairs(args.pairs)
    elif args.model:
        circuit, params, _, _ = _load_model(args.model)
        pairs = sorted(used_pairs(circuit.bind(params)))
    else:
        pairs = list(dev.coupling)
    lc = cfg.lut
    n1 = args.n1 or lc.n1
    n2 = args.n2 or lc.n2
    shots = args.shots or lc.shots
    lut = build_lut(dev, pairs, n1, n2, shots, seed=cfg.seed)
    print(f"benchmark executions: {lut.executions} = {len(pairs)} pairs x {n1} x {n2}")
    for p, e in sorted(lut.entries.items()):
        status = "" if e.ok else f"  FAILED: {e.message}"
        print(f"  {p}: k1 {e.k1:.4f} k2 {e.k2:+.4f} b {e.b:+.4f} rms {e.residual_rms:.2e}{status}")
    _write_json(cfg.out, lut.to_dict())
    return EXIT_OK


# -- calibrate -------------------------------------------------------------

def cmd_calibrate(args, cfg: PipelineConfig) -> int:
    dev = _load_device(args.device or cfg.device)
    circuit, params, _, _ = _load_model(args.model)
    lut = LUT.from_dict(_read_json(args.lut), dev.coupling)
    cfg.calib.seed = cfg.seed
    assignment, report = calibrate(circuit, lut, dev, cfg.calib, params)
    if not math.isfinite(report.best_loss):
        raise InfeasibleCalibrationError("no dsr assignment avoided amplitude saturation")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "calibration.json", report.to_dict())
    (out / "trace.csv").write_text(report.trace_csv())
    for p, v in sorted(assignment.items()):
        print(f"  {p}: dsr {v:.4f}")
    print(f"loss {report.initial_loss:.5f} at dsr=1 -> {report.best_loss:.5f}")
    return EXIT_OK


# -- run -------------------------------------------------------------------

def cmd_run(args, cfg: PipelineConfig) -> int:
    dev = _load_device(args.device or cfg.device)
    circuit, params, task, _ = _load_model(args.model)
    dsr = assignment_from_dict(_read_json(args.dsr)) if args.dsr else None
    shots = args.shots or cfg.shots
    measured = circuit.copy()
    measured.measure()
    prog = schedule_asap(measured, dsr, dev, params)
    res = execute(prog, dev, shots, cfg.seed)
    ideal = probabilities(simulate(circuit, params))
    summary = {"execution": res.to_dict(), "fidelity": reports.fidelity(res, ideal),
               "dsr": None if dsr is None else [[list(p), v] for p, v in sorted(dsr.items())]}
    if isinstance(task, VQETask):
        summary["energy_ideal"] = circuit_expectation(circuit, task.observable, params)
        summary["energy_measured"] = estimate_energy(circuit, params, task, dev, dsr, shots, cfg.seed)
    _write_json(cfg.out, summary)
    print(f"fidelity {summary['fidelity']:.4f}  duration {res.duration_dt} dt "
          f"({res.duration_us:.3f} us)")
    if "energy_measured" in summary:
        print(f"energy {summary['energy_measured']:.4f} (ideal {summary['energy_ideal']:.4f})")
    return EXIT_OK


# -- report ----------------------------------------------------------------

def cmd_report(args, cfg: PipelineConfig) -> int:
    kind = args.kind
    if kind == "loss-trace":
        if not args.calibration:
            raise ConfigurationError("loss-trace needs --calibration")
        d = _read_json(args.calibration)
        rows = [(r["generation"], r["best_in_generation"], r["best_so_far"], r["sigma"])
                for r in d["trace"]]
    else:
        dev = _load_device(args.device or cfg.device)
        if kind == "duration":
            rows = reports.duration_curve(dev)
        elif kind == "benchmark":
            rows = reports.benchmark_surface(dev, shots=args.shots or cfg.shots, seed=cfg.seed)
        else:
            if not args.model:
                raise ConfigurationError("fidelity report needs --model")
            circuit, params, _, _ = _load_model(args.model)
            days = [float(x) for x in args.days.split(",")] if args.days else [0.0]
            rows = reports.fidelity_vs_dsr(dev, circuit, params, days,
                                           shots=args.shots or cfg.shots, seed=cfg.seed)
    Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
    reports.write_csv(cfg.out, reports.HEADERS[kind], rows)
    print(f"wrote {len(rows)} rows to {cfg.out}")
    return EXIT_OK


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config JSON (default: built-in defaults)")
    common.add_argument("--seed", type=int, default=None, help="global seed (default 0)")
    common.add_argument("--out", default=None, help="output file or directory")

    p = argparse.ArgumentParser(prog="qupad", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("device", parents=[common], help="create, drift or inspect a device snapshot")
    d.add_argument("action", choices=["new", "drift", "show"])
    d.add_argument("--qubits", type=int, default=4, help="qubit count for 'new' (default 4)")
    d.add_argument("--noiseless", action="store_true", help="'new': zero every noise source")
    d.add_argument("--device", help="input snapshot for 'drift' and 'show'")
    d.add_argument("--days", type=float, default=1.0, help="'drift': days to advance (default 1)")
    d.set_defaults(func=cmd_device)

    t = sub.add_parser("train", parents=[common], help="duration-aware training")
    t.add_argument("--task", choices=["vqe", "classify"], default=None)
    t.add_argument("--beta", type=float, default=None, help="regularizer weight (default 0)")
    t.set_defaults(func=cmd_train)

    lu = sub.add_parser("lut", parents=[common], help="benchmark and fit the error table")
    lu.add_argument("--device")
    lu.add_argument("--model", help="take the pairs used by this trained model")
    lu.add_argument("--pairs", help="explicit pairs, e.g. 0-1,1-2 (default: whole coupling map)")
    lu.add_argument("--n1", type=int, default=None, help="theta grid size (default 9)")
    lu.add_argument("--n2", type=int, default=None, help="dsr grid size (default 5)")
    lu.add_argument("--shots", type=int, default=None, help="shots per benchmark (default 8192)")
    lu.set_defaults(func=cmd_lut)

    c = sub.add_parser("calibrate", parents=[common], help="search per-pair dsr with CMA-ES")
    c.add_argument("--device")
    c.add_argument("--model", required=True)
    c.add_argument("--lut", required=True)
    c.set_defaults(func=cmd_calibrate)

    r = sub.add_parser("run", parents=[common], help="execute a trained model on the device")
    r.add_argument("--device")
    r.add_argument("--model", required=True)
    r.add_argument("--dsr", help="calibration.json to apply (default: dsr=1 everywhere)")
    r.add_argument("--shots", type=int, default=None)
    r.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", parents=[common], help="emit plot datasets as CSV")
    rep.add_argument("kind", choices=sorted(reports.HEADERS))
    rep.add_argument("--device")
    rep.add_argument("--model")
    rep.add_argument("--calibration")
    rep.add_argument("--days", help="comma-separated drift days for 'fidelity'")
    rep.add_argument("--shots", type=int, default=None)
    rep.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        if cfg.out is None:
            if args.command in ("train", "calibrate"):
                cfg.out = "qupad-out"
            elif not (args.command == "device" and args.action == "show"):
                raise ConfigurationError("--out is required for this command")
        return args.func(args, cfg)
    except InfeasibleCalibrationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (DivergenceError, IllPosedFitError, ArithmeticError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigurationError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
