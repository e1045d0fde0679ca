import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qupad.compiler import schedule_asap
from qupad.device import (BOUNDS, DeviceModel, benchmark_circuit, benchmark_rzx, drift, execute,
                          mitigate_readout, over_rotation)
from qupad.errors import ConfigurationError
from qupad.quantum import Circuit


def quiet_device(n=2, **errors):
    dev = DeviceModel.random(n, seed=0, noiseless=True)
    for p in dev.coupling:
        dev.errors[p] = {"k1": 1.0, "k2": 0.0, "b": 0.0, **errors}
    return dev


def test_snapshot_is_deterministic_and_round_trips():
    a = DeviceModel.random(6, seed=7)
    b = DeviceModel.random(6, seed=7)
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())
    assert json.dumps(DeviceModel.from_dict(a.to_dict()).to_dict()) == json.dumps(a.to_dict())
    assert json.dumps(drift(a, 3).to_dict()) == json.dumps(drift(b, 3).to_dict())
    assert DeviceModel.random(6, seed=8).to_dict() != a.to_dict()


def test_default_parameter_ranges():
    dev = DeviceModel.random(8, seed=3)
    assert len(dev.coupling) == 14
    for p in dev.coupling:
        e = dev.errors[p]
        assert 0.85 <= e["k1"] <= 1 and 0.1 <= e["k2"] <= 0.5 and 0.04 <= abs(e["b"]) <= 0.08
    assert all(t2 <= 2 * t1 for t1, t2 in zip(dev.t1_us, dev.t2_us))
    assert all(0.005 <= r <= 0.015 for r in dev.readout)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1000), st.floats(0.1, 400))
def test_drift_stays_in_bounds(seed, days):
    dev = drift(DeviceModel.random(4, seed=seed), days)
    assert dev.clock == pytest.approx(days)
    for e in dev.errors.values():
        for k, v in e.items():
            lo, hi = BOUNDS[k]
            assert lo <= v <= hi
    assert all(BOUNDS["t1_us"][0] <= t <= BOUNDS["t1_us"][1] for t in dev.t1_us)


def test_drift_composes_and_leaves_input_untouched():
    dev = DeviceModel.random(3, seed=1)
    before = json.dumps(dev.to_dict())
    later = drift(dev, 6)
    assert json.dumps(dev.to_dict()) == before
    assert later.errors != dev.errors
    assert drift(dev, 0).to_dict() == dev.to_dict()
    with pytest.raises(ValueError):
        drift(dev, -1)


def test_malformed_snapshot_names_field():
    d = DeviceModel.random(2, seed=0).to_dict()
    del d["errors"][0]["k2"]
    with pytest.raises(ConfigurationError, match=r"\$\.errors\[0\]\.k2"):
        DeviceModel.from_dict(d)
    bad = DeviceModel.random(2, seed=0).to_dict()
    bad["errors"][0]["b"] = 0.5
    with pytest.raises(ConfigurationError):
        DeviceModel.from_dict(bad)


def test_noiseless_half_rotation():
    dev = DeviceModel.random(2, seed=0, noiseless=True)
    p00 = benchmark_rzx(dev, (0, 1), math.pi / 2, 1.0, 100_000, seed=4)
    assert p00 == pytest.approx(0.5, abs=0.005)


def test_over_rotation_example():
    # b = 0.05 at dsr = 1 and theta = pi/4 turns the angle into pi/4 - 0.05
    dev = quiet_device(b=0.05)
    assert over_rotation(dev, (0, 1), math.pi / 4, 1.0) == pytest.approx(-0.05)
    prog = schedule_asap(benchmark_circuit((0, 1), math.pi / 4), {(0, 1): 1.0}, dev)
    res = execute(prog, dev, 2000, seed=0)
    assert res.probs[0] == pytest.approx((math.cos(math.pi / 4 - 0.05) + 1) / 2, abs=1e-12)


def test_over_rotation_sign_and_dsr_dependence():
    dev = quiet_device(k2=0.3, b=0.06)
    assert over_rotation(dev, (0, 1), 1.0, 0.8) == pytest.approx(0.0)
    assert over_rotation(dev, (0, 1), -1.0, 1.2) == pytest.approx(0.12)
    assert over_rotation(dev, (0, 1), math.pi / 2, 1.4) == 0.0


def test_identity_rotation_at_default_noise():
    dev = DeviceModel.random(2, seed=5)
    assert benchmark_rzx(dev, (0, 1), 0.0, 1.0, 20_000, seed=1) > 0.98


def test_longer_schedules_are_noisier():
    dev = quiet_device(4)
    dev.t1_us = [5.0] * 4
    c = Circuit(4)
    for _ in range(4):
        for q in range(3):
            c.rzx(q, q + 1, 1.2)
    c.measure()
    fid = []
    for d in (0.6, 0.9, 1.2, 1.5):
        prog = schedule_asap(c, {(q, q + 1): d for q in range(3)}, dev)
        fid.append(execute(prog, dev, 20_000, seed=2).state_fidelity)
    assert all(b < a for a, b in zip(fid, fid[1:])), fid


def test_execution_is_seeded():
    dev = DeviceModel.random(3, seed=2)
    c = Circuit(3)
    c.h(0)
    c.rzx(0, 1, 0.7)
    c.measure(0, 1)
    prog = schedule_asap(c, None, dev)
    a, b = execute(prog, dev, 3000, seed=9), execute(prog, dev, 3000, seed=9)
    assert a.counts == b.counts
    assert a.measured == (0, 1) and all(len(k) == 2 for k in a.counts)
    assert sum(a.counts.values()) == 3000


def test_readout_mitigation_inverts_confusion():
    rng = np.random.default_rng(0)
    p = rng.dirichlet(np.ones(4))
    flips = [0.02, 0.05]
    noisy = p.reshape(2, 2).copy()
    for j, r in enumerate(flips):
        conf = np.array([[1 - r, r], [r, 1 - r]])
        axis = 1 - j
        noisy = np.moveaxis(np.tensordot(conf, noisy, axes=([1], [axis])), 0, axis)
    assert np.allclose(mitigate_readout(noisy.reshape(-1), flips), p)


def test_unknown_pair_rejected():
    dev = DeviceModel.random(3, seed=0)
    with pytest.raises(ConfigurationError):
        benchmark_rzx(dev, (0, 2), 1.0, 1.0, 10, seed=0)
    with pytest.raises(ConfigurationError):
        DeviceModel.random(1)
