import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from scipy.optimize import least_squares
from hypothesis import strategies as st

from qupad.device import DeviceModel, drift
from qupad.errors import ConfigurationError, IllPosedFitError
from qupad.lut import (LUT, ErrorFitParams, build_grid, build_lut, dsr_grid, fit_error_params,
                       gate_error, predict_p00, theta_grid)

TRUE = (0.95, 0.08, 0.03)


def synthetic(true=TRUE, shots=None, seed=0):
    rng = np.random.default_rng(seed)
    fit = ErrorFitParams(*true)
    rows = []
    for t in theta_grid(9):
        for d in dsr_grid(5):
            y = predict_p00(t, d, fit)
            if shots:
                y = rng.binomial(shots, y) / shots
            rows.append((t, d, y, shots or 8192))
    return rows


def test_predict_example():
    fit = ErrorFitParams(1.0, 0.1, 0.02)
    expected = (math.cos(math.pi / 4) - math.sin(math.pi / 4) * math.sin(-0.04) + 1) / 2
    assert predict_p00(math.pi / 4, 1.2, fit) == pytest.approx(expected, abs=1e-15)
    assert expected == pytest.approx(0.8677, abs=1e-4)
    assert predict_p00(math.pi / 2, 1.3, fit) == 0.5
    assert predict_p00(1e-9, 0.6, fit) == pytest.approx(1.0)


def test_gate_error_example():
    fit = ErrorFitParams(1.0, 0.1, 0.02)
    assert gate_error(math.pi / 4, 1.2, fit) == pytest.approx(abs(math.sin(math.pi / 4) * math.sin(-0.04)) / 2)
    assert gate_error(math.pi / 4, 1.2, fit) == pytest.approx(0.01414, abs=1e-5)
    assert gate_error(math.pi / 2, 1.4, fit) == 0.0
    assert gate_error(0.0, 1.4, fit) == 0.0


# kept away from 0 and pi, where the raw prediction can leave [0, 1] and gets clamped
@given(st.floats(0.4, math.pi - 0.4), st.floats(0.6, 1.5))
def test_gate_error_is_prediction_gap(theta, dsr):
    fit = ErrorFitParams(0.9, 0.3, -0.05)
    gap = abs(predict_p00(theta, dsr, fit) - (math.cos(theta) + 1) / 2)
    assert gate_error(theta, dsr, fit) == pytest.approx(gap, abs=1e-12)
    # mirror symmetry: Er(pi - theta) equals Er(theta) with the error sign flipped
    flipped = ErrorFitParams(0.9, -0.3, 0.05)
    assert gate_error(math.pi - theta, dsr, fit) == pytest.approx(gate_error(theta, dsr, flipped), abs=1e-12)
    assert gate_error(-theta, dsr, fit) == gate_error(theta, dsr, fit)


def test_grid_shapes():
    assert len(build_grid([(0, 1)], 3, 2)) == 6
    assert len(build_grid([(i, i + 1) for i in range(7)], 9, 5)) == 315
    t = theta_grid(9)
    assert np.all(np.diff(t) > 0) and not np.any(np.isclose(t, math.pi / 2))
    assert t[0] == pytest.approx(math.pi / 8) and t[-1] == pytest.approx(7 * math.pi / 8)
    assert np.any(t < math.pi / 2) and np.any(t > math.pi / 2)
    d = dsr_grid(5)
    assert d[0] == 0.6 and d[-1] == 1.5 and np.all(np.diff(d) > 0)
    with pytest.raises(ValueError):
        build_grid([(0, 1)], 2, 5)


def test_noiseless_recovery_and_consistency():
    rows = synthetic()
    fit = fit_error_params(rows)
    assert np.allclose(fit.vector, TRUE, atol=1e-6)
    assert fit.residual_rms < 1e-9
    assert (fit.n1, fit.n2, fit.shots) == (9, 5, 8192)


def test_residual_rms_identity():
    rows = synthetic(shots=8192, seed=3)
    fit = fit_error_params(rows)
    r = np.array([y - predict_p00(t, d, fit) for t, d, y, _ in rows])
    assert fit.residual_rms == pytest.approx(math.sqrt(np.mean(r ** 2)), rel=1e-9)


@pytest.mark.parametrize("seed", range(4))
def test_fit_matches_reference_solver(seed):
    # a different bounded least-squares solver, started from a dense grid,
    # must not find a lower weighted cost than the in-house fit
    rows = synthetic(true=(0.9, 0.25, -0.05), shots=4096, seed=seed)
    t, d, y, w = np.asarray(rows, dtype=float).T
    res = lambda x: np.sqrt(w) * (y - (np.cos(t) - x[0] * np.sin(t)
                                       * np.sin((x[1] * (d - 1) + x[2]) * np.sign(t - math.pi / 2)) + 1) / 2)
    ours = float(np.sum(res(fit_error_params(rows).vector) ** 2))
    ref = min(least_squares(res, x0, bounds=([1e-3, -0.5, -0.2], [1.5, 0.5, 0.2]), xtol=1e-14,
                            ftol=1e-14, gtol=1e-14).cost * 2
              for x0 in [(k1, k2, b) for k1 in (0.3, 0.8, 1.3) for k2 in (-0.4, 0.0, 0.4)
                         for b in (-0.15, 0.0, 0.15)])
    assert ours <= ref * (1 + 1e-6) + 1e-12


def test_shot_noise_fit_reproduces_products():
    # with 8192 shots the data pin down k1*k2 and k1*b even when k1 alone wanders
    k1, k2, b = TRUE
    for seed in range(5):
        fit = fit_error_params(synthetic(shots=8192, seed=seed))
        assert fit.k1 * fit.k2 == pytest.approx(k1 * k2, rel=0.15)
        assert fit.k1 * fit.b == pytest.approx(k1 * b, rel=0.15)


def test_error_shrinks_with_shots():
    """4x the shots should halve the median per-parameter error (ratio in [1.5, 3])."""
    med = {}
    for shots in (8192, 4 * 8192):
        errs = [np.abs(fit_error_params(synthetic(shots=shots, seed=s)).vector - TRUE) for s in range(20)]
        med[shots] = np.median(errs, axis=0)
    ratio = med[8192] / med[4 * 8192]
    assert np.all((ratio >= 1.5) & (ratio <= 3.0)), ratio


def test_ill_posed_designs_name_the_axis():
    rows = synthetic()
    one_side = [r for r in rows if r[0] < math.pi / 2]
    with pytest.raises(IllPosedFitError, match="theta"):
        fit_error_params(one_side)
    one_dsr = [r for r in rows if r[1] == 0.6]
    with pytest.raises(IllPosedFitError, match="dsr"):
        fit_error_params(one_dsr)
    with pytest.raises(IllPosedFitError):
        fit_error_params(rows[:5])


def test_device_fit_near_shot_noise_floor():
    dev = DeviceModel.random(3, seed=1)
    lut = build_lut(dev, [(0, 1), (1, 2)], seed=1)
    for fit in lut.entries.values():
        y = np.array([predict_p00(t, d, fit) for t in theta_grid(9) for d in dsr_grid(5)])
        floor = np.mean(np.sqrt(y * (1 - y) / 8192))
        assert fit.residual_rms <= 3 * floor


def test_noiseless_device_exact_mode():
    dev = DeviceModel.random(3, seed=0, noiseless=True)
    lut = build_lut(dev, [(0, 1), (2, 1)], exact=True)
    assert lut.executions == 90
    for fit in lut.entries.values():
        assert fit.residual_rms < 1e-6
        assert abs(fit.k2) < 1e-6 and abs(fit.b) < 1e-6


def test_rebuild_after_drift_differs_and_is_stamped():
    dev = DeviceModel.random(3, seed=4)
    a = build_lut(dev, [(0, 1)], seed=0)
    later = drift(dev, 6)
    b = build_lut(later, [(0, 1)], seed=0)
    assert a.device_clock == 0 and b.device_clock == 6
    assert not np.allclose(a.fit_for((0, 1)).vector, b.fit_for((0, 1)).vector)


def test_lut_persistence():
    dev = DeviceModel.random(3, seed=0)
    lut = build_lut(dev, [(0, 1)], n1=3, n2=2, shots=512)
    text = json.dumps(lut.to_dict())
    again = LUT.from_dict(json.loads(text), dev.coupling)
    assert json.dumps(again.to_dict()) == text
    small = DeviceModel.random(2, seed=0)
    moved = lut.to_dict()
    moved["entries"][0]["pair"] = [1, 2]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        dropped = LUT.from_dict(moved, small.coupling)
    assert not dropped.entries and caught
    with pytest.raises(ConfigurationError):
        dropped.fit_for((1, 2))
    with pytest.raises(ConfigurationError):
        build_lut(small, [(0, 2)])
