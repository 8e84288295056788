import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qudit_cdd.noise import (
    FieldTone,
    NoiseModel,
    NoiseTrace,
    OUProcess,
    fourier_amplitude,
    mains,
    ou_series,
    quiet_trace,
    sample_trace,
    suppression_ratio,
)

TWO_PI = 2 * np.pi


def test_quiet_model_gives_zero_trace():
    tr = sample_trace(NoiseModel.quiet(), 0.01, 1e-4, seed=1)
    assert len(tr) == 101
    assert np.all(tr.delta_b == 0) and np.all(tr.laser_detuning == 0) and np.all(tr.drive_amp_factor == 1)


def test_trace_length():
    tr = sample_trace(NoiseModel.quiet(), 0.0105, 1e-3, seed=0)
    assert len(tr) == math.ceil(0.0105 / 1e-3) + 1


def test_mains_is_exact_sinusoid():
    a = 2e-4
    tr = sample_trace(NoiseModel(mains=(mains(1, a),)), 0.04, 1e-4, seed=3)
    assert np.allclose(tr.delta_b, a * np.sin(TWO_PI * 50 * tr.times), atol=1e-18)


def test_mains_random_phase_changes_per_seed():
    m = NoiseModel(mains=(mains(1, 1e-4, random_phase=True),))
    a = sample_trace(m, 0.02, 1e-4, seed=1).delta_b
    b = sample_trace(m, 0.02, 1e-4, seed=2).delta_b
    assert not np.allclose(a, b)
    assert np.max(np.abs(a)) == pytest.approx(1e-4, rel=1e-2)


def test_seed_determinism():
    m = NoiseModel(0.1e-3, (mains(1, 1e-4, random_phase=True),), OUProcess(1e-4, 2e-3), 1e-3, OUProcess(300.0, 5e-4))
    a = sample_trace(m, 0.02, 2e-5, seed=42)
    b = sample_trace(m, 0.02, 2e-5, seed=42)
    for x, y in ((a.delta_b, b.delta_b), (a.laser_detuning, b.laser_detuning), (a.drive_amp_factor, b.drive_amp_factor)):
        assert x.tobytes() == y.tobytes()


@settings(max_examples=25)
@given(st.floats(0.01, 100), st.integers(0, 2**32 - 1))
def test_field_scaling_is_linear(factor, seed):
    m = NoiseModel(1e-4, (mains(1, 2e-4), mains(3, 1e-5, random_phase=True)), OUProcess(1e-4, 2e-3))
    a = sample_trace(m, 0.01, 1e-4, seed).delta_b
    b = sample_trace(m.scale_field(factor), 0.01, 1e-4, seed).delta_b
    assert np.allclose(b, factor * a, rtol=1e-12, atol=1e-14 * factor * np.max(np.abs(a)))


def test_undersampling_rejected():
    with pytest.raises(ValueError):
        sample_trace(NoiseModel(broadband=OUProcess(1e-4, 1e-3)), 0.01, 2e-4, seed=0)
    with pytest.raises(ValueError):
        sample_trace(NoiseModel.quiet(), 0.0, 1e-4, seed=0)


def test_invalid_models():
    with pytest.raises(ValueError):
        OUProcess(-1.0, 1.0)
    with pytest.raises(ValueError):
        OUProcess(1.0, 0.0)
    with pytest.raises(ValueError):
        NoiseModel(dc_offset_sigma=-1.0)
    with pytest.raises(ValueError):
        mains(0, 1.0)


def test_ou_stationary_variance_and_autocorrelation():
    proc = OUProcess(sigma=2.0, correlation_time=1e-3)
    dt, n, reps = 1e-4, 40, 10_000
    rng = np.random.default_rng(123)
    x = np.stack([ou_series(rng, n, dt, proc) for _ in range(reps)])
    var = x.var(axis=0)
    assert np.all(np.abs(var / proc.sigma**2 - 1) < 0.05)
    for lag in (0, 5, 10, 20, 30):  # up to 3 tau_c
        c = np.mean(x[:, 0] * x[:, lag]) / proc.sigma**2
        assert c == pytest.approx(math.exp(-lag * dt / proc.correlation_time), abs=0.1 * math.exp(-lag * dt / 1e-3) + 0.02)


def test_trace_interpolation():
    tr = NoiseTrace(1.0, np.array([0.0, 2.0, 4.0]), np.ones(3), np.zeros(3))
    db, amp, las = tr.at(np.array([0.5, 1.75]))
    assert np.allclose(db, [1.0, 3.5])
    with pytest.raises(ValueError):
        tr.at(2.5)


def test_fourier_amplitude():
    dt = 1e-4
    t = dt * np.arange(2001)  # 0.2 s: integer number of periods of both tones
    x = 3e-4 * np.sin(TWO_PI * 50 * t + 0.3) + 1e-4 * np.cos(TWO_PI * 150 * t)
    tr = NoiseTrace(dt, x, np.ones_like(x), np.zeros_like(x))
    assert fourier_amplitude(tr, TWO_PI * 50) == pytest.approx(3e-4, rel=1e-9)
    assert fourier_amplitude(tr, TWO_PI * 150) == pytest.approx(1e-4, rel=1e-9)
    assert fourier_amplitude(quiet_trace(0.1, 1e-3), TWO_PI * 50) == 0
    with pytest.raises(ValueError):
        fourier_amplitude(tr, TWO_PI * 6e3)


def test_suppression_ratio(params):
    kappa = params.linear_sensitivity
    b = TWO_PI * 1e3 / kappa
    assert suppression_ratio(TWO_PI * 50, b, TWO_PI * 1.5e3, params) == pytest.approx(0.6896551724137931, rel=1e-9)
    assert suppression_ratio(TWO_PI * 50, 0.0, TWO_PI * 1.5e3, params) == 0.0
    assert suppression_ratio(TWO_PI * 50, 1e-9, TWO_PI * 1.5e3, params) < 1e-3
    assert suppression_ratio(TWO_PI * 1.5e3, b, TWO_PI * 1.5e3, params) == math.inf


def test_max_step():
    m = NoiseModel(mains=(FieldTone(100.0, 1e-4),), broadband=OUProcess(1e-4, 2e-3), laser_freq=OUProcess(1.0, 5e-4))
    assert m.max_step() == pytest.approx(5e-5)
    assert NoiseModel.quiet().max_step() == math.inf
    assert NoiseModel.quiet().is_quiet and not m.is_quiet
