"""Classical fluctuation processes: magnetic field, RF amplitude, laser frequency.

A :class:`NoiseModel` describes the statistics; :func:`sample_trace` turns it
into a reproducible time series for one experimental shot.  Magnetic noise
is the sum of

* a per-shot constant offset (Gaussian, ``dc_offset_sigma``),
* deterministic tones, e.g. mains harmonics, with a fixed phase (the
  experiment is triggered on the line) or a phase drawn per shot,
* a broadband Ornstein-Uhlenbeck component.

Laser frequency noise is an independent OU process (rad/s) and the dressing
amplitude error is a per-shot relative factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import lfilter

from .physics import ZeemanParams

MAINS_FREQUENCY = 50.0  # Hz


@dataclass(frozen=True)
class FieldTone:
    """Sinusoidal field component ``amplitude * sin(2 pi f t + phase)`` in gauss."""

    frequency: float  # Hz
    amplitude: float
    phase: float = 0.0
    random_phase: bool = False

    def __post_init__(self):
        if self.frequency < 0:
            raise ValueError("tone frequency must be non-negative")


def mains(harmonic: int, amplitude: float, phase: float = 0.0, random_phase: bool = False) -> FieldTone:
    if harmonic < 1:
        raise ValueError("harmonic index starts at 1")
    return FieldTone(harmonic * MAINS_FREQUENCY, amplitude, phase, random_phase)


@dataclass(frozen=True)
class OUProcess:
    sigma: float
    correlation_time: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if not self.correlation_time > 0:
            raise ValueError("correlation time must be positive")


@dataclass(frozen=True)
class NoiseModel:
    dc_offset_sigma: float = 0.0  # G
    mains: tuple[FieldTone, ...] = ()
    broadband: OUProcess | None = None  # sigma in G
    drive_amp_rel_sigma: float = 0.0
    laser_freq: OUProcess | None = None  # sigma in rad/s

    def __post_init__(self):
        object.__setattr__(self, "mains", tuple(self.mains))
        if self.dc_offset_sigma < 0 or self.drive_amp_rel_sigma < 0:
            raise ValueError("sigmas must be non-negative")

    @classmethod
    def quiet(cls) -> "NoiseModel":
        return cls()

    def scale_field(self, factor: float) -> "NoiseModel":
        """Scale every magnetic amplitude (offset, tones, broadband) by ``factor``."""
        bb = None if self.broadband is None else replace(self.broadband, sigma=self.broadband.sigma * factor)
        return replace(
            self,
            dc_offset_sigma=self.dc_offset_sigma * factor,
            mains=tuple(replace(t, amplitude=t.amplitude * factor) for t in self.mains),
            broadband=bb,
        )

    def scale_laser(self, factor: float) -> "NoiseModel":
        if self.laser_freq is None:
            return self
        return replace(self, laser_freq=replace(self.laser_freq, sigma=self.laser_freq.sigma * factor))

    def with_tones(self, *tones: FieldTone) -> "NoiseModel":
        return replace(self, mains=self.mains + tuple(tones))

    @property
    def is_quiet(self) -> bool:
        return (
            self.dc_offset_sigma == 0
            and all(t.amplitude == 0 for t in self.mains)
            and (self.broadband is None or self.broadband.sigma == 0)
            and self.drive_amp_rel_sigma == 0
            and (self.laser_freq is None or self.laser_freq.sigma == 0)
        )

    def max_step(self) -> float:
        """Largest trace step that resolves every component (s)."""
        limits = [math.inf]
        for p in (self.broadband, self.laser_freq):
            if p is not None:
                limits.append(p.correlation_time / 10)
        for t in self.mains:
            if t.frequency > 0:
                limits.append(1.0 / (20 * t.frequency))
        return min(limits)


@dataclass(frozen=True)
class NoiseTrace:
    dt: float
    delta_b: np.ndarray  # G
    drive_amp_factor: np.ndarray
    laser_detuning: np.ndarray  # rad/s
    seed: int = 0
    t0: float = field(default=0.0)

    def __len__(self):
        return len(self.delta_b)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self))

    @property
    def duration(self) -> float:
        return self.dt * (len(self) - 1)

    def at(self, t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Linearly interpolated (delta_b, drive_amp_factor, laser_detuning) at ``t``."""
        x = (np.asarray(t, dtype=float) - self.t0) / self.dt
        if np.any(x < -1e-9) or np.any(x > len(self) - 1 + 1e-9):
            raise ValueError("requested time outside the noise trace")
        i = np.clip(np.floor(x).astype(int), 0, max(len(self) - 2, 0))
        f = x - i
        if len(self) == 1:
            return self.delta_b[i], self.drive_amp_factor[i], self.laser_detuning[i]
        out = []
        for arr in (self.delta_b, self.drive_amp_factor, self.laser_detuning):
            out.append(arr[i] * (1 - f) + arr[i + 1] * f)
        return tuple(out)


def quiet_trace(duration: float, dt: float) -> NoiseTrace:
    n = int(math.ceil(duration / dt - 1e-9)) + 1
    z = np.zeros(n)
    return NoiseTrace(dt, z, np.ones(n), z.copy())


def ou_series(rng: np.random.Generator, n: int, dt: float, process: OUProcess | None) -> np.ndarray:
    """Exact discretisation of a stationary OU process started from its stationary law.

    Random numbers are drawn even for a missing or zero-sigma process so that
    the stream consumed per trace never depends on the amplitudes.
    """
    xi = rng.standard_normal(n)
    if process is None:
        return np.zeros(n)
    a = math.exp(-dt / process.correlation_time)
    b = math.sqrt(-math.expm1(-2 * dt / process.correlation_time))
    # x[0] = xi[0]; x[k] = a x[k-1] + b xi[k]  (unit variance), then scale.
    x = lfilter([1.0], [1.0, -a], np.concatenate(([xi[0]], b * xi[1:])))
    return process.sigma * x


def sample_trace(model: NoiseModel, duration: float, dt: float, seed) -> NoiseTrace:
    """Draw one shot of every fluctuating quantity on a uniform grid.

    The trace has ``ceil(duration/dt) + 1`` samples starting at t = 0 and is
    bit-for-bit reproducible from ``(model, duration, dt, seed)``.
    """
    if not (dt > 0 and duration > 0):
        raise ValueError("duration and dt must be positive")
    if dt > model.max_step() * (1 + 1e-12):
        raise ValueError(f"dt={dt:g} s undersamples the noise model (max {model.max_step():g} s)")
    n = int(math.ceil(duration / dt - 1e-9)) + 1
    t = dt * np.arange(n)
    rng = np.random.default_rng(seed)

    offset = model.dc_offset_sigma * rng.standard_normal()
    amp = 1.0 + model.drive_amp_rel_sigma * rng.standard_normal()
    random_phases = rng.uniform(0, 2 * np.pi, size=len(model.mains))
    broadband = ou_series(rng, n, dt, model.broadband)
    laser = ou_series(rng, n, dt, model.laser_freq)

    delta_b = np.full(n, offset) + broadband
    for tone, rphase in zip(model.mains, random_phases):
        phase = rphase if tone.random_phase else tone.phase
        delta_b = delta_b + tone.amplitude * np.sin(2 * np.pi * tone.frequency * t + phase)
    seed_int = int(seed) if isinstance(seed, (int, np.integer)) else 0
    return NoiseTrace(dt, delta_b, np.full(n, amp), laser, seed_int)


def fourier_amplitude(trace: NoiseTrace, omega: float) -> float:
    """Amplitude of the ``omega`` (rad/s) component of ``delta_b``.

    Normalised so that ``A sin(omega t + p)`` sampled over an integer number
    of periods returns ``A``.  The trace is used as a half-open window (the
    final sample, which duplicates the first period boundary, is dropped).
    """
    n = len(trace)
    if n == 0:
        raise ValueError("empty trace")
    nyquist = np.pi / trace.dt
    if abs(omega) > nyquist:
        raise ValueError(f"omega={omega:g} rad/s above the Nyquist limit {nyquist:g}")
    x = trace.delta_b[:-1] if n > 1 else trace.delta_b
    t = trace.dt * np.arange(len(x))
    proj = np.sum(x * np.exp(-1j * omega * t)) / len(x)
    scale = 1.0 if omega == 0 else 2.0
    return float(scale * abs(proj))


def suppression_ratio(omega: float, b_tilde: float, dressing_gap: float, params: ZeemanParams) -> float:
    """Left-hand side of the resonance criterion ``|k b(w)| / |w - gap|``.

    Values of order one or larger mean the noise component can drive the
    transition between dressed states; exact resonance returns ``inf``.
    """
    coupling = abs(params.linear_sensitivity * b_tilde)
    if coupling == 0:
        return 0.0
    if omega == dressing_gap:
        return math.inf
    return coupling / abs(omega - dressing_gap)
