"""Unitary propagation under bare + noise + drive Hamiltonians.

States are complex vectors over a :class:`~qudit_cdd.physics.LevelScheme`.
Propagation uses the fourth-order Magnus integrator with two Gauss nodes
per step: each step is the exponential of
``(H1 + H2)/2 - i sqrt(3) h [H2, H1] / 12``, which is Hermitian, so the
stepper is exactly unitary.  Step exponentials are computed in batches and
restricted to the blocks of levels that are actually coupled, so uncoupled
levels cost one phase per step.

Three frames are available:

``lab``
    Bare Zeeman energies on the diagonal, RF tones oscillate at MHz.
``interaction``
    Every level rotates at its bare energy; tones oscillate at their
    detuning.  Exactly equivalent to ``lab`` for rotating-wave tones.
``dressing``
    The RF-dressing frame: |m+-1> additionally rotate at the dressing
    detuning, so the dressing Hamiltonian is static.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Sequence

import numpy as np

from .dressing import DressingConfig, dressed_basis, dressing_field, frame_offsets
from .noise import NoiseModel, NoiseTrace, quiet_trace, sample_trace
from .physics import DriveField, LevelScheme, ZeemanParams, drive_hamiltonian, level_energies

FRAMES = ("lab", "interaction", "dressing")
STEPS_PER_PERIOD = 200
CHUNK = 8192


@dataclass(frozen=True)
class Segment:
    duration: float
    optical: DriveField | None = None
    dressing: DressingConfig | None = None
    frame: str = "dressing"

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("segment duration must be positive")
        if self.frame not in FRAMES:
            raise ValueError(f"unknown frame {self.frame!r}")
        if self.optical is not None and self.optical.kind != "optical_addressing":
            raise ValueError("the optical slot takes an optical_addressing field")


@dataclass(frozen=True)
class Schedule:
    segments: tuple[Segment, ...]
    t0: float = 0.0

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise ValueError("empty schedule")
        frames = {s.frame for s in segs}
        if len(frames) != 1:
            raise ValueError(f"frame mismatch between segments: {sorted(frames)}")
        deltas = {float(s.dressing.delta) for s in segs if s.dressing is not None}
        if self.frame == "dressing" and len(deltas) > 1:
            raise ValueError("frame mismatch: segments use dressings with different detunings")

    @property
    def frame(self) -> str:
        return self.segments[0].frame

    @property
    def duration(self) -> float:
        return float(sum(s.duration for s in self.segments))

    @property
    def end(self) -> float:
        return self.t0 + self.duration

    @property
    def frame_delta(self) -> float:
        for s in self.segments:
            if s.dressing is not None:
                return float(s.dressing.delta)
        return 0.0

    @property
    def dressing(self) -> DressingConfig | None:
        for s in self.segments:
            if s.dressing is not None:
                return s.dressing
        return None

    def offsets(self, scheme: LevelScheme, params: ZeemanParams) -> np.ndarray:
        return schedule_offsets(self.frame, self.frame_delta, scheme, params)


def schedule_offsets(frame: str, delta: float, scheme: LevelScheme, params: ZeemanParams) -> np.ndarray:
    if frame == "lab":
        return np.zeros(scheme.dim)
    if frame == "interaction":
        return frame_offsets(scheme, params, 0.0)
    if frame == "dressing":
        return frame_offsets(scheme, params, delta)
    raise ValueError(f"unknown frame {frame!r}")


def change_frame(obj: np.ndarray, offsets: np.ndarray, t: float, *, kind: str = "state", inverse: bool = False):
    """Apply ``U = exp(iAt)`` (or its inverse) to a state, operator or Hamiltonian.

    ``kind="hamiltonian"`` also adds the ``-A`` generator term so that the
    result is the Hamiltonian governing the transformed state.
    """
    a = np.asarray(offsets, dtype=float)
    sign = -1.0 if inverse else 1.0
    u = np.exp(sign * 1j * a * t)
    obj = np.asarray(obj)
    if kind == "state":
        return u.reshape((-1,) + (1,) * (obj.ndim - 1)) * obj
    if kind not in ("operator", "hamiltonian"):
        raise ValueError(f"unknown kind {kind!r}")
    out = u[:, None] * obj * np.conj(u)[None, :]
    if kind == "hamiltonian":
        out = out - sign * np.diag(a)
    return out


def segment_hamiltonian(
    seg: Segment,
    t: np.ndarray,
    noise: tuple[np.ndarray, np.ndarray, np.ndarray],
    scheme: LevelScheme,
    params: ZeemanParams,
    offsets: np.ndarray,
    counter_rotating: bool = False,
) -> np.ndarray:
    """Stack of Hamiltonians (rad/s) of ``seg`` at times ``t`` in the frame ``offsets``."""
    t = np.asarray(t, dtype=float)
    delta_b, amp, laser = (np.broadcast_to(np.asarray(x, dtype=float), t.shape) for x in noise)
    d = scheme.dim
    idx = np.arange(d)
    diag = (level_energies(scheme, params) - offsets)[None, :] - (
        params.linear_sensitivity * delta_b[:, None] * scheme.m_values[None, :]
    )
    diag[:, scheme.index("g")] += laser
    h = np.zeros(t.shape + (d, d), dtype=complex)
    h[:, idx, idx] = diag
    if seg.dressing is not None:
        h += drive_hamiltonian(
            dressing_field(seg.dressing, params),
            t,
            scheme,
            params,
            offsets=offsets,
            counter_rotating=counter_rotating,
            amplitude_factor=amp,
        )
    if seg.optical is not None:
        h += drive_hamiltonian(seg.optical, t, scheme, params, offsets=offsets)
    return h


def max_frequency(seg: Segment, scheme: LevelScheme, params: ZeemanParams, offsets, counter_rotating=False) -> float:
    """Largest angular frequency appearing in the segment Hamiltonian (rad/s)."""
    freqs = [np.max(np.abs(level_energies(scheme, params) - offsets))]
    e = level_energies(scheme, params)
    fields = []
    if seg.dressing is not None:
        fields.append((dressing_field(seg.dressing, params), counter_rotating))
    if seg.optical is not None:
        fields.append((seg.optical, False))
    for field, cr in fields:
        for tone in field.tones:
            lo, up = scheme.index(tone.coupling[0]), scheme.index(tone.coupling[1])
            w = e[up] - e[lo] + tone.detuning
            shift = offsets[up] - offsets[lo]
            freqs += [abs(w - shift), tone.rabi]
            if cr:
                freqs.append(abs(w + shift))
    return float(max(freqs))


def default_step(seg: Segment, scheme, params, offsets, counter_rotating=False) -> float:
    """1/(200 f) with f the largest frequency (Hz) active in the frame."""
    w = max_frequency(seg, scheme, params, offsets, counter_rotating)
    if w == 0:
        return math.inf
    return 2 * np.pi / (STEPS_PER_PERIOD * w)


def _components(mask: np.ndarray) -> list[list[int]]:
    d = mask.shape[0]
    parent = list(range(d))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in zip(*np.nonzero(mask)):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for i in range(d):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def step_unitaries(h: np.ndarray, dt) -> np.ndarray:
    """``exp(-i H_k dt_k)`` for a stack of Hermitian ``H_k``, block by block.

    ``dt`` is a scalar or one step length per Hamiltonian.
    """
    n, d, _ = h.shape
    dt = np.broadcast_to(np.asarray(dt, dtype=float), (n,))
    mask = np.any(h != 0, axis=0)
    np.fill_diagonal(mask, False)
    u = np.zeros_like(h)
    for comp in _components(mask):
        if len(comp) == 1:
            j = comp[0]
            u[:, j, j] = np.exp(-1j * h[:, j, j].real * dt)
            continue
        ix = np.array(comp)
        sub = h[:, ix[:, None], ix[None, :]]
        w, v = np.linalg.eigh(sub)
        u[:, ix[:, None], ix[None, :]] = (v * np.exp(-1j * w * dt[:, None])[:, None, :]) @ np.conj(np.swapaxes(v, -1, -2))
    return u


def ordered_product(u: np.ndarray) -> np.ndarray:
    """``u[n-1] @ ... @ u[0]`` by pairwise (tree) reduction."""
    m = u
    eye = np.eye(u.shape[-1], dtype=u.dtype)[None]
    while m.shape[0] > 1:
        if m.shape[0] % 2:
            m = np.concatenate([m, eye], axis=0)
        m = m[1::2] @ m[0::2]
    return m[0]


GAUSS_OFFSET = math.sqrt(3) / 6


def magnus_unitaries(seg, t_mid, h, trace, scheme, params, offsets, counter_rotating=False) -> np.ndarray:
    """Fourth-order Magnus step propagators for steps of length ``h`` centred on ``t_mid``."""
    h = np.broadcast_to(np.asarray(h, dtype=float), np.shape(t_mid))
    t1, t2 = t_mid - GAUSS_OFFSET * h, t_mid + GAUSS_OFFSET * h
    h1 = segment_hamiltonian(seg, t1, trace.at(t1), scheme, params, offsets, counter_rotating)
    h2 = segment_hamiltonian(seg, t2, trace.at(t2), scheme, params, offsets, counter_rotating)
    comm = h2 @ h1 - h1 @ h2
    eff = 0.5 * (h1 + h2) - (1j * math.sqrt(3) / 12) * h[:, None, None] * comm
    return step_unitaries(eff, h)


def _step_grid(start: float, duration: float, dt: float) -> tuple[np.ndarray, float]:
    n = max(1, int(math.ceil(duration / dt - 1e-9)))
    h = duration / n
    return start + h * (np.arange(n) + 0.5), h


def _check_trace(trace: NoiseTrace, schedule: Schedule):
    eps = 1e-9 * max(schedule.end, 1e-12)
    if trace.t0 > schedule.t0 + eps or trace.t0 + trace.duration < schedule.end - eps:
        raise ValueError(
            f"noise trace [{trace.t0:g}, {trace.t0 + trace.duration:g}] s does not cover "
            f"schedule [{schedule.t0:g}, {schedule.end:g}] s"
        )


def _segment_steps(seg, start, trace, scheme, params, offsets, dt, counter_rotating):
    step = dt if dt is not None else min(default_step(seg, scheme, params, offsets, counter_rotating), trace.dt)
    if not math.isfinite(step):
        step = seg.duration
    return _step_grid(start, seg.duration, step)


def propagator(
    schedule: Schedule,
    trace: NoiseTrace | None,
    scheme: LevelScheme,
    params: ZeemanParams,
    *,
    dt: float | None = None,
    counter_rotating: bool = False,
) -> np.ndarray:
    """Full unitary of ``schedule`` in its own frame."""
    if trace is None:
        trace = quiet_trace(schedule.end, max(schedule.end, 1e-12))
    _check_trace(trace, schedule)
    offsets = schedule.offsets(scheme, params)
    total = np.eye(scheme.dim, dtype=complex)
    start = schedule.t0
    for seg in schedule.segments:
        t, h = _segment_steps(seg, start, trace, scheme, params, offsets, dt, counter_rotating)
        for lo in range(0, len(t), CHUNK):
            tc = t[lo : lo + CHUNK]
            total = ordered_product(magnus_unitaries(seg, tc, h, trace, scheme, params, offsets, counter_rotating)) @ total
        start += seg.duration
    return total


def interval_propagators(
    seg: Segment,
    stops: np.ndarray,
    trace: NoiseTrace,
    scheme: LevelScheme,
    params: ZeemanParams,
    offsets: np.ndarray,
    max_dt: float,
) -> np.ndarray:
    """Propagators of ``seg``'s Hamiltonian over ``[stops[k], stops[k+1]]`` for every k.

    Each interval is split into equal steps no longer than ``max_dt``; all
    step exponentials are computed in one batch.
    """
    stops = np.asarray(stops, dtype=float)
    if np.any(np.diff(stops) <= 0):
        raise ValueError("interval boundaries must increase")
    mids, dts, bounds = [], [], [0]
    for a, b in zip(stops[:-1], stops[1:]):
        t, h = _step_grid(a, b - a, max_dt)
        mids.append(t)
        dts.append(np.full(len(t), h))
        bounds.append(bounds[-1] + len(t))
    t = np.concatenate(mids)
    dt = np.concatenate(dts)
    u = np.empty((len(t), scheme.dim, scheme.dim), dtype=complex)
    for lo in range(0, len(t), CHUNK):
        sl = slice(lo, lo + CHUNK)
        u[sl] = magnus_unitaries(seg, t[sl], dt[sl], trace, scheme, params, offsets)
    return np.stack([ordered_product(u[a:b]) for a, b in zip(bounds[:-1], bounds[1:])])


def evolve(
    state: np.ndarray,
    schedule: Schedule,
    trace: NoiseTrace | None,
    scheme: LevelScheme,
    params: ZeemanParams,
    *,
    dt: float | None = None,
    counter_rotating: bool = False,
) -> np.ndarray:
    """Propagate ``state`` through ``schedule`` (both expressed in the schedule frame).

    ``trace`` supplies the noise (``None`` for a noiseless run); it is
    linearly interpolated at the integration nodes.  The default step is
    1/(200 f_max) per segment, never coarser than the trace spacing.
    """
    state = np.asarray(state, dtype=complex)
    if state.shape[0] != scheme.dim:
        raise ValueError("state dimension does not match the level scheme")
    u = propagator(schedule, trace, scheme, params, dt=dt, counter_rotating=counter_rotating)
    return u @ state


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (n_times, dim)


def trajectory(
    state: np.ndarray,
    schedule: Schedule,
    trace: NoiseTrace | None,
    scheme: LevelScheme,
    params: ZeemanParams,
    *,
    dt: float | None = None,
    counter_rotating: bool = False,
    every: int = 1,
) -> Trajectory:
    """Like :func:`evolve` but records the state after every ``every`` steps."""
    if trace is None:
        trace = quiet_trace(schedule.end, max(schedule.end, 1e-12))
    _check_trace(trace, schedule)
    offsets = schedule.offsets(scheme, params)
    psi = np.asarray(state, dtype=complex).copy()
    times, states = [schedule.t0], [psi.copy()]
    start, k = schedule.t0, 0
    for seg in schedule.segments:
        t, h = _segment_steps(seg, start, trace, scheme, params, offsets, dt, counter_rotating)
        for lo in range(0, len(t), CHUNK):
            tc = t[lo : lo + CHUNK]
            u = magnus_unitaries(seg, tc, h, trace, scheme, params, offsets, counter_rotating)
            for j in range(len(tc)):
                psi = u[j] @ psi
                k += 1
                if k % every == 0:
                    times.append(tc[j] + h / 2)
                    states.append(psi.copy())
        start += seg.duration
    return Trajectory(np.array(times), np.array(states))


def dressed_populations(
    state: np.ndarray,
    config: DressingConfig,
    scheme: LevelScheme,
    params: ZeemanParams,
    frame: str = "dressing",
    t: float = 0.0,
) -> dict[str, float]:
    """Populations of the dressed states of ``config`` for a state given in ``frame`` at time ``t``."""
    psi = np.asarray(state, dtype=complex)
    if frame != "dressing":
        lab = change_frame(psi, schedule_offsets(frame, config.delta, scheme, params), t, inverse=True)
        psi = change_frame(lab, schedule_offsets("dressing", config.delta, scheme, params), t)
    basis = dressed_basis(config)
    vecs = basis.embed(scheme)
    return {lab: float(abs(np.vdot(vecs[:, k], psi)) ** 2) for k, lab in enumerate(basis.labels)}


@dataclass(frozen=True)
class EnsembleResult:
    populations: np.ndarray
    dressed: dict
    density_matrix: np.ndarray
    shots: int
    seed: int

    def population(self, scheme: LevelScheme, label: str) -> float:
        return float(self.populations[scheme.index(label)])


def shot_seeds(seed: int, shots: int) -> list[int]:
    """Independent per-shot seeds derived deterministically from ``seed``."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(shots, dtype=np.uint64)]


def trace_step(model: NoiseModel, duration: float) -> float:
    return min(model.max_step(), duration / 16)


def _run_shot(shot_seed, schedule, model, initial, scheme, params, dt, counter_rotating):
    trace = sample_trace(model, schedule.end, trace_step(model, schedule.end), shot_seed)
    return evolve(initial, schedule, trace, scheme, params, dt=dt, counter_rotating=counter_rotating)


def map_shots(func, items: Sequence, workers: int = 1) -> list:
    """Ordered map, optionally over a process pool."""
    if workers <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items, chunksize=max(1, len(items) // (4 * workers))))


def monte_carlo(
    schedule: Schedule,
    model: NoiseModel,
    shots: int,
    seed: int,
    initial_state: np.ndarray,
    scheme: LevelScheme,
    params: ZeemanParams,
    *,
    dt: float | None = None,
    workers: int = 1,
    counter_rotating: bool = False,
) -> EnsembleResult:
    """Average :func:`evolve` over ``shots`` independent noise realisations.

    Shot ``k`` uses the ``k``-th seed of :func:`shot_seeds`; results are
    summed in shot order, so the output is independent of ``workers``.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    run = partial(
        _run_shot,
        schedule=schedule,
        model=model,
        initial=np.asarray(initial_state, dtype=complex),
        scheme=scheme,
        params=params,
        dt=dt,
        counter_rotating=counter_rotating,
    )
    finals = map_shots(run, shot_seeds(seed, shots), workers)
    rho = np.zeros((scheme.dim, scheme.dim), dtype=complex)
    for psi in finals:
        rho += np.outer(psi, np.conj(psi))
    rho /= shots
    dressed = {}
    if schedule.dressing is not None:
        basis = dressed_basis(schedule.dressing)
        if schedule.frame != "dressing":
            # rotate the averaged state into the dressing frame at the final time
            lab = change_frame(rho, schedule.offsets(scheme, params), schedule.end, kind="operator", inverse=True)
            rho_d = change_frame(
                lab, schedule_offsets("dressing", schedule.frame_delta, scheme, params), schedule.end, kind="operator"
            )
        else:
            rho_d = rho
        vecs = basis.embed(scheme)
        dressed = {
            lab: float(np.real(np.conj(vecs[:, k]) @ rho_d @ vecs[:, k])) for k, lab in enumerate(basis.labels)
        }
    return EnsembleResult(np.real(np.diag(rho)).copy(), dressed, rho, shots, seed)
