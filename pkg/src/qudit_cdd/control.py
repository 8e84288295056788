"""Single-qudit pulse compilation for dressed qudits, MS tone tables, crosstalk audits.

A rotation between |g> and a dressed state |v> = sum_m v_m |m> is realised
by one optical tone per non-zero component.  Tone ``m`` gets Rabi frequency
``rabi * |v_m|`` and phase ``axis_phase - arg(v_m)``; every tone is tuned
so that, in the dressing frame, it oscillates at the dressed eigenvalue of
the target.  That resonance rule fixes all detuning signs, including the
light shift of |m0> under monochromatic dressing.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from .dressing import DressingConfig, V_LEVELS, dressed_basis, frame_offsets
from .dynamics import Schedule, Segment, trajectory
from .physics import DriveField, LevelScheme, Tone, ZeemanParams, d_label, level_energies

TARGETS = ("g_plus", "g_minus", "g_tilde_plus", "g_tilde_minus", "g_tilde_zero", "g_bare")
_DRESSED_LABEL = {
    "g_plus": "plus",
    "g_minus": "minus",
    "g_tilde_plus": "tilde_plus",
    "g_tilde_minus": "tilde_minus",
    "g_tilde_zero": "tilde_zero",
}
COMPONENT_TOL = 1e-9


@dataclass(frozen=True)
class GateRequest:
    target: str
    angle: float = np.pi
    axis_phase: float = 0.0
    level: int | None = None  # m for g_bare

    def __post_init__(self):
        if self.target not in TARGETS:
            raise ValueError(f"unknown target {self.target!r}; choose from {TARGETS}")
        if not 0 < self.angle <= 2 * np.pi:
            raise ValueError("rotation angle must lie in (0, 2 pi]")
        if self.target == "g_bare" and self.level not in (-2, -1, 0, 1, 2):
            raise ValueError("g_bare needs level m in -2..2")


@dataclass(frozen=True)
class CompiledPulse:
    field: DriveField
    duration: float
    effective_rabi: float
    target: str  # dressed or bare label of the addressed state
    angle: float
    config: DressingConfig | None = None

    def segment(self) -> Segment:
        return Segment(self.duration, optical=self.field, dressing=self.config, frame="dressing")


def addressable_states(config: DressingConfig | None, scheme: LevelScheme, params: ZeemanParams) -> dict:
    """Label -> (embedded vector, dressing-frame energy) of every stationary excited state."""
    offsets = frame_offsets(scheme, params, 0.0 if config is None else config.delta)
    diag = level_energies(scheme, params) - offsets
    states = {}
    if config is not None:
        basis = dressed_basis(config)
        vecs = basis.embed(scheme)
        for k, lab in enumerate(basis.labels):
            states[lab] = (vecs[:, k], float(basis.energies[k]))
    for lv in scheme.levels:
        if lv.label == "g" or (config is not None and lv.label in V_LEVELS):
            continue
        states[lv.label] = (scheme.basis_state(lv.label), float(diag[lv.index]))
    return states


def resolve_target(req: GateRequest, config: DressingConfig | None, scheme: LevelScheme) -> str:
    kind = None if config is None else config.kind
    if req.target in ("g_plus", "g_minus") and kind != "monochromatic":
        raise ValueError(f"{req.target} requires monochromatic dressing")
    if req.target.startswith("g_tilde") and kind != "bichromatic":
        raise ValueError(f"{req.target} requires bichromatic dressing")
    if req.target != "g_bare":
        return _DRESSED_LABEL[req.target]
    m = req.level
    if not scheme.has_m(m):
        raise ValueError(f"level m={m} not in the level scheme")
    if config is None or abs(m) == 2:
        return d_label(m)
    if m == 0 and kind == "monochromatic":
        return "zero"  # light-shifted |m0>
    raise ValueError(f"bare |m={m}> is not a stationary state under {kind} dressing")


def compile_single_qudit(
    req: GateRequest,
    config: DressingConfig | None,
    omega_s: float,
    scheme: LevelScheme,
    params: ZeemanParams,
) -> CompiledPulse:
    """Tone set driving |g> <-> target at Rabi frequency ``omega_s`` about axis ``req.axis_phase``.

    Examples of the resulting structure: |~0> needs two equal tones on
    |m-1>, |m+1> with a relative phase of pi; |~+> and |~-> need three tones
    with amplitudes 1/2 : 1/sqrt(2) : 1/2 on |m-1>, |m0>, |m+1>.
    """
    if not omega_s > 0:
        raise ValueError("omega_s must be positive")
    label = resolve_target(req, config, scheme)
    vec, energy = addressable_states(config, scheme, params)[label]
    offsets = frame_offsets(scheme, params, 0.0 if config is None else config.delta)
    diag = level_energies(scheme, params) - offsets
    tones = []
    for i, amp in enumerate(vec):
        if abs(amp) <= COMPONENT_TOL:
            continue
        lab = scheme.levels[i].label
        tones.append(
            Tone(("g", lab), energy - diag[i], omega_s * abs(amp), req.axis_phase - float(np.angle(amp)))
        )
    field = DriveField(tuple(tones), "optical_addressing")
    return CompiledPulse(field, req.angle / omega_s, omega_s, label, req.angle, config)


def compile_ms_tones(
    config: DressingConfig | None,
    secular_frequency: float,
    gate_detuning: float,
    params: ZeemanParams,
    *,
    rabi: float = 1.0,
    phase: float = 0.0,
    scheme: LevelScheme | None = None,
) -> DriveField:
    """Sideband tone table for a Molmer-Sorensen gate on |g> <-> |~0> (or |m0>).

    Under bichromatic dressing |~0> replaces |m0>, so each of its two bare
    components receives a red and a blue sideband tone at
    ``carrier -+ (secular_frequency + gate_detuning)``.  Without dressing, or
    with monochromatic dressing, the usual two-tone field on |g> -> |m0>
    is returned (carrier corrected for the light shift).
    """
    if gate_detuning == 0:
        raise ValueError("gate_detuning = 0 gives no closed phase-space loop")
    scheme = scheme or LevelScheme.full()
    sideband = secular_frequency + gate_detuning
    if config is not None and config.kind == "bichromatic":
        label, note = "tilde_zero", "bichromatic dressing: four tones on |g>->|m-1>, |g>->|m+1> sidebands"
    elif config is not None:
        label, note = "zero", "monochromatic dressing leaves |g>,|m0> decoupled: standard two-tone MS field"
    else:
        label, note = "m0", "undressed: standard two-tone MS field"
    vec, energy = addressable_states(config, scheme, params)[label]
    if label == "zero":
        # the field stays on |g> -> |m0>; only its carrier follows the light shift
        vec = scheme.basis_state("m0")
    offsets = frame_offsets(scheme, params, 0.0 if config is None else config.delta)
    diag = level_energies(scheme, params) - offsets
    tones = []
    for i, amp in enumerate(vec):
        if abs(amp) <= COMPONENT_TOL:
            continue
        carrier = energy - diag[i]
        for sign in (-1, 1):
            tones.append(
                Tone(
                    ("g", scheme.levels[i].label),
                    carrier + sign * sideband,
                    rabi * abs(amp),
                    phase - float(np.angle(amp)),
                )
            )
    return DriveField(tuple(tones), "optical_addressing", note)


@dataclass(frozen=True)
class AuditReport:
    target: str
    target_population: float
    peak: dict  # non-target label -> peak population during the pulse

    @property
    def worst(self) -> float:
        return max(self.peak.values(), default=0.0)


def crosstalk_audit(
    pulse: CompiledPulse,
    config: DressingConfig | None,
    scheme: LevelScheme,
    params: ZeemanParams,
    *,
    record_every: int = 1,
) -> AuditReport:
    """Noiseless simulation of ``pulse`` from |g>; peak population of every other state."""
    states = addressable_states(config, scheme, params)
    if pulse.effective_rabi == 0 or all(t.rabi == 0 for t in pulse.field.tones):
        return AuditReport(pulse.target, 0.0, {k: 0.0 for k in states if k != pulse.target})
    sched = Schedule((Segment(pulse.duration, optical=pulse.field, dressing=config, frame="dressing"),))
    traj = trajectory(scheme.basis_state("g"), sched, None, scheme, params, every=record_every)
    pops = {k: np.abs(traj.states @ np.conj(v)) ** 2 for k, (v, _) in states.items()}
    peak = {k: float(p.max()) for k, p in pops.items() if k != pulse.target}
    return AuditReport(pulse.target, float(pops[pulse.target][-1]), peak)


def calibrate_pulse(
    pulse: CompiledPulse,
    config: DressingConfig | None,
    scheme: LevelScheme,
    params: ZeemanParams,
    *,
    maxiter: int = 300,
) -> tuple[CompiledPulse, AuditReport]:
    """Derivative-free touch-up of tone amplitudes and phases.

    Minimises the summed non-target peak population plus the target
    shortfall ``1 - sin^2(angle/2)`` deviation, mirroring the spectroscopic
    optimisation done on hardware.
    """
    base = pulse.field.tones
    goal = np.sin(pulse.angle / 2) ** 2

    def build(x):
        n = len(base)
        scales, dphi = np.exp(x[:n]), x[n:]
        tones = tuple(replace(t, rabi=t.rabi * s, phase=t.phase + p) for t, s, p in zip(base, scales, dphi))
        return replace(pulse, field=DriveField(tones, pulse.field.kind))

    def cost(x):
        rep = crosstalk_audit(build(x), config, scheme, params)
        return sum(rep.peak.values()) + abs(rep.target_population - goal)

    res = minimize(cost, np.zeros(2 * len(base)), method="Nelder-Mead", options={"maxiter": maxiter, "xatol": 1e-4, "fatol": 1e-7})
    best = build(res.x)
    return best, crosstalk_audit(best, config, scheme, params)


def tone_table(pulse: CompiledPulse) -> list[dict]:
    """Rows for the tone-table CSV (frequencies in Hz)."""
    top = max(t.rabi for t in pulse.field.tones) or 1.0
    return [
        {
            "coupling": f"{t.coupling[0]}->{t.coupling[1]}",
            "frequency_offset_hz": t.detuning / (2 * np.pi),
            "relative_amplitude": t.rabi / top,
            "rabi_hz": t.rabi / (2 * np.pi),
            "phase_rad": t.phase,
            "duration_s": pulse.duration,
        }
        for t in pulse.field.tones
    ]
