from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qudit_cdd.control import (
    GateRequest,
    addressable_states,
    calibrate_pulse,
    compile_ms_tones,
    compile_single_qudit,
    crosstalk_audit,
    tone_table,
)
from qudit_cdd.dressing import Bichromatic, Monochromatic, dressed_basis
from qudit_cdd.dynamics import Schedule, propagator
from qudit_cdd.physics import DriveField, LevelScheme, ZeemanParams

TWO_PI = 2 * np.pi

TARGETS = [
    ("bi", "g_tilde_plus", None),
    ("bi", "g_tilde_minus", None),
    ("bi", "g_tilde_zero", None),
    ("mono", "g_plus", None),
    ("mono", "g_minus", None),
    ("mono", "g_bare", 0),
    ("mono", "g_bare", 2),
    ("none", "g_bare", 1),
]


def _config(kind, bichromatic, monochromatic):
    return {"bi": bichromatic, "mono": monochromatic, "none": None}[kind]


def _gap(cfg):
    return TWO_PI * 1e3 if cfg is None else dressed_basis(cfg).gap()


def test_g_plus_durations(params, scheme, monochromatic):
    w = TWO_PI * 41.7e3
    pi = compile_single_qudit(GateRequest("g_plus", np.pi), monochromatic, w, scheme, params)
    half = compile_single_qudit(GateRequest("g_plus", np.pi / 2), monochromatic, w, scheme, params)
    assert pi.duration == pytest.approx(11.99e-6, rel=1e-3)
    assert half.duration == pytest.approx(6.0e-6, rel=1e-3)
    assert pi.duration * pi.effective_rabi == pytest.approx(np.pi)


def test_g_tilde_zero_tones(params, scheme, bichromatic):
    p = compile_single_qudit(GateRequest("g_tilde_zero"), bichromatic, TWO_PI * 400, scheme, params)
    tones = {t.coupling[1]: t for t in p.field.tones}
    assert set(tones) == {"m-1", "m+1"}
    assert tones["m-1"].phase == pytest.approx(np.pi) and tones["m+1"].phase == pytest.approx(0.0)
    assert tones["m-1"].rabi == pytest.approx(tones["m+1"].rabi)
    assert tones["m-1"].rabi == pytest.approx(TWO_PI * 400 / np.sqrt(2))
    assert abs(tones["m-1"].detuning) < 1e-9


@pytest.mark.parametrize("target,sign", [("g_tilde_plus", 1), ("g_tilde_minus", -1)])
def test_g_tilde_pm_tones(params, scheme, bichromatic, target, sign):
    ws = TWO_PI * 300
    p = compile_single_qudit(GateRequest(target), bichromatic, ws, scheme, params)
    tones = {t.coupling[1]: t for t in p.field.tones}
    assert [tones[k].rabi / ws for k in ("m-1", "m0", "m+1")] == pytest.approx([0.5, 1 / np.sqrt(2), 0.5])
    for t in tones.values():
        assert t.detuning == pytest.approx(sign * bichromatic.omega / np.sqrt(2))
    assert tones["m0"].phase == pytest.approx(0.0 if sign > 0 else np.pi)


def test_g_minus_is_dark_state_pair(params, scheme, monochromatic):
    ws = TWO_PI * 200
    p = compile_single_qudit(GateRequest("g_minus"), monochromatic, ws, scheme, params)
    tones = {t.coupling[1]: t for t in p.field.tones}
    assert set(tones) == {"m-1", "m+1"}
    assert tones["m-1"].rabi == pytest.approx(ws / np.sqrt(2))
    assert (tones["m-1"].phase - tones["m+1"].phase) % TWO_PI == pytest.approx(np.pi)
    # resonant with the dark state, which sits at the bare transition frequency
    assert abs(tones["m-1"].detuning) < 1e-6 and abs(tones["m+1"].detuning) < 1e-6


def test_g_plus_detuned_by_light_shift(params, scheme, monochromatic):
    p = compile_single_qudit(GateRequest("g_plus"), monochromatic, TWO_PI * 200, scheme, params)
    b = dressed_basis(monochromatic)
    for t in p.field.tones:
        if t.coupling[1] != "m0":
            assert t.detuning == pytest.approx(b.energy("plus") + monochromatic.delta)
    # bare |m0> under monochromatic dressing is addressed at its light-shifted line
    z = compile_single_qudit(GateRequest("g_bare", level=0), monochromatic, TWO_PI * 200, scheme, params)
    m0 = [t for t in z.field.tones if t.coupling[1] == "m0"][0]
    assert m0.detuning == pytest.approx(b.energy("zero"))
    with pytest.warns(UserWarning):
        ref_cfg = Monochromatic(TWO_PI * 4.062e3, TWO_PI * 5.5e3)
    z = compile_single_qudit(GateRequest("g_bare", level=0), ref_cfg, TWO_PI * 200, scheme, params)
    m0 = [t for t in z.field.tones if t.coupling[1] == "m0"][0]
    assert m0.detuning == pytest.approx(TWO_PI * 1226.483622498652, rel=1e-9)


@pytest.mark.parametrize(
    "kind,target,level",
    [("mono", "g_tilde_zero", None), ("bi", "g_plus", None), ("bi", "g_bare", 0), ("none", "g_minus", None), ("bi", "g_bare", 1)],
)
def test_incompatible_targets(params, scheme, bichromatic, monochromatic, kind, target, level):
    with pytest.raises(ValueError):
        compile_single_qudit(GateRequest(target, level=level), _config(kind, bichromatic, monochromatic), 1.0, scheme, params)


def test_gate_request_validation():
    with pytest.raises(ValueError):
        GateRequest("g_plus", 0.0)
    with pytest.raises(ValueError):
        GateRequest("g_plus", 7.0)
    with pytest.raises(ValueError):
        GateRequest("g_bare")
    with pytest.raises(ValueError):
        GateRequest("nonsense")


@pytest.mark.parametrize("kind,target,level", TARGETS)
def test_compiled_pulse_fidelity(params, scheme, bichromatic, monochromatic, kind, target, level):
    cfg = _config(kind, bichromatic, monochromatic)
    p = compile_single_qudit(GateRequest(target, level=level), cfg, _gap(cfg) / 5, scheme, params)
    assert 1 <= len(p.field.tones) <= 3
    rep = crosstalk_audit(p, cfg, scheme, params)
    assert rep.target_population > 0.999
    assert rep.worst < 1e-2


@settings(max_examples=12, deadline=None)
@given(st.floats(0.1, 2 * np.pi), st.sampled_from(["g_tilde_plus", "g_tilde_zero", "g_tilde_minus"]))
def test_rotation_angle(angle, target):
    p, s, cfg = ZeemanParams.reference(), LevelScheme.full(), Bichromatic(TWO_PI * 3.3e3)
    pulse = compile_single_qudit(GateRequest(target, angle), cfg, dressed_basis(cfg).gap() / 5, s, p)
    rep = crosstalk_audit(pulse, cfg, s, p)
    assert rep.target_population == pytest.approx(np.sin(angle / 2) ** 2, abs=1e-3)


def _axis_phase(pulse, cfg, scheme, params):
    """Process reconstruction on {|g>, target}: phase p of <target|U|g> = -i exp(-ip) sin(theta/2)."""
    u = propagator(Schedule((pulse.segment(),)), None, scheme, params)
    vec, energy = addressable_states(cfg, scheme, params)[pulse.target]
    amp = np.exp(1j * energy * pulse.duration) * np.vdot(vec, u[:, scheme.index("g")])
    return -np.angle(1j * amp)


@settings(max_examples=10, deadline=None)
@given(st.floats(0, 2 * np.pi), st.floats(-np.pi, np.pi), st.sampled_from(["g_tilde_plus", "g_tilde_zero"]))
def test_phase_covariance(phi, shift, target):
    p, s, cfg = ZeemanParams.reference(), LevelScheme.full(), Bichromatic(TWO_PI * 3.3e3)
    w = dressed_basis(cfg).gap() / 5
    a = compile_single_qudit(GateRequest(target, np.pi / 2, phi), cfg, w, s, p)
    b = compile_single_qudit(GateRequest(target, np.pi / 2, phi + shift), cfg, w, s, p)
    d = (_axis_phase(b, cfg, s, p) - _axis_phase(a, cfg, s, p) - shift) % TWO_PI
    assert min(d, TWO_PI - d) < 1e-6


def test_g_tilde_plus_has_no_first_order_coupling_to_other_states(params, scheme, bichromatic):
    from qudit_cdd.dynamics import schedule_offsets
    from qudit_cdd.physics import drive_hamiltonian

    gap = dressed_basis(bichromatic).gap()
    states = addressable_states(bichromatic, scheme, params)
    offsets = schedule_offsets("dressing", 0.0, scheme, params)
    worst = []
    for frac in (0.4, 0.2):
        p = compile_single_qudit(GateRequest("g_tilde_plus"), bichromatic, frac * gap, scheme, params)
        v = drive_hamiltonian(p.field, 1.3e-4, scheme, params, offsets=offsets)
        g = scheme.basis_state("g")
        for lab in ("tilde_minus", "tilde_zero"):
            assert abs(np.vdot(states[lab][0], v @ g)) < 1e-12 * p.effective_rabi
        worst.append(crosstalk_audit(p, bichromatic, scheme, params).worst)
    assert max(worst) < 1e-12


def test_mis_phased_g_plus_excites_minus(params, scheme, monochromatic):
    gap = dressed_basis(monochromatic).gap()
    p = compile_single_qudit(GateRequest("g_plus"), monochromatic, 10 * gap, scheme, params)
    tones = [replace(t, phase=t.phase + np.pi / 2) if t.coupling[1] == "m-1" else t for t in p.field.tones]
    bad = replace(p, field=DriveField(tuple(tones), "optical_addressing"))
    rep = crosstalk_audit(bad, monochromatic, scheme, params)
    assert 0.3 < rep.peak["minus"] < 0.6
    assert rep.peak["minus"] > 0.5 * rep.target_population


def test_zero_amplitude_audit(params, scheme, bichromatic):
    p = compile_single_qudit(GateRequest("g_tilde_zero"), bichromatic, TWO_PI * 100, scheme, params)
    zero = replace(p, field=p.field.scaled(0.0))
    rep = crosstalk_audit(zero, bichromatic, scheme, params)
    assert rep.target_population == 0 and all(v == 0 for v in rep.peak.values())


def test_calibration_does_not_degrade(params, scheme, bichromatic):
    gap = dressed_basis(bichromatic).gap()
    p = compile_single_qudit(GateRequest("g_tilde_zero"), bichromatic, gap / 5, scheme, params)
    mis = replace(p, field=DriveField(tuple(replace(t, rabi=t.rabi * (1.05 if i else 1.0)) for i, t in enumerate(p.field.tones)), "optical_addressing"))
    before = crosstalk_audit(mis, bichromatic, scheme, params)
    fixed, after = calibrate_pulse(mis, bichromatic, scheme, params, maxiter=120)
    cost = lambda r: sum(r.peak.values()) + abs(r.target_population - 1)
    assert cost(after) <= cost(before)
    assert after.target_population > 0.999


def test_ms_tones(params, bichromatic, monochromatic):
    ws, d = TWO_PI * 160e3, TWO_PI * 5e3
    f = compile_ms_tones(bichromatic, ws, d, params)
    assert len(f.tones) == 4
    assert sorted(t.coupling[1] for t in f.tones) == ["m+1", "m+1", "m-1", "m-1"]
    assert sorted(round(t.detuning / TWO_PI, 6) for t in f.tones) == pytest.approx([-165e3, -165e3, 165e3, 165e3])
    m = compile_ms_tones(monochromatic, ws, d, params)
    assert len(m.tones) == 2 and {t.coupling[1] for t in m.tones} == {"m0"}
    assert "standard" in m.note
    e0 = dressed_basis(monochromatic).energy("zero")
    assert sorted(t.detuning for t in m.tones) == pytest.approx([e0 - ws - d, e0 + ws + d])
    with pytest.raises(ValueError):
        compile_ms_tones(bichromatic, ws, 0.0, params)


def test_tone_table_rows(params, scheme, bichromatic):
    p = compile_single_qudit(GateRequest("g_tilde_plus"), bichromatic, TWO_PI * 300, scheme, params)
    rows = tone_table(p)
    assert len(rows) == 3
    assert max(r["relative_amplitude"] for r in rows) == 1.0
    assert {r["coupling"] for r in rows} == {"g->m-1", "g->m0", "g->m+1"}
    assert all(r["duration_s"] == pytest.approx(p.duration) for r in rows)
    assert rows[0]["frequency_offset_hz"] == pytest.approx(2333.452377915607)
