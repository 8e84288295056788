"""TOML run configuration.

Every dimensional key carries its unit in the name (``_hz``, ``_gauss``,
``_s``, ``_rad``).  Frequencies are given in Hz and converted to angular
frequency on load.  Unknown sections or keys are rejected.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .dressing import Bichromatic, DressingConfig, Monochromatic, natural_detuning
from .experiments import RamseyConfig, calibrated_noise
from .noise import FieldTone, NoiseModel, OUProcess
from .physics import LevelScheme, ZeemanParams

TWO_PI = 2 * math.pi


class ConfigError(ValueError):
    pass


SCHEMA = {
    "": {"seed", "out_dir", "zeeman", "dressing", "noise", "compile", "spectroscopy", "ramsey", "noise_preview"},
    "zeeman": {"bias_field_gauss", "splitting_hz", "quadratic_hz", "scheme"},
    "dressing": {"kind", "rabi_hz", "rabi2_hz", "phase_rad", "phase2_rad", "detuning_hz", "raman_rabi_hz"},
    "noise": {
        "preset",
        "dc_offset_gauss",
        "broadband_sigma_gauss",
        "broadband_tau_s",
        "drive_amp_rel_sigma",
        "laser_sigma_hz",
        "laser_tau_s",
        "tones",
    },
    "noise.tones": {"frequency_hz", "amplitude_gauss", "phase_rad", "random_phase"},
    "compile": {"target", "level", "angle_rad", "axis_phase_rad", "omega_s_hz", "calibrate"},
    "spectroscopy": {"start_hz", "stop_hz", "step_hz", "probe_levels", "probe_rabi_hz", "duration_s", "shots"},
    "ramsey": {"target", "level", "delays_s", "omega_s_hz", "shots", "scan_points", "contrast_method"},
    "noise_preview": {"duration_s", "dt_s"},
}


def _check_keys(section: str, table: dict):
    if not isinstance(table, dict):
        raise ConfigError(f"[{section}] must be a table")
    unknown = set(table) - SCHEMA[section]
    if unknown:
        where = f"[{section}]" if section else "top level"
        raise ConfigError(f"unknown key(s) {sorted(unknown)} at {where}")


@dataclass
class RunConfig:
    raw: dict = field(default_factory=dict)
    seed: int = 0
    out_dir: str = "."

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        _check_keys("", raw)
        for sec in SCHEMA:
            if sec and "." not in sec and sec in raw:
                _check_keys(sec, raw[sec])
        for tone in raw.get("noise", {}).get("tones", []):
            _check_keys("noise.tones", tone)
        cfg = cls(raw, int(raw.get("seed", 0)), str(raw.get("out_dir", ".")))
        # build everything once so that errors surface at load time
        cfg.params
        cfg.scheme
        cfg.dressing
        cfg.noise
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        return cls.from_dict(raw)

    def section(self, name: str) -> dict:
        return dict(self.raw.get(name, {}))

    def digest(self, **overrides) -> str:
        """Hash of the configuration plus command-line overrides."""
        blob = json.dumps({"config": self.raw, "overrides": overrides}, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @property
    def params(self) -> ZeemanParams:
        z = self.section("zeeman")
        b = float(z.get("bias_field_gauss", 7.7))
        try:
            return ZeemanParams(
                bias_field=b,
                linear_sensitivity=TWO_PI * float(z.get("splitting_hz", 6465e3)) / b,
                quadratic_coefficient=TWO_PI * float(z.get("quadratic_hz", 11e3)),
            )
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"[zeeman]: {exc}") from exc

    @property
    def scheme(self) -> LevelScheme:
        name = self.section("zeeman").get("scheme", "full")
        if name == "full":
            return LevelScheme.full()
        if name == "ququart":
            return LevelScheme.ququart()
        raise ConfigError(f"[zeeman] scheme must be 'full' or 'ququart', got {name!r}")

    @property
    def dressing(self) -> DressingConfig | None:
        d = self.section("dressing")
        kind = d.get("kind", "none")
        try:
            if kind == "none":
                return None
            if kind == "bichromatic":
                w1 = TWO_PI * float(d.get("rabi_hz", 0.0))
                w2 = TWO_PI * float(d["rabi2_hz"]) if "rabi2_hz" in d else None
                return Bichromatic(w1, w2, float(d.get("phase_rad", 0.0)), float(d.get("phase2_rad", 0.0)))
            if kind == "monochromatic":
                params = self.params
                delta = TWO_PI * float(d["detuning_hz"]) if "detuning_hz" in d else natural_detuning(params)
                phase = float(d.get("phase_rad", 0.0))
                if "raman_rabi_hz" in d:
                    omega = math.sqrt(2 * abs(delta) * TWO_PI * float(d["raman_rabi_hz"]))
                else:
                    omega = TWO_PI * float(d.get("rabi_hz", 0.0))
                return Monochromatic(omega, delta, phase)
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(f"[dressing]: {exc}") from exc
        raise ConfigError(f"[dressing] kind must be none, monochromatic or bichromatic, got {kind!r}")

    @property
    def noise(self) -> NoiseModel:
        n = self.section("noise")
        preset = n.get("preset", "quiet")
        try:
            if preset == "calibrated":
                base = calibrated_noise(float(n.get("drive_amp_rel_sigma", 1e-3)))
                extra = {k for k in n if k not in ("preset", "drive_amp_rel_sigma", "tones")}
                if extra:
                    raise ConfigError(f"[noise] preset 'calibrated' fixes {sorted(extra)}")
            elif preset == "quiet":
                bb = None
                if "broadband_sigma_gauss" in n:
                    bb = OUProcess(float(n["broadband_sigma_gauss"]), float(n.get("broadband_tau_s", 2e-3)))
                laser = None
                if "laser_sigma_hz" in n:
                    laser = OUProcess(TWO_PI * float(n["laser_sigma_hz"]), float(n.get("laser_tau_s", 0.5e-3)))
                base = NoiseModel(
                    dc_offset_sigma=float(n.get("dc_offset_gauss", 0.0)),
                    broadband=bb,
                    drive_amp_rel_sigma=float(n.get("drive_amp_rel_sigma", 0.0)),
                    laser_freq=laser,
                )
            else:
                raise ConfigError(f"[noise] preset must be 'quiet' or 'calibrated', got {preset!r}")
            tones = [
                FieldTone(
                    float(t["frequency_hz"]),
                    float(t["amplitude_gauss"]),
                    float(t.get("phase_rad", 0.0)),
                    bool(t.get("random_phase", False)),
                )
                for t in n.get("tones", [])
            ]
        except (ValueError, TypeError, KeyError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"[noise]: {exc}") from exc
        return base.with_tones(*tones)

    def ramsey(self, shots: int | None = None) -> RamseyConfig:
        r = self.section("ramsey")
        try:
            delays = np.asarray(r.get("delays_s", []), dtype=float)
            if delays.size == 0:
                raise ConfigError("[ramsey] delays_s is empty")
            return RamseyConfig(
                target=r.get("target", "g_tilde_zero"),
                delays=delays,
                omega_s=TWO_PI * float(r.get("omega_s_hz", 41.7e3)),
                shots=int(shots if shots is not None else r.get("shots", 200)),
                level=r.get("level"),
                scan_points=int(r.get("scan_points", 12)),
                contrast_method=r.get("contrast_method", "fit"),
            )
        except (ValueError, TypeError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"[ramsey]: {exc}") from exc
