"""Level structure, Zeeman parameters and the bare / noise / drive Hamiltonians.

Every operator is returned as a complex ``numpy`` array in angular-frequency
units (rad/s, i.e. already divided by hbar).  The basis ordering is that of
the :class:`LevelScheme` in use; the default six-level scheme is

    |g>, |m-2>, |m-1>, |m0>, |m+1>, |m+2>

where |g> is the S1/2 (F=0) ground state and |mX> are the D3/2 (F=2)
Zeeman sublevels.  Optical frequencies are measured in a frame co-rotating
with the laser carrier resonant with the bare |g> -> |m0> line, so the
ground state sits at zero energy together with |m0>.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

TWO_PI = 2.0 * np.pi

# Bohr magneton over Planck's constant, Hz per gauss.
MU_B_OVER_H = 1.39962449361e6

DEFAULT_BIAS_FIELD = 7.7  # G
DEFAULT_SPLITTING = TWO_PI * 6465e3  # rad/s, |m0> -> |m+1> at the bias field
DEFAULT_QUADRATIC = TWO_PI * 11e3  # rad/s per unit m

HERMITIAN_RTOL = 1e-12


@dataclass(frozen=True)
class Level:
    index: int
    label: str
    m_F: int
    manifold: str  # "S_ground" or "D_excited"


@dataclass(frozen=True)
class LevelScheme:
    """Ordered set of levels spanning the simulated Hilbert space."""

    levels: tuple[Level, ...]

    def __post_init__(self):
        labels = [lv.label for lv in self.levels]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate level labels: {labels}")
        for i, lv in enumerate(self.levels):
            if lv.index != i:
                raise ValueError("level indices must be 0..n-1 in order")
            if lv.label == "g":
                if lv.m_F != 0 or lv.manifold != "S_ground":
                    raise ValueError("|g> must have m_F=0 in the ground manifold")
            elif lv.label != _d_label(lv.m_F) or lv.manifold != "D_excited":
                raise ValueError(f"level {lv.label!r} inconsistent with m_F={lv.m_F}")

    @classmethod
    def full(cls) -> "LevelScheme":
        """|g> plus all five D3/2 F=2 sublevels (tracks leakage into m=+-2)."""
        return cls.from_m_values((-2, -1, 0, 1, 2))

    @classmethod
    def ququart(cls) -> "LevelScheme":
        return cls.from_m_values((-1, 0, 1))

    @classmethod
    def from_m_values(cls, ms: Sequence[int]) -> "LevelScheme":
        ms = sorted(int(m) for m in ms)
        levels = [Level(0, "g", 0, "S_ground")]
        for m in ms:
            if not -2 <= m <= 2:
                raise ValueError(f"m_F={m} outside the F=2 manifold")
            levels.append(Level(len(levels), _d_label(m), m, "D_excited"))
        return cls(tuple(levels))

    @property
    def dim(self) -> int:
        return len(self.levels)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lv.label for lv in self.levels)

    @property
    def m_values(self) -> np.ndarray:
        """m_F per basis state (0 for |g>)."""
        return np.array([lv.m_F for lv in self.levels], dtype=float)

    @property
    def excited_mask(self) -> np.ndarray:
        return np.array([lv.manifold == "D_excited" for lv in self.levels])

    def index(self, label: str) -> int:
        for lv in self.levels:
            if lv.label == label:
                return lv.index
        raise KeyError(f"level {label!r} not in scheme {self.labels}")

    def index_of_m(self, m: int) -> int:
        return self.index(_d_label(m))

    def has_m(self, m: int) -> bool:
        return _d_label(m) in self.labels

    def level(self, label: str) -> Level:
        return self.levels[self.index(label)]

    def basis_state(self, label: str) -> np.ndarray:
        psi = np.zeros(self.dim, dtype=complex)
        psi[self.index(label)] = 1.0
        return psi


def _d_label(m: int) -> str:
    return "m0" if m == 0 else f"m{m:+d}"


def d_label(m: int) -> str:
    """Label of the D3/2 sublevel with magnetic number ``m`` (``m0``, ``m+1``...)."""
    return _d_label(m)


@dataclass(frozen=True)
class ZeemanParams:
    """Magnetic-field dependence of the D3/2 F=2 sublevels.

    The splitting between |m> and |m+1> is the affine law
    ``linear_sensitivity * bias_field - quadratic_coefficient * m``.
    """

    bias_field: float = DEFAULT_BIAS_FIELD
    linear_sensitivity: float = DEFAULT_SPLITTING / DEFAULT_BIAS_FIELD
    quadratic_coefficient: float = DEFAULT_QUADRATIC

    def __post_init__(self):
        if not self.linear_sensitivity > 0:
            raise ValueError("linear_sensitivity must be positive")

    @classmethod
    def reference(cls) -> "ZeemanParams":
        return cls()

    @property
    def g_F(self) -> float:
        """Lande factor implied by the calibrated sensitivity."""
        return self.linear_sensitivity / (TWO_PI * MU_B_OVER_H)

    @property
    def larmor(self) -> float:
        return self.linear_sensitivity * self.bias_field


def zeeman_transition_frequency(m: int, params: ZeemanParams) -> float:
    """Angular frequency of the |m> -> |m+1> transition, ``m`` in {-2,-1,0,1}."""
    if int(m) != m or not -2 <= m <= 1:
        raise ValueError(f"m must be one of -2, -1, 0, 1 (got {m})")
    return params.linear_sensitivity * params.bias_field - params.quadratic_coefficient * m


def sublevel_energy(m: int, params: ZeemanParams) -> float:
    """Energy of |m> relative to |m0>, summed from the adjacent splittings."""
    if m >= 0:
        return float(sum(zeeman_transition_frequency(j, params) for j in range(0, m)))
    return -float(sum(zeeman_transition_frequency(j, params) for j in range(m, 0)))


def level_energies(scheme: LevelScheme, params: ZeemanParams) -> np.ndarray:
    return np.array(
        [0.0 if lv.label == "g" else sublevel_energy(lv.m_F, params) for lv in scheme.levels]
    )


def bare_hamiltonian(scheme: LevelScheme, params: ZeemanParams) -> np.ndarray:
    """Diagonal bare Hamiltonian; |m0> (and |g> in the optical frame) at zero."""
    for m in (-1, 0, 1):
        if not scheme.has_m(m):
            raise ValueError("scheme must contain |m-1>, |m0> and |m+1>")
    return np.diag(level_energies(scheme, params)).astype(complex)


def zeeman_noise_hamiltonian(delta_b, scheme: LevelScheme, params: ZeemanParams) -> np.ndarray:
    """First-order Zeeman shift ``-linear_sensitivity * m * delta_b`` on every level.

    ``delta_b`` may be a scalar (gauss) or an array, in which case a stack of
    diagonal operators with leading shape ``delta_b.shape`` is returned.
    """
    db = np.asarray(delta_b, dtype=float)
    shifts = -params.linear_sensitivity * db[..., None] * scheme.m_values
    out = np.zeros(db.shape + (scheme.dim, scheme.dim), dtype=complex)
    idx = np.arange(scheme.dim)
    out[..., idx, idx] = shifts
    return out


@dataclass(frozen=True)
class Tone:
    """One spectral component coupling ``coupling[0]`` (lower) to ``coupling[1]`` (upper).

    ``detuning`` is measured from the bare transition frequency of the pair.
    """

    coupling: tuple[str, str]
    detuning: float = 0.0
    rabi: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        lower, upper = self.coupling
        object.__setattr__(self, "coupling", (str(lower), str(upper)))
        if self.rabi < 0:
            raise ValueError("tone Rabi frequency must be non-negative")
        object.__setattr__(self, "phase", float(np.mod(self.phase, TWO_PI)))
        if lower == upper:
            raise ValueError("a tone must couple two distinct levels")
        if lower == "g" or upper == "g":
            if lower != "g":
                raise ValueError("optical tones are written as ('g', D sublevel)")
            _m_of(upper)
        else:
            if abs(_m_of(upper) - _m_of(lower)) != 1:
                raise ValueError(f"RF tone {self.coupling} is not a Delta m = +-1 transition")

    @property
    def kind(self) -> str:
        return "optical_addressing" if self.coupling[0] == "g" else "rf_dressing"


def _m_of(label: str) -> int:
    if label == "m0":
        return 0
    if len(label) == 3 and label[0] == "m" and label[1] in "+-" and label[2] in "12":
        return int(label[1:])
    raise ValueError(f"unknown level label {label!r}")


@dataclass(frozen=True)
class DriveField:
    tones: tuple[Tone, ...]
    kind: str = ""
    note: str = field(default="", compare=False)

    def __post_init__(self):
        tones = tuple(self.tones)
        object.__setattr__(self, "tones", tones)
        if not tones:
            raise ValueError("a drive field needs at least one tone")
        kinds = {t.kind for t in tones}
        if len(kinds) != 1:
            raise ValueError("all tones of a drive field must be of one kind")
        kind = kinds.pop()
        if self.kind and self.kind != kind:
            raise ValueError(f"field declared {self.kind!r} but tones are {kind!r}")
        object.__setattr__(self, "kind", kind)

    def with_common_detuning(self, delta: float) -> "DriveField":
        return DriveField(
            tuple(Tone(t.coupling, t.detuning + delta, t.rabi, t.phase) for t in self.tones),
            self.kind,
            self.note,
        )

    def scaled(self, factor: float) -> "DriveField":
        return DriveField(
            tuple(Tone(t.coupling, t.detuning, t.rabi * factor, t.phase) for t in self.tones),
            self.kind,
            self.note,
        )


def tone_frequency(tone: Tone, energies: np.ndarray, scheme: LevelScheme) -> float:
    lo, up = scheme.index(tone.coupling[0]), scheme.index(tone.coupling[1])
    return float(energies[up] - energies[lo] + tone.detuning)


def drive_hamiltonian(
    field: DriveField,
    t,
    scheme: LevelScheme,
    params: ZeemanParams,
    *,
    offsets: np.ndarray | None = None,
    counter_rotating: bool = False,
    amplitude_factor=1.0,
) -> np.ndarray:
    """Coupling Hamiltonian of a multichromatic field at time(s) ``t``.

    Each tone contributes ``(rabi/2) exp(-i(w t + phase)) |upper><lower| + h.c.``
    with ``w`` the bare transition frequency plus the tone detuning.  With
    ``offsets`` (a diagonal frame vector ``A``) the operator is expressed in
    the frame ``psi -> exp(iAt) psi``; the ``-A`` diagonal is *not* included.
    ``counter_rotating`` adds the ``exp(+i(w t + phase))`` partner of a real
    (linearly polarised) field.  ``amplitude_factor`` multiplies every Rabi
    frequency and may be an array broadcast against ``t``.
    """
    t = np.asarray(t, dtype=float)
    energies = level_energies(scheme, params)
    amp = np.asarray(amplitude_factor, dtype=float)
    out = np.zeros(t.shape + (scheme.dim, scheme.dim), dtype=complex)
    for tone in field.tones:
        if tone.coupling[0] not in scheme.labels or tone.coupling[1] not in scheme.labels:
            raise ValueError(f"tone {tone.coupling} couples levels outside the scheme")
        lo, up = scheme.index(tone.coupling[0]), scheme.index(tone.coupling[1])
        w = tone_frequency(tone, energies, scheme)
        shift = 0.0 if offsets is None else offsets[up] - offsets[lo]
        coeff = 0.5 * tone.rabi * amp * np.exp(-1j * ((w - shift) * t + tone.phase))
        if counter_rotating:
            coeff = coeff + 0.5 * tone.rabi * amp * np.exp(1j * ((w + shift) * t + tone.phase))
        out[..., up, lo] += coeff
        out[..., lo, up] += np.conj(coeff)
    return out


def is_hermitian(op: np.ndarray, rtol: float = HERMITIAN_RTOL) -> bool:
    op = np.asarray(op)
    scale = max(float(np.max(np.abs(op), initial=0.0)), 1.0)
    return bool(np.max(np.abs(op - np.conj(np.swapaxes(op, -1, -2))), initial=0.0) <= rtol * scale)


def check_hermitian(op: np.ndarray, rtol: float = HERMITIAN_RTOL) -> np.ndarray:
    if not is_hermitian(op, rtol):
        raise ValueError("operator is not Hermitian")
    return op
