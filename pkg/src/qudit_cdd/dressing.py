"""RF dressing of the |m-1>, |m0>, |m+1> V-system and its dressed eigenbasis.

Two schemes are supported.  In the *monochromatic* scheme a single RF field,
detuned by ``detuning`` from both adjacent Zeeman transitions, couples
|m-1> and |m+1> through a two-photon Raman process.  In the *bichromatic*
scheme two resonant fields drive |m-1> <-> |m0> and |m0> <-> |m+1>.

The rotating-frame Hamiltonian, in the basis (|m-1>, |m0>, |m+1>), is::

    H_R = 1/2 [[-2D,          W1 e^{i p1},  0          ],
               [W1 e^{-i p1}, 0,            W2 e^{i p2}],
               [0,            W2 e^{-i p2}, -2D        ]]
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .physics import DriveField, LevelScheme, Tone, ZeemanParams, level_energies, sublevel_energy

V_LEVELS = ("m-1", "m0", "m+1")

WARN_RATIO = 0.3
FAIL_RATIO = 1.0


@dataclass(frozen=True)
class Monochromatic:
    """Single far-detuned RF field of Rabi frequency ``omega`` (rad/s)."""

    omega: float
    detuning: float
    phase: float = 0.0

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("monochromatic dressing needs omega > 0")
        if not abs(self.omega) < abs(self.detuning):
            raise ValueError("monochromatic dressing needs |omega| < |detuning|")
        if abs(self.detuning) < 3 * self.omega:
            warnings.warn(
                f"omega/detuning = {self.omega / abs(self.detuning):.2f}: the Raman "
                "hierarchy omega << detuning is only marginally satisfied",
                stacklevel=3,
            )

    @classmethod
    def for_params(cls, omega: float, params: ZeemanParams, phase: float = 0.0) -> "Monochromatic":
        """Single-frequency field: detuning fixed by the quadratic Zeeman asymmetry."""
        return cls(omega, natural_detuning(params), phase)

    @classmethod
    def from_raman_rabi(cls, omega_e: float, params: ZeemanParams, phase: float = 0.0) -> "Monochromatic":
        delta = natural_detuning(params)
        return cls(float(np.sqrt(2 * abs(delta) * omega_e)), delta, phase)

    kind = "monochromatic"
    omega1 = property(lambda self: self.omega)
    omega2 = property(lambda self: self.omega)
    phase1 = property(lambda self: self.phase)
    phase2 = property(lambda self: self.phase)
    delta = property(lambda self: self.detuning)


@dataclass(frozen=True)
class Bichromatic:
    """Two resonant RF fields; ``omega2`` defaults to ``omega1``."""

    omega1: float
    omega2: float | None = None
    phase1: float = 0.0
    phase2: float = 0.0

    def __post_init__(self):
        if self.omega2 is None:
            object.__setattr__(self, "omega2", self.omega1)
        if self.omega1 < 0 or self.omega2 < 0:
            raise ValueError("Rabi frequencies must be non-negative")

    kind = "bichromatic"
    delta = 0.0

    @property
    def omega(self) -> float:
        return self.omega1


DressingConfig = Union[Monochromatic, Bichromatic]


def natural_detuning(params: ZeemanParams) -> float:
    """Detuning at which one RF frequency sits symmetrically between both transitions."""
    return -(sublevel_energy(1, params) + sublevel_energy(-1, params)) / 2.0


def rotating_frame_hamiltonian(config: DressingConfig, params: ZeemanParams | None = None) -> np.ndarray:
    """3x3 dressing Hamiltonian (rad/s) in the frame co-rotating with the RF fields."""
    d = config.delta
    c1 = config.omega1 * np.exp(1j * config.phase1)
    c2 = config.omega2 * np.exp(1j * config.phase2)
    return 0.5 * np.array(
        [
            [-2 * d, c1, 0],
            [np.conj(c1), 0, c2],
            [0, np.conj(c2), -2 * d],
        ],
        dtype=complex,
    )


@dataclass(frozen=True)
class DressedBasis:
    labels: tuple[str, ...]
    vectors: np.ndarray  # columns over (|m-1>, |m0>, |m+1>)
    energies: np.ndarray

    def __post_init__(self):
        gram = self.vectors.conj().T @ self.vectors
        if not np.allclose(gram, np.eye(len(self.labels)), atol=1e-10):
            raise ValueError("dressed eigenvectors are not orthonormal")

    def vector(self, label: str) -> np.ndarray:
        return self.vectors[:, self.labels.index(label)]

    def energy(self, label: str) -> float:
        return float(self.energies[self.labels.index(label)])

    def embed(self, scheme: LevelScheme) -> np.ndarray:
        """Dressed vectors as columns in the full ``scheme`` basis."""
        out = np.zeros((scheme.dim, len(self.labels)), dtype=complex)
        for row, lab in enumerate(V_LEVELS):
            out[scheme.index(lab)] = self.vectors[row]
        return out

    def gap(self, label: str | None = None) -> float:
        """Smallest energy separation (from ``label``, or between any pair)."""
        e = self.energies
        if label is not None:
            i = self.labels.index(label)
            return float(min(abs(e[i] - e[j]) for j in range(len(e)) if j != i))
        return float(min(abs(e[i] - e[j]) for i in range(len(e)) for j in range(i + 1, len(e))))


def fix_phase(v: np.ndarray, ref: int | None = None) -> np.ndarray:
    """Make component ``ref`` real and positive.

    Without ``ref`` (or when that component vanishes) the largest-magnitude
    component is used, the first one on ties.
    """
    mags = np.abs(v)
    if ref is None or mags[ref] <= 1e-9 * mags.max():
        ref = int(np.argmax(mags >= mags.max() * (1 - 1e-9)))
    if mags[ref] == 0:
        return v
    return v * (np.conj(v[ref]) / mags[ref])


# phase reference per dressed state: the |m+1> amplitude, except for the
# monochromatic |0>-like state, which is referenced to |m0>
_PHASE_REF = {"zero": 1}


def dressed_basis(config: DressingConfig) -> DressedBasis:
    """Numerically exact dressed eigensystem of :func:`rotating_frame_hamiltonian`.

    Labels: ``plus``/``minus``/``zero`` for the monochromatic scheme,
    ``tilde_plus``/``tilde_minus``/``tilde_zero`` for the bichromatic one.

    Monochromatic ``plus``/``minus`` are assigned by overlap with
    ``(|m+1> +- exp(2i phase)|m-1>)/sqrt(2)`` (the bright/dark pair of the
    field), ``zero`` is the state with the largest |m0> weight.  Bichromatic
    states are sorted by eigenvalue (descending: tilde_plus, tilde_zero,
    tilde_minus); exact ties fall back to the |m0> weight.

    Phases: the |m+1> amplitude of every vector is real and positive (|m0>
    for the monochromatic ``zero`` state).
    """
    h = rotating_frame_hamiltonian(config)
    energies, vecs = np.linalg.eigh(h)
    scale = max(np.max(np.abs(h)), 1e-300)

    if config.kind == "monochromatic":
        i_zero = int(np.argmax(np.abs(vecs[1])))
        rest = [k for k in range(3) if k != i_zero]
        rot = np.exp(2j * config.phase)
        plus_ref = np.array([rot, 0, 1]) / np.sqrt(2)
        overlaps = [abs(np.vdot(plus_ref, vecs[:, k])) for k in rest]
        i_plus = rest[int(np.argmax(overlaps))]
        i_minus = rest[1 - int(np.argmax(overlaps))]
        order, labels = [i_plus, i_minus, i_zero], ("plus", "minus", "zero")
    else:
        keys = sorted(range(3), key=lambda k: (-round(energies[k] / scale, 9), -abs(vecs[1, k])))
        # keys = [highest, middle, lowest]
        order, labels = [keys[0], keys[2], keys[1]], ("tilde_plus", "tilde_minus", "tilde_zero")
    cols = [fix_phase(vecs[:, k], _PHASE_REF.get(lab, 2)) for k, lab in zip(order, labels)]
    return DressedBasis(labels, np.column_stack(cols), energies[order])


def closed_form_vectors(phase: float) -> dict[str, np.ndarray]:
    """Closed-form bichromatic eigenvectors for equal Rabi frequencies, phase1 = 0."""
    e = np.exp(1j * phase)
    r2 = np.sqrt(2)
    return {
        "tilde_plus": np.array([e, r2 * e, 1]) / 2,
        "tilde_minus": np.array([e, -r2 * e, 1]) / 2,
        "tilde_zero": np.array([-e, 0, 1]) / r2,
    }


class RamanCoupling(NamedTuple):
    rabi: float
    stark_shift: float


def effective_raman_rabi(omega: float, delta: float) -> RamanCoupling:
    """Two-photon Rabi frequency ``omega**2 / (2 delta)`` and the equal |m0> light shift."""
    if delta == 0:
        raise ValueError("delta = 0 has no Raman limit; use the bichromatic scheme")
    w = omega**2 / (2 * delta)
    return RamanCoupling(w, w)


def perturbative_energies(config: Monochromatic) -> dict[str, float]:
    """Leading-order monochromatic dressed energies (valid for omega << |delta|).

    The bright state and |m0> repel by the Raman rate omega**2/(2 delta); the
    dark state keeps the bare detuning.
    """
    if config.kind != "monochromatic":
        raise ValueError("perturbative energies are defined for monochromatic dressing")
    w = effective_raman_rabi(config.omega, config.delta).rabi
    return {"plus": -config.delta - w, "minus": -config.delta, "zero": w}


@dataclass(frozen=True)
class HierarchyReport:
    ratios: dict
    statuses: dict
    status: str

    def __str__(self):
        rows = [f"{k}: {v:.4g} [{self.statuses[k]}]" for k, v in self.ratios.items()]
        return "; ".join(rows) + f" -> {self.status}"


def _grade(r: float) -> str:
    if r > FAIL_RATIO:
        return "FAIL"
    if r > WARN_RATIO:
        return "WARN"
    return "PASS"


def hierarchy_check(config: DressingConfig, params: ZeemanParams) -> HierarchyReport:
    """Grade the separation of scales the dressing relies on.

    Monochromatic: ``omega_e/omega`` and ``omega/|delta|``.  Bichromatic:
    ``omega/|w(+1) + w(-1)|``, i.e. the Rabi frequency against the
    quadratic-Zeeman asymmetry that keeps each RF field off the other
    transition.  Ratios above 0.3 warn, above 1.0 fail.
    """
    if config.kind == "monochromatic":
        omega_e = effective_raman_rabi(config.omega, abs(config.delta)).rabi
        ratios = {"omega_e/omega": omega_e / config.omega, "omega/delta": config.omega / abs(config.delta)}
    else:
        asym = abs(sublevel_energy(1, params) + sublevel_energy(-1, params))
        omega = max(config.omega1, config.omega2)
        ratios = {"omega/asymmetry": np.inf if asym == 0 else omega / asym}
    statuses = {k: _grade(v) for k, v in ratios.items()}
    worst = max(statuses.values(), key=["PASS", "WARN", "FAIL"].index)
    return HierarchyReport(ratios, statuses, worst)


def dressing_field(config: DressingConfig, params: ZeemanParams) -> DriveField:
    """Lab-frame RF tones realising ``config`` (frequencies sum to w(+1) - w(-1))."""
    return DriveField(
        (
            Tone(("m-1", "m0"), -config.delta, config.omega1, config.phase1),
            Tone(("m0", "m+1"), config.delta, config.omega2, config.phase2),
        ),
        "rf_dressing",
    )


def frame_offsets(scheme: LevelScheme, params: ZeemanParams, delta: float = 0.0) -> np.ndarray:
    """Diagonal frame vector ``A`` of the transformation ``psi -> exp(iAt) psi``.

    |m+-1> rotate at their bare energy plus ``delta`` (the RF frame); every
    other level rotates at its bare energy, so with ``delta = 0`` this is the
    interaction picture of the bare Hamiltonian.
    """
    a = level_energies(scheme, params).copy()
    for m in (-1, 1):
        if scheme.has_m(m):
            a[scheme.index_of_m(m)] += delta
    return a
