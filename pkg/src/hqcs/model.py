"""Two-surface vibronic model: harmonic initial PES, 1-MR final PES, Duschinsky map.

Everything inside the package is in atomic units (hartree, mass-weighted bohr,
hbar = 1).  Conversions to cm^-1 / eV happen only at I/O boundaries through
:func:`convert_units`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

HARTREE_TO_CM1 = 219474.6313632
HARTREE_TO_EV = 27.211386245988

_UNIT_ALIASES = {
    "hartree": "hartree",
    "au": "hartree",
    "a.u.": "hartree",
    "eh": "hartree",
    "cm-1": "cm-1",
    "cm^-1": "cm-1",
    "cm⁻¹": "cm-1",
    "wavenumber": "cm-1",
    "ev": "eV",
}
_PER_HARTREE = {"hartree": 1.0, "cm-1": HARTREE_TO_CM1, "eV": HARTREE_TO_EV}

ORTHOGONALITY_TOL = 1e-10


class ModelError(ValueError):
    """Base class for invalid model input."""


class NonOrthogonalDuschinsky(ModelError):
    pass


class NonPositiveFrequency(ModelError):
    pass


class DimensionMismatch(ModelError):
    pass


class InvalidPair(ModelError):
    pass


class UnknownUnit(ModelError):
    pass


def _canonical_unit(unit: str) -> str:
    try:
        return _UNIT_ALIASES[unit.strip().lower()]
    except (KeyError, AttributeError):
        raise UnknownUnit(f"unknown energy unit {unit!r}; expected hartree, cm-1 or eV") from None


def convert_units(value, from_unit: str, to_unit: str):
    """Convert an energy (scalar or array) between hartree, cm-1 and eV."""
    src = _canonical_unit(from_unit)
    dst = _canonical_unit(to_unit)
    if isinstance(value, (list, tuple)):
        value = np.asarray(value, dtype=float)
    if src == dst:
        return value
    return value / _PER_HARTREE[src] * _PER_HARTREE[dst]


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# one-mode potentials


@dataclass(frozen=True)
class Harmonic:
    """V(q) = omega^2 q^2 / 2."""

    omega: float

    def __call__(self, q):
        return 0.5 * self.omega**2 * np.asarray(q, dtype=float) ** 2

    def minimum(self, window=None) -> float:
        return 0.0

    @property
    def harmonic_frequency(self) -> float:
        return self.omega


@dataclass(frozen=True)
class Morse:
    """V(q) = D (1 - exp(-alpha q))^2, minimum 0 at q = 0."""

    depth: float
    alpha: float

    def __call__(self, q):
        return self.depth * (1.0 - np.exp(-self.alpha * np.asarray(q, dtype=float))) ** 2

    def minimum(self, window=None) -> float:
        return 0.0

    @property
    def harmonic_frequency(self) -> float:
        return float(np.sqrt(2.0 * self.alpha**2 * self.depth))

    def levels(self, v) -> np.ndarray:
        """Closed-form bound-state energies above the well bottom."""
        w = self.harmonic_frequency
        x = w * (np.asarray(v, dtype=float) + 0.5)
        return x - x**2 / (4.0 * self.depth)

    @classmethod
    def from_frequency(cls, depth: float, omega: float) -> "Morse":
        return cls(depth=depth, alpha=omega / np.sqrt(2.0 * depth))


@dataclass(frozen=True)
class Polynomial:
    """V(q) = sum_j c_j q^j for j = 1..p (coefficients start at the linear term)."""

    coefficients: tuple

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        out = np.zeros_like(q)
        for c in reversed(self.coefficients):
            out = (out + c) * q
        return out

    def minimum(self, window=None) -> float:
        lo, hi = window if window is not None else (-1.0, 1.0)
        q = np.linspace(lo, hi, 20001)
        return float(np.min(self(q)))

    @property
    def harmonic_frequency(self) -> float:
        c2 = self.coefficients[1] if len(self.coefficients) > 1 else 0.0
        return float(np.sqrt(2.0 * c2)) if c2 > 0 else float("nan")

    @property
    def degree(self) -> int:
        return len(self.coefficients)


OneModePotential = Union[Harmonic, Morse, Polynomial]


# ---------------------------------------------------------------------------
# surfaces and the map between them


@dataclass(frozen=True)
class HarmonicPES:
    frequencies: np.ndarray
    energy_offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "frequencies", _frozen(self.frequencies))

    @property
    def n_modes(self) -> int:
        return len(self.frequencies)

    @property
    def zero_point_energy(self) -> float:
        return 0.5 * float(np.sum(self.frequencies))


@dataclass(frozen=True)
class DuschinskyMap:
    """q_f = S q_i + dq."""

    matrix: np.ndarray
    displacement: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen(np.atleast_2d(self.matrix)))
        object.__setattr__(self, "displacement", _frozen(self.displacement))

    @property
    def orthogonality_error(self) -> float:
        s = self.matrix
        return float(np.max(np.abs(s.T @ s - np.eye(s.shape[1]))))

    @classmethod
    def from_inverse(cls, matrix, displacement) -> "DuschinskyMap":
        """Build from the inverse relation q_i = S' q_f + dq'."""
        s_inv = np.asarray(matrix, dtype=float)
        dq_inv = np.asarray(displacement, dtype=float)
        return cls(s_inv.T, -s_inv.T @ dq_inv)


@dataclass(frozen=True)
class VibronicModel:
    initial: HarmonicPES
    final_potentials: tuple
    final_frequencies: np.ndarray
    duschinsky: DuschinskyMap
    adiabatic_energy: float = 0.0
    transition_dipole: float = 1.0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "final_potentials", tuple(self.final_potentials))
        object.__setattr__(self, "final_frequencies", _frozen(self.final_frequencies))

    @property
    def n_modes(self) -> int:
        return self.initial.n_modes


@dataclass(frozen=True)
class IntermediatePES:
    frequencies: np.ndarray
    coordinates: str = field(default="final")

    def __post_init__(self):
        object.__setattr__(self, "frequencies", _frozen(self.frequencies))


# ---------------------------------------------------------------------------
# operations


def validate_model(model: VibronicModel) -> VibronicModel:
    """Return ``model`` unchanged if every invariant holds, otherwise raise."""
    n = model.n_modes
    if n < 1:
        raise DimensionMismatch("model has no modes")
    s = model.duschinsky.matrix
    sizes = {
        "initial frequencies": len(model.initial.frequencies),
        "final potentials": len(model.final_potentials),
        "final frequencies": len(model.final_frequencies),
        "displacement": len(model.duschinsky.displacement),
        "Duschinsky rows": s.shape[0],
        "Duschinsky columns": s.shape[1],
    }
    bad = {k: v for k, v in sizes.items() if v != n}
    if bad:
        raise DimensionMismatch(f"expected {n} modes, got {bad}")
    for label, freqs in (("initial", model.initial.frequencies), ("final", model.final_frequencies)):
        for i, w in enumerate(freqs):
            if not np.isfinite(w) or w <= 0:
                raise NonPositiveFrequency(f"{label} frequency of mode {i} is {w}")
    for i, pot in enumerate(model.final_potentials):
        if isinstance(pot, Harmonic) and not pot.omega > 0:
            raise NonPositiveFrequency(f"final harmonic potential of mode {i} has omega={pot.omega}")
        if isinstance(pot, Morse) and not (pot.depth > 0 and pot.alpha > 0):
            raise ModelError(f"Morse potential of mode {i} needs D>0 and alpha>0, got {pot}")
        if isinstance(pot, Polynomial) and pot.degree < 2:
            raise ModelError(f"polynomial potential of mode {i} must be at least quadratic")
    err = model.duschinsky.orthogonality_error
    if not err < ORTHOGONALITY_TOL:
        dev = np.abs(s.T @ s - np.eye(n))
        row, col = np.unravel_index(np.argmax(dev), dev.shape)
        raise NonOrthogonalDuschinsky(
            f"Duschinsky matrix is not orthogonal: |S^T S - I| = {err:.3e} at ({row}, {col})"
        )
    if not np.isfinite(model.adiabatic_energy):
        raise ModelError("adiabatic energy must be finite")
    if not model.transition_dipole >= 0:
        raise ModelError("transition dipole must be non-negative")
    return model


def givens(n: int, i: int, j: int, theta: float) -> np.ndarray:
    """N x N rotation by ``theta`` in the (i, j) plane: [[c, -s], [s, c]]."""
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise InvalidPair(f"invalid mode pair ({i}, {j}) for {n} modes")
    g = np.eye(n)
    c, s = np.cos(theta), np.sin(theta)
    g[i, i] = g[j, j] = c
    g[i, j] = -s
    g[j, i] = s
    return g


def make_rotation(n_modes: int, angles: Sequence) -> np.ndarray:
    """Compose Givens rotations.

    ``angles`` is a sequence of ``((i, j), theta)``.  The rotations act on a
    coordinate vector in the listed order, so the result is ``G_k ... G_2 G_1``.
    """
    s = np.eye(n_modes)
    for (i, j), theta in angles:
        s = givens(n_modes, int(i), int(j), float(theta)) @ s
    return s


def intermediate_pes(model: VibronicModel) -> IntermediatePES:
    return IntermediatePES(np.maximum(model.initial.frequencies, model.final_frequencies))
