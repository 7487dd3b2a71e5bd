"""Per-mode eigensolver for the final 1-MR potentials.

The primitive basis for mode n is the harmonic oscillator of the intermediate
surface (frequency omega_m,n, centred at q_f,n = 0).  Because the intermediate
and final surfaces share coordinates, the eigenvector components in this basis
are directly the overlaps <chi_m^{v_m} | chi_f^{v_f}>.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .model import Harmonic, Morse, Polynomial

DEFAULT_N_BASIS = 60
DEFAULT_N_STATES = 10


class UnsupportedPotentialForLadder(ValueError):
    pass


class NonConvergedEigensolve(RuntimeError):
    pass


class PotentialWindowWarning(UserWarning):
    pass


@dataclass(frozen=True)
class HoBasisSpec:
    omega: float
    n_basis: int = DEFAULT_N_BASIS

    def __post_init__(self):
        if self.n_basis < 2:
            raise ValueError("need at least two primitive functions")
        if not self.omega > 0:
            raise ValueError("basis frequency must be positive")


@dataclass(frozen=True)
class DvrGrid:
    points: np.ndarray
    transform: np.ndarray  # rows: primitive HO index, columns: DVR point


@dataclass(frozen=True)
class ModeSolution:
    energies: np.ndarray
    overlaps: np.ndarray  # [v_m, v_f], v_m over the whole primitive basis
    omega: float

    @property
    def n_states(self) -> int:
        return len(self.energies)

    @property
    def n_basis(self) -> int:
        return self.overlaps.shape[0]


def _annihilation(n: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1.0, n)), 1)


def position_matrix(omega: float, n: int) -> np.ndarray:
    a = _annihilation(n)
    return (a + a.T) / np.sqrt(2.0 * omega)


def build_ho_dvr(spec: HoBasisSpec) -> DvrGrid:
    x, T = np.linalg.eigh(position_matrix(spec.omega, spec.n_basis))
    T = T * np.where(T[0] < 0, -1.0, 1.0)[None, :]
    return DvrGrid(points=x, transform=T)


def kinetic_matrix(spec: HoBasisSpec) -> np.ndarray:
    """-1/2 d^2/dq^2 with exact matrix elements in the HO basis."""
    n = spec.n_basis
    a = _annihilation(n)
    a2 = a @ a
    return 0.25 * spec.omega * (np.diag(2.0 * np.arange(n) + 1.0) - a2 - a2.T)


def _power_matrix(omega: float, n: int, j: int) -> np.ndarray:
    # q^j on an enlarged basis so the kept n x n block is exact
    q = position_matrix(omega, n + j)
    return np.linalg.matrix_power(q, j)[:n, :n]


def potential_matrix(potential, spec: HoBasisSpec, path: str = "auto", grid: DvrGrid | None = None) -> np.ndarray:
    if path == "auto":
        path = "dvr" if isinstance(potential, Morse) else "ladder"
    if path == "ladder":
        if isinstance(potential, Harmonic):
            return 0.5 * potential.omega**2 * _power_matrix(spec.omega, spec.n_basis, 2)
        if isinstance(potential, Polynomial):
            V = np.zeros((spec.n_basis, spec.n_basis))
            for j, c in enumerate(potential.coefficients, start=1):
                if c:
                    V += c * _power_matrix(spec.omega, spec.n_basis, j)
            return V
        raise UnsupportedPotentialForLadder(f"{type(potential).__name__} has no ladder-operator expansion")
    if path != "dvr":
        raise ValueError(f"unknown path {path!r}")
    grid = grid or build_ho_dvr(spec)
    T = grid.transform
    return (T * potential(grid.points)[None, :]) @ T.T


def mode_hamiltonian(potential, spec: HoBasisSpec, path: str = "auto") -> np.ndarray:
    """Kinetic plus potential energy in the HO primitive basis.

    ``path='dvr'`` evaluates the potential on the DVR grid, ``'ladder'`` uses
    exact position-operator powers (polynomials and harmonic potentials only),
    ``'auto'`` picks ladder where available.  The potential is shifted so its
    minimum on the DVR window is zero.
    """
    grid = build_ho_dvr(spec)
    H = kinetic_matrix(spec) + potential_matrix(potential, spec, path, grid)
    vmin = potential.minimum((grid.points[0], grid.points[-1]))
    H -= vmin * np.eye(spec.n_basis)
    return 0.5 * (H + H.T)


def solve_mode(potential, spec: HoBasisSpec, n_states: int = DEFAULT_N_STATES, path: str = "auto") -> ModeSolution:
    if not 1 <= n_states <= spec.n_basis:
        raise ValueError(f"n_states must be in [1, {spec.n_basis}], got {n_states}")
    H = mode_hamiltonian(potential, spec, path)
    e, X = np.linalg.eigh(H)
    if not np.all(np.isfinite(e)):
        raise NonConvergedEigensolve("eigenvalues are not finite")
    e, X = e[:n_states], X[:, :n_states]
    resid = np.max(np.linalg.norm(H @ X - X * e[None, :], axis=0))
    if resid > 1e-9 * max(np.linalg.norm(H, 2), 1e-300):
        raise NonConvergedEigensolve(f"eigenpair residual {resid:.3e} too large")
    # fix each eigenvector's sign: largest-magnitude component positive
    pivot = X[np.argmax(np.abs(X), axis=0), np.arange(n_states)]
    X = X * np.sign(pivot)[None, :]

    grid = build_ho_dvr(spec)
    vmin = potential.minimum((grid.points[0], grid.points[-1]))
    edge = min(potential(grid.points[0]), potential(grid.points[-1])) - vmin
    if edge < e[-1]:
        warnings.warn(
            f"potential at the DVR window edge ({edge:.4g}) lies below the highest requested level ({e[-1]:.4g})",
            PotentialWindowWarning,
            stacklevel=2,
        )
    return ModeSolution(energies=e, overlaps=X, omega=spec.omega)


def solve_modes(model, omega_m, n_basis: int = DEFAULT_N_BASIS, n_states: int = DEFAULT_N_STATES,
                path: str = "auto") -> list:
    """Independent solves for every mode of ``model`` on the intermediate basis."""
    return [solve_mode(pot, HoBasisSpec(float(w), n_basis), n_states, path)
            for pot, w in zip(model.final_potentials, omega_m)]
