"""Line assembly, energy bookkeeping and Gaussian broadening."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .model import HARTREE_TO_CM1
from .sampling import PairSet, pair_amplitudes, transition_amplitudes, vm_coefficients

DEFAULT_GRID_POINTS = 2001
DEFAULT_SPAN = 6.0
SUMMATIONS = ("support", "pairs")


class IndexOutOfRange(IndexError):
    pass


@dataclass(frozen=True)
class SpectralLine:
    energy: float
    strength: float


@dataclass(frozen=True)
class LineList:
    """Lines in hartree, one per final configuration in ``configs``."""

    energies: np.ndarray
    strengths: np.ndarray
    configs: np.ndarray

    def __len__(self) -> int:
        return len(self.energies)

    def __iter__(self):
        for e, s in zip(self.energies, self.strengths):
            yield SpectralLine(float(e), float(s))

    def significant(self, threshold: float = 0.0) -> "LineList":
        keep = self.strengths > threshold
        return LineList(self.energies[keep], self.strengths[keep], self.configs[keep])

    @property
    def total_strength(self) -> float:
        return float(self.strengths.sum())


@dataclass(frozen=True)
class SpectrumGrid:
    energy: np.ndarray  # hartree, uniform
    intensity: np.ndarray
    sigma: float

    def normalized(self) -> "SpectrumGrid":
        peak = self.intensity.max() if len(self.intensity) else 0.0
        if peak <= 0:
            return self
        return SpectrumGrid(self.energy, self.intensity / peak, self.sigma)

    def shifted(self, shift: float) -> "SpectrumGrid":
        return SpectrumGrid(self.energy + shift, self.intensity, self.sigma)

    def peaks(self, rel_threshold: float = 0.0):
        """Local maxima as (energy, intensity / max) pairs."""
        y = self.intensity
        if len(y) < 3 or y.max() <= 0:
            return []
        inner = np.flatnonzero((y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:])) + 1
        top = y.max()
        return [(float(self.energy[i]), float(y[i] / top)) for i in inner if y[i] / top > rel_threshold]

    def write_csv(self, path, normalize: bool = True, shift: float = 0.0) -> None:
        """Write ``energy_cm1,intensity``; normalization and shift are output-only."""
        g = self.normalized() if normalize else self
        with open(path, "w") as fh:
            fh.write("energy_cm1,intensity\n")
            for e, y in zip((g.energy + shift) * HARTREE_TO_CM1, g.intensity):
                fh.write(f"{e:.6f},{y:.12e}\n")


def initial_state_energy(model) -> float:
    """E_ad plus the initial-state zero-point energy."""
    return float(model.adiabatic_energy + model.initial.zero_point_energy)


def final_config_energy(solutions, v_f) -> float | np.ndarray:
    """Sum of per-mode eigenvalues; ``v_f`` may be one configuration or an (M, N) array."""
    v = np.asarray(v_f, dtype=np.int64)
    if v.shape[-1] != len(solutions):
        raise IndexOutOfRange(f"configuration has {v.shape[-1]} modes, expected {len(solutions)}")
    total = np.zeros(v.shape[:-1])
    for n, sol in enumerate(solutions):
        vn = v[..., n]
        if np.any(vn < 0) or np.any(vn >= sol.n_states):
            raise IndexOutOfRange(f"mode {n}: quanta outside [0, {sol.n_states})")
        total = total + sol.energies[vn]
    return float(total) if total.ndim == 0 else total


def all_final_configs(solutions) -> np.ndarray:
    """Every final configuration (product of per-mode state ranges)."""
    return np.array(list(itertools.product(*(range(s.n_states) for s in solutions))), dtype=np.int64)


def line_list(pairs: PairSet | None, configs, table, dq, solutions, model, *,
              summation: str = "support", normalize: bool = False, absorption: bool = False,
              final_configs=None) -> LineList:
    """Coherent line strengths mu^2 |A(v_f)|^2 for each distinct final configuration.

    Parameters
    ----------
    pairs : PairSet
        Sampled pairs; their distinct v_f define the lines unless
        ``final_configs`` is given.
    configs : ConfigTable
        Boson-sampling support of v_m.
    summation : {'support', 'pairs'}
        ``'support'`` sums each A(v_f) over every v_m in ``configs``;
        ``'pairs'`` only over the v_m paired with that v_f in ``pairs``.
    normalize : bool
        Divide P(v_m) by the total probability of the truncated table.
    absorption : bool
        Use E_f - E_i0 instead of the emission energy E_i0 - E_f.
    final_configs : array, optional
        Explicit v_f list (e.g. the whole final space), bypassing ``pairs``.
    """
    if summation not in SUMMATIONS:
        raise ValueError(f"summation must be one of {SUMMATIONS}")
    coeffs = vm_coefficients(configs, table, dq, normalize)
    if final_configs is not None:
        vf = np.asarray(final_configs, dtype=np.int64)
        A = transition_amplitudes(configs.configs, coeffs, vf, solutions)
    elif summation == "pairs":
        vf, A = pair_amplitudes(pairs, configs, coeffs, solutions)
    else:
        vf = pairs.distinct_vf
        A = transition_amplitudes(configs.configs, coeffs, vf, solutions)
    e = initial_state_energy(model) - final_config_energy(solutions, vf)
    if absorption:
        e = -e
    strengths = model.transition_dipole**2 * A**2
    return LineList(np.atleast_1d(e), strengths, vf)


def energy_grid(lines: LineList, sigma: float, n_points: int = DEFAULT_GRID_POINTS,
                span: float = DEFAULT_SPAN) -> np.ndarray:
    lo = float(np.min(lines.energies)) - span * sigma
    hi = float(np.max(lines.energies)) + span * sigma
    return np.linspace(lo, hi, n_points)


def broaden(lines: LineList, sigma: float, grid=None, n_points: int = DEFAULT_GRID_POINTS,
            span: float = DEFAULT_SPAN, chunk: int = 2048) -> SpectrumGrid:
    """Sum of unnormalized Gaussians strength * exp(-(E - E_line)^2 / (2 sigma^2))."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if len(lines) == 0:
        raise ValueError("no lines to broaden")
    x = energy_grid(lines, sigma, n_points, span) if grid is None else np.asarray(grid, dtype=float)
    y = np.zeros_like(x)
    for lo in range(0, len(lines), chunk):
        e = lines.energies[lo : lo + chunk]
        s = lines.strengths[lo : lo + chunk]
        y += np.exp(-((x[:, None] - e[None, :]) ** 2) / (2.0 * sigma**2)) @ s
    return SpectrumGrid(x, y, float(sigma))
