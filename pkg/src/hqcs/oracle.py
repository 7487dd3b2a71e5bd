"""Brute-force reference calculations for small systems.

Nothing here goes through the Fock-space propagation or the DVR solver; the
wavefunctions are built directly on grids or in explicit product bases.  The
Doktorov parameters are used only to size the default basis.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numpy.polynomial.hermite import hermgauss
from scipy.sparse.linalg import eigsh

from .doktorov import build_dimensionless, decompose
from .focksim import photon_statistics
from .model import VibronicModel, intermediate_pes
from .spectrum import LineList, SpectrumGrid, energy_grid, initial_state_energy

MAX_GRID_POINTS = 2**24
BASIS_CAP = {1: 400, 2: 200, 3: 48, 4: 24}


class TooManyModes(ValueError):
    pass


def _check_modes(n: int, limit: int) -> None:
    if n > limit:
        raise TooManyModes(f"{n} modes exceed the brute-force limit of {limit}")


# ---------------------------------------------------------------------------
# grid quadrature of harmonic overlaps


@dataclass(frozen=True)
class QuadratureSpec:
    """Grid half-width in multiples of the widest Gaussian width, and points per mode."""

    extent: float = 9.0
    points: int = 128

    def __post_init__(self):
        if self.points < 64:
            raise ValueError("need at least 64 points per mode")
        if not self.extent > 0:
            raise ValueError("extent must be positive")


@dataclass(frozen=True)
class HarmonicPair:
    """Initial ground state and intermediate oscillators: q_m = S q_i + dq."""

    omega_i: np.ndarray
    omega_m: np.ndarray
    S: np.ndarray
    dq: np.ndarray

    @classmethod
    def from_model(cls, model: VibronicModel) -> "HarmonicPair":
        return cls(np.asarray(model.initial.frequencies), intermediate_pes(model).frequencies,
                   np.asarray(model.duschinsky.matrix), np.asarray(model.duschinsky.displacement))

    @property
    def n_modes(self) -> int:
        return len(self.omega_i)


def ho_functions(omega: float, q: np.ndarray, vmax: int) -> np.ndarray:
    """Normalized HO eigenfunctions psi_0..psi_vmax on ``q`` by the stable three-term recursion."""
    out = np.empty((vmax + 1, len(q)))
    out[0] = (omega / np.pi) ** 0.25 * np.exp(-0.5 * omega * q**2)
    if vmax >= 1:
        out[1] = np.sqrt(2.0 * omega) * q * out[0]
    for n in range(1, vmax):
        out[n + 1] = np.sqrt(2.0 * omega / (n + 1)) * q * out[n] - np.sqrt(n / (n + 1)) * out[n - 1]
    return out


def _grid(pair: HarmonicPair, vmax: int, spec: QuadratureSpec):
    S = np.asarray(pair.S, dtype=float)
    wi = np.asarray(pair.omega_i, dtype=float)
    wm = np.asarray(pair.omega_m, dtype=float)
    dq = np.asarray(pair.dq, dtype=float)
    sig_i = np.sqrt((S**2 / (2.0 * wi)[None, :]).sum(axis=1))
    turn = np.sqrt((2.0 * vmax + 1.0) / wm) + spec.extent / np.sqrt(2.0 * wm)
    half = np.maximum(spec.extent * sig_i, turn)
    lo = np.minimum(0.0, dq) - half
    hi = np.maximum(0.0, dq) + half
    return [np.linspace(a, b, spec.points) for a, b in zip(lo, hi)]


def quadrature_table(pair: HarmonicPair, vmax: int, spec: QuadratureSpec | None = None) -> np.ndarray:
    """<phi_m^v | phi_i^0> for every v with v_n <= vmax, as an (vmax+1,)*N tensor."""
    spec = spec or QuadratureSpec()
    n = pair.n_modes
    _check_modes(n, 3)
    if spec.points**n > MAX_GRID_POINTS:
        raise MemoryError(f"{spec.points}^{n} grid points exceed {MAX_GRID_POINTS}")
    axes = _grid(pair, vmax, spec)
    mesh = np.meshgrid(*axes, indexing="ij")
    x = np.stack([m - d for m, d in zip(mesh, pair.dq)], axis=-1)
    qi = x @ np.asarray(pair.S, dtype=float)  # rows: S^T (q - dq)
    wi = np.asarray(pair.omega_i, dtype=float)
    norm = np.prod((wi / np.pi) ** 0.25)
    f = norm * np.exp(-0.5 * np.sum(wi * qi**2, axis=-1))
    out = f
    for ax, w in zip(axes, pair.omega_m):
        h = ax[1] - ax[0]
        weights = np.full(len(ax), h)
        weights[[0, -1]] *= 0.5
        basis = ho_functions(float(w), ax, vmax) * weights[None, :]
        # contract the leading grid axis, append the quantum-number axis
        out = np.tensordot(out, basis, axes=([0], [1]))
    return out


def quadrature_overlap(pair: HarmonicPair, v, spec: QuadratureSpec | None = None) -> float:
    v = tuple(int(x) for x in np.atleast_1d(v))
    if len(v) != pair.n_modes:
        raise ValueError("configuration length does not match the number of modes")
    return float(quadrature_table(pair, max(v), spec)[v])


# ---------------------------------------------------------------------------
# explicit product-basis diagonalization


def _ladder(n: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1.0, n)), 1)


def _ho_ops(omega: float, nb: int):
    """Kinetic, q and q^2 matrices with exact elements in a truncated HO basis."""
    a = _ladder(nb + 2)
    q = (a + a.T) / np.sqrt(2.0 * omega)
    q2 = (q @ q)[:nb, :nb]
    a2 = (a @ a)[:nb, :nb]
    kin = 0.25 * omega * (np.diag(2.0 * np.arange(nb) + 1.0) - a2 - a2.T)
    return kin, q[:nb, :nb], q2


def _gh_potential(potential, omega: float, nb: int) -> np.ndarray:
    """<j|V|k> in the HO basis by Gauss-Hermite quadrature."""
    ng = int(min(max(3 * nb, 100), 360))
    t, w = hermgauss(ng)
    h = np.empty((nb, ng))
    h[0] = np.sqrt(w / np.sqrt(np.pi))
    if nb > 1:
        h[1] = np.sqrt(2.0) * t * h[0]
    for j in range(1, nb - 1):
        h[j + 1] = np.sqrt(2.0 / (j + 1)) * t * h[j] - np.sqrt(j / (j + 1)) * h[j - 1]
    return (h * potential(t / np.sqrt(omega))[None, :]) @ h.T


def _basis_frequencies(model: VibronicModel) -> np.ndarray:
    return np.array([p.harmonic_frequency for p in model.final_potentials], dtype=float)


def final_mode_eigen(model: VibronicModel, nb) -> list:
    """Per-mode (energies, vectors) of the final 1-D Hamiltonians in HO bases at omega_f.

    The final Hamiltonian is a sum of one-mode terms, so its product-space
    eigenbasis is the tensor product of these.  Energies are measured from
    each potential's minimum.
    """
    out = []
    for pot, w, n in zip(model.final_potentials, _basis_frequencies(model), nb):
        kin, _, _ = _ho_ops(w, n)
        H = kin + _gh_potential(pot, w, n)
        e, X = np.linalg.eigh(0.5 * (H + H.T))
        e = e - pot.minimum()
        pivot = X[np.argmax(np.abs(X), axis=0), np.arange(n)]
        out.append((e, X * np.sign(pivot)[None, :]))
    return out


def _kron_all(mats) -> sp.csr_matrix:
    out = sp.csr_matrix(mats[0])
    for m in mats[1:]:
        out = sp.kron(out, sp.csr_matrix(m), format="csr")
    return out


def initial_hamiltonian(model: VibronicModel, nb) -> sp.csr_matrix:
    """H_i = T + 1/2 sum_l omega_i,l^2 q_i,l^2 with q_i = S^T (q_f - dq), in the omega_f product basis."""
    freqs = _basis_frequencies(model)
    n = model.n_modes
    S = np.asarray(model.duschinsky.matrix, dtype=float)
    dq = np.asarray(model.duschinsky.displacement, dtype=float)
    M = S @ np.diag(np.asarray(model.initial.frequencies) ** 2) @ S.T
    ops = [_ho_ops(w, k) for w, k in zip(freqs, nb)]
    eyes = [np.eye(k) for k in nb]

    def embed(pairs):
        mats = list(eyes)
        for mode, op in pairs:
            mats[mode] = op
        return _kron_all(mats)

    # shifted coordinates x_n = q_n - dq_n
    xs = [ops[j][1] - dq[j] * eyes[j] for j in range(n)]
    xx = [ops[j][2] - 2.0 * dq[j] * ops[j][1] + dq[j] ** 2 * eyes[j] for j in range(n)]
    H = sp.csr_matrix((int(np.prod(nb)),) * 2)
    for j in range(n):
        H = H + embed([(j, ops[j][0] + 0.5 * M[j, j] * xx[j])])
        for k in range(j + 1, n):
            if M[j, k] != 0.0:
                H = H + M[j, k] * embed([(j, xs[j]), (k, xs[k])])
    return ((H + H.T) * 0.5).tocsr()


def initial_ground_state(model: VibronicModel, nb) -> np.ndarray:
    """Ground state of H_i in the omega_f product basis, phase fixed by a positive 0-component."""
    H = initial_hamiltonian(model, nb)
    if H.shape[0] <= 2000:
        e, X = np.linalg.eigh(H.toarray())
        c = X[:, 0]
    else:
        zpe = model.initial.zero_point_energy
        e, X = eigsh(H, k=1, sigma=0.5 * zpe, which="LM", tol=1e-13)
        c = X[:, 0]
    if c[0] < 0 or (c[0] == 0 and c[np.argmax(np.abs(c))] < 0):
        c = -c
    return c.reshape(tuple(nb))


def final_state_overlaps(model: VibronicModel, nb) -> tuple:
    """(energies tensor, <phi_f^v | phi_i^0> tensor) over the whole product space."""
    eig = final_mode_eigen(model, nb)
    c = initial_ground_state(model, nb)
    for k, (_, X) in enumerate(eig):
        c = np.moveaxis(np.tensordot(X, c, axes=([0], [k])), 0, k)
    E = np.zeros(tuple(nb))
    for k, (e, _) in enumerate(eig):
        shape = [1] * len(nb)
        shape[k] = len(e)
        E = E + e.reshape(shape)
    return E, c


def default_basis_size(model: VibronicModel, n_sigma: float = 20.0) -> int:
    """Per-mode omega_f basis size from the quanta statistics of the initial state."""
    dmap = build_dimensionless(model.initial.frequencies, _basis_frequencies(model),
                               model.duschinsky.matrix, model.duschinsky.displacement)
    mean, std = photon_statistics(decompose(dmap))
    return int(min(np.ceil(mean + n_sigma * std) + 10, BASIS_CAP[min(model.n_modes, 4)]))


def _basis_sizes(model, n_basis) -> list:
    if n_basis is None:
        n_basis = default_basis_size(model)
    sizes = [int(n_basis)] * model.n_modes if np.ndim(n_basis) == 0 else [int(x) for x in n_basis]
    if len(sizes) != model.n_modes:
        raise ValueError("one basis size per mode required")
    return sizes


def exact_spectrum_sos(model: VibronicModel, n_basis=None, threshold: float = 1e-10,
                       absorption: bool = False) -> LineList:
    """Every line mu^2 |<phi_f^v|phi_i^0>|^2 above ``threshold`` at E_i0 - E_f,v."""
    _check_modes(model.n_modes, 2)
    nb = _basis_sizes(model, n_basis)
    E, c = final_state_overlaps(model, nb)
    s = model.transition_dipole**2 * c.reshape(-1) ** 2
    e = initial_state_energy(model) - E.reshape(-1)
    if absorption:
        e = -e
    keep = np.flatnonzero(s > threshold)
    configs = np.array(list(itertools.product(*(range(k) for k in nb))), dtype=np.int64)[keep]
    return LineList(e[keep], s[keep], configs)


def _core_lines(p: np.ndarray, w: np.ndarray, drop: float):
    """Narrowest energy window of lines whose excluded weight is at most ``drop`` of the total."""
    order = np.argsort(w)
    p, w = p[order], w[order]
    c = np.cumsum(p)
    budget = drop * c[-1]
    before = np.concatenate([[0.0], c[:-1]])  # weight left of each candidate start
    starts = np.flatnonzero(before <= budget)
    ends = np.searchsorted(c, c[-1] - budget + before[starts], side="left")
    ends = np.minimum(np.maximum(ends, starts), len(w) - 1)
    k = int(np.argmin(w[ends] - w[starts]))
    lo, hi = starts[k], ends[k] + 1
    return p[lo:hi], w[lo:hi]


def tcf_spectrum(model: VibronicModel, sigma: float, T: float | None = None, dt: float = 8.0,
                 n_basis=None, grid=None, absorption: bool = False, drop: float = 1e-9) -> SpectrumGrid:
    """Spectrum from the windowed Fourier transform of the time correlation function.

    C(t) = exp(i E_i0 t) <phi_i^0| exp(-i H_f t) |phi_i^0> is propagated
    through the eigendecomposition of H_f on t = -T..T in steps ``dt``,
    multiplied by exp(-sigma^2 t^2 / 2) and transformed onto ``grid``.  The
    result is scaled so a single line of strength s gives the peak height s,
    matching :func:`hqcs.spectrum.broaden`.  ``dt`` is an upper bound: it is
    reduced when the retained lines span more than the alias-free band.
    Only eigenstates within 40 sigma of the grid enter C(t); the rest would
    contribute below exp(-800) on the grid but would force a tiny step.
    Without ``grid`` the default grid spans the lines left after dropping
    outliers of combined weight ``drop``.
    """
    _check_modes(model.n_modes, 3)
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    T = 8.0 / sigma if T is None else float(T)
    nb = _basis_sizes(model, n_basis)
    E, c = final_state_overlaps(model, nb)
    p = model.transition_dipole**2 * c.reshape(-1) ** 2
    w = initial_state_energy(model) - E.reshape(-1)
    if absorption:
        w = -w
    if grid is None:
        cp, cw = _core_lines(p, w, drop)
        grid = energy_grid(LineList(cw, cp, np.zeros((len(cw), 0))), sigma)
    grid = np.asarray(grid, dtype=float)
    # lines further than 40 sigma from the grid cannot contribute to it
    near = (w > grid[0] - 40.0 * sigma) & (w < grid[-1] + 40.0 * sigma)
    p, w = p[near], w[near]
    ref = 0.5 * (grid[0] + grid[-1])
    # keep every retained line inside the alias-free band 2 pi / dt
    band = max(w.max(), grid[-1]) - min(w.min(), grid[0]) + 16.0 * sigma
    dt = min(float(dt), 2.0 * np.pi / (1.05 * band))
    n_t = int(np.ceil(T / dt))
    t = np.arange(0, n_t + 1) * dt
    C = np.zeros(len(t), dtype=complex)
    for lo in range(0, len(w), 4096):
        C += np.exp(1j * np.outer(t, w[lo : lo + 4096] - ref)) @ p[lo : lo + 4096]
    win = np.exp(-0.5 * (sigma * t) ** 2)
    trap = np.full(len(t), dt)
    trap[0] *= 0.5
    trap[-1] *= 0.5
    # C(-t) = conj C(t): the integral over [-T, T] is twice the real part over [0, T]
    phase = np.exp(-1j * np.outer(grid - ref, t))
    I = 2.0 * np.real(phase @ (C * win * trap))
    return SpectrumGrid(grid, I * sigma / np.sqrt(2.0 * np.pi), float(sigma))


# ---------------------------------------------------------------------------
# truncated-basis sign tables


@dataclass(frozen=True)
class SignTable:
    configs: np.ndarray
    overlaps: np.ndarray

    @property
    def signs(self) -> np.ndarray:
        return np.where(self.overlaps < 0, -1, 1)

    @property
    def magnitudes(self) -> np.ndarray:
        return np.abs(self.overlaps)

    def as_dict(self) -> dict:
        return {tuple(int(x) for x in c): (int(s), float(m))
                for c, s, m in zip(self.configs, self.signs, self.magnitudes)}


def exact_sign_table(model: VibronicModel, window: int, n_basis=None) -> SignTable:
    """<phi_f^v | phi_i^0> for v_n < ``window`` by diagonalization in an omega_f product basis.

    ``n_basis`` defaults to ``window`` (the small-basis protocol); larger
    values converge toward the exact overlaps.  Each final eigenvector has its
    largest component positive and the global phase makes the ground-ground
    overlap positive.
    """
    _check_modes(model.n_modes, 4)
    nb = _basis_sizes(model, window if n_basis is None else n_basis)
    if min(nb) < window:
        raise ValueError("basis smaller than the quanta window")
    _, c = final_state_overlaps(model, nb)
    c = c[(slice(0, window),) * model.n_modes]
    if c.flat[0] < 0:
        c = -c
    configs = np.array(list(itertools.product(range(window), repeat=model.n_modes)), dtype=np.int64)
    return SignTable(configs, c.reshape(-1).copy())
