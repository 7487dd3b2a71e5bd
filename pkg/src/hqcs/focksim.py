"""Truncated Fock-space simulator for the Doktorov state.

The state of ``N`` modes with per-mode cutoff ``w`` is held as a real ndarray of
shape ``(w + 1,) * N`` (index order is lexicographic in the occupation numbers).
All operations used here are real: displacement amplitudes, squeezing
parameters and passive rotations are real, so the amplitudes stay real.

The vacuum-input state is built as ``D(d/sqrt 2) U(O_L) S(ln l) |0>``.  Its
amplitude on ``|v>`` is the overlap of the intermediate-surface eigenstate
``phi_m^v`` with the initial ground state ``phi_i^0``.  The right rotation
``O_R`` acts trivially on the vacuum and is therefore never applied.
"""
from __future__ import annotations

import struct
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .doktorov import DoktorovParams

MAX_AMPLITUDES = 2**27
WORK_BUDGET = 2**19
DENSE_BLOCK = 96
SAMPLE_CHUNK = 1 << 16


class CutoffOverflow(MemoryError):
    pass


class LogBranchFailure(ValueError):
    pass


class EmptyTable(ValueError):
    pass


class TruncationWarning(UserWarning):
    """A noticeable part of the state lies above the cutoff."""


# ---------------------------------------------------------------------------
# basis


@dataclass(frozen=True)
class FockBasis:
    n_modes: int
    cutoff: int

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValueError("need at least one mode")
        if self.cutoff < 1:
            raise ValueError(f"cutoff must be >= 1, got {self.cutoff}")
        if self.dim > MAX_AMPLITUDES:
            raise CutoffOverflow(
                f"{self.levels}^{self.n_modes} = {self.dim} amplitudes exceeds the limit of {MAX_AMPLITUDES}"
            )

    @property
    def levels(self) -> int:
        return self.cutoff + 1

    @property
    def shape(self) -> tuple:
        return (self.levels,) * self.n_modes

    @property
    def dim(self) -> int:
        return self.levels**self.n_modes

    def index(self, config) -> int:
        return int(np.ravel_multi_index(tuple(int(v) for v in config), self.shape))

    def config(self, index) -> tuple:
        return tuple(int(v) for v in np.unravel_index(int(index), self.shape))

    def configs(self, indices=None) -> np.ndarray:
        """Occupation numbers, one row per basis index (all of them by default)."""
        if indices is None:
            return _all_configs(self.n_modes, self.cutoff)
        return np.stack(np.unravel_index(np.asarray(indices), self.shape), axis=1)


@lru_cache(maxsize=8)
def _all_configs(n_modes: int, cutoff: int) -> np.ndarray:
    out = np.indices((cutoff + 1,) * n_modes).reshape(n_modes, -1).T.copy()
    out.setflags(write=False)
    return out


def photon_statistics(params: DoktorovParams) -> tuple:
    """Mean and standard deviation of the total quanta in D U S |0>.

    The passive rotation conserves total quanta, so the single-mode
    squeezed-coherent moments simply add.
    """
    r = np.abs(params.squeezing)
    a2 = params.displacement**2
    mean = np.sum(np.sinh(r) ** 2 + a2)
    # worst-case quadrature for the displacement term
    var = np.sum(a2 * np.exp(2 * r) + 2 * np.sinh(r) ** 2 * np.cosh(r) ** 2)
    return float(mean), float(np.sqrt(var))


def default_work_cutoff(n_modes: int, cutoff: int, budget: int = WORK_BUDGET,
                        params: DoktorovParams | None = None) -> int:
    """Per-mode working cutoff, reduced until the tensor fits ``budget``.

    The target is 3 cutoff + 3, raised to mean + 12 std + 10 of the total
    quanta when ``params`` are given, which makes the truncation at the edge
    negligible for strongly squeezed states.
    """
    w = 3 * cutoff + 3
    if params is not None:
        mean, std = photon_statistics(params)
        w = max(w, int(np.ceil(mean + 12 * std)) + 10)
    while w > cutoff and (w + 1) ** n_modes > budget:
        w -= 1
    return w


def vacuum(n_modes: int, cutoff: int) -> np.ndarray:
    FockBasis(n_modes, cutoff)
    psi = np.zeros((cutoff + 1,) * n_modes)
    psi[(0,) * n_modes] = 1.0
    return psi


# ---------------------------------------------------------------------------
# single-mode primitives


def _annihilation(levels: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1.0, levels)), 1)


def _padded_levels(cutoff: int) -> int:
    return 2 * cutoff + 3


@lru_cache(maxsize=256)
def displacement_matrix(alpha: float, cutoff: int) -> np.ndarray:
    """<m|exp(alpha a^+ - alpha a)|n> for m, n <= cutoff (built at 2 cutoff + 2)."""
    a = _annihilation(_padded_levels(cutoff))
    op = scipy.linalg.expm(alpha * (a.T - a))
    return op[: cutoff + 1, : cutoff + 1]


@lru_cache(maxsize=256)
def squeeze_matrix(lam: float, cutoff: int) -> np.ndarray:
    """<m|exp(lam/2 (a^+2 - a^2))|n> for m, n <= cutoff (built at 2 cutoff + 2)."""
    a = _annihilation(_padded_levels(cutoff))
    op = scipy.linalg.expm(0.5 * lam * (a.T @ a.T - a @ a))
    return op[: cutoff + 1, : cutoff + 1]


def _apply_single(state: np.ndarray, mode: int, op: np.ndarray) -> np.ndarray:
    out = np.tensordot(op, state, axes=([1], [mode]))
    return np.moveaxis(out, 0, mode)


def apply_displacement(state: np.ndarray, mode: int, alpha: float) -> np.ndarray:
    if alpha == 0:
        return state.copy()
    return _apply_single(state, mode, displacement_matrix(float(alpha), state.shape[mode] - 1))


def apply_squeeze(state: np.ndarray, mode: int, lam: float) -> np.ndarray:
    if lam == 0:
        return state.copy()
    return _apply_single(state, mode, squeeze_matrix(float(lam), state.shape[mode] - 1))


# ---------------------------------------------------------------------------
# passive rotation


def real_log_orthogonal(O: np.ndarray):
    """Real antisymmetric generator of an orthogonal matrix.

    Returns ``(Lam, reflect)``.  When ``det O = -1`` no real logarithm exists;
    then ``reflect`` is True and ``expm(Lam) = O @ diag(-1, 1, ..., 1)``.
    Pairs of -1 eigenvalues are folded into rotations by pi.
    """
    O = np.asarray(O, dtype=float)
    n = O.shape[0]
    reflect = np.linalg.det(O) < 0
    target = O.copy()
    if reflect:
        target[:, 0] *= -1
    T, Z = scipy.linalg.schur(target, output="real")
    L = np.zeros((n, n))
    minus = []
    i = 0
    while i < n:
        if i + 1 < n and abs(T[i + 1, i]) > 1e-12:
            theta = np.arctan2(T[i + 1, i], T[i, i])
            L[i + 1, i] = theta
            L[i, i + 1] = -theta
            i += 2
        else:
            if T[i, i] < 0:
                minus.append(i)
            i += 1
    if len(minus) % 2:
        raise LogBranchFailure("odd number of -1 eigenvalues in a proper rotation")
    for p, q in zip(minus[0::2], minus[1::2]):
        L[q, p] = np.pi
        L[p, q] = -np.pi
    Lam = Z @ L @ Z.T
    Lam = 0.5 * (Lam - Lam.T)
    if np.max(np.abs(scipy.linalg.expm(Lam) - target)) > 1e-9:
        raise LogBranchFailure("real logarithm of the rotation did not reproduce it")
    return Lam, bool(reflect)


@lru_cache(maxsize=8)
def _block_layout(n_modes: int, cutoff: int):
    configs = _all_configs(n_modes, cutoff)
    totals = configs.sum(axis=1)
    perm = np.argsort(totals, kind="stable")
    bounds = np.searchsorted(totals[perm], np.arange(totals.max() + 2))
    return perm, bounds


def rotation_generator(Lam: np.ndarray, n_modes: int, cutoff: int) -> sp.csr_matrix:
    """Sparse matrix of sum_jk Lam_jk a_j^+ a_k on the truncated product basis."""
    configs = _all_configs(n_modes, cutoff)
    dim = len(configs)
    strides = (cutoff + 1) ** np.arange(n_modes - 1, -1, -1)
    rows, cols, vals = [], [], []
    for j in range(n_modes):
        for k in range(n_modes):
            if j == k or Lam[j, k] == 0.0:
                continue
            src = np.flatnonzero((configs[:, k] > 0) & (configs[:, j] < cutoff))
            rows.append(src + strides[j] - strides[k])
            cols.append(src)
            vals.append(Lam[j, k] * np.sqrt(configs[src, k] * (configs[src, j] + 1.0)))
    if not rows:
        return sp.csr_matrix((dim, dim))
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
    )


def apply_rotation(state: np.ndarray, O) -> np.ndarray:
    """Apply the passive unitary U(O) with U a_k^+ U^+ = sum_j O_jk a_j^+.

    The generator conserves total quanta, so the exponential is applied one
    total-quanta sector at a time (sectors are independent and could run in
    parallel).  Sectors above the per-mode cutoff are truncated.
    """
    O = np.asarray(O, dtype=float)
    n_modes = state.ndim
    cutoff = state.shape[0] - 1
    if O.shape != (n_modes, n_modes):
        raise ValueError(f"rotation has shape {O.shape}, state has {n_modes} modes")
    if np.max(np.abs(O.T @ O - np.eye(n_modes))) > 1e-10:
        raise ValueError("rotation matrix is not orthogonal")
    if np.allclose(O, np.eye(n_modes), atol=1e-15, rtol=0):
        return state.copy()
    Lam, reflect = real_log_orthogonal(O)
    psi = state.copy()
    if reflect:
        parity = (-1.0) ** np.arange(cutoff + 1)
        psi *= parity.reshape((-1,) + (1,) * (n_modes - 1))
    if np.max(np.abs(Lam)) < 1e-15:
        return psi

    perm, bounds = _block_layout(n_modes, cutoff)
    G = rotation_generator(Lam, n_modes, cutoff)[perm][:, perm].tocsr()
    flat = psi.reshape(-1)[perm]
    out = np.empty_like(flat)
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if hi - lo == 0:
            continue
        x = flat[lo:hi]
        if hi - lo == 1 or not np.any(x):
            out[lo:hi] = x
            continue
        block = G[lo:hi, lo:hi]
        if hi - lo <= DENSE_BLOCK:
            out[lo:hi] = scipy.linalg.expm(block.toarray()) @ x
        else:
            out[lo:hi] = expm_multiply(block.tocsc(), x)
    result = np.empty_like(out)
    result[perm] = out
    return result.reshape(state.shape)


# ---------------------------------------------------------------------------
# tables


@dataclass(frozen=True)
class AmplitudeTable:
    """Amplitudes <phi_m^v | phi_i^0> on a truncated basis (flat, lexicographic)."""

    basis: FockBasis
    amplitudes: np.ndarray
    work_cutoff: int = -1

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=float).reshape(-1).copy()
        if amps.size != self.basis.dim:
            raise ValueError(f"{amps.size} amplitudes for a basis of dimension {self.basis.dim}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def probabilities(self) -> np.ndarray:
        return self.amplitudes**2

    @property
    def total_probability(self) -> float:
        return float(np.sum(self.probabilities))

    def amplitude(self, config) -> float:
        return float(self.amplitudes[self.basis.index(config)])

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.basis.shape)

    def dump(self, path, threshold: float = 0.0) -> None:
        """Little-endian binary: header (N, d_max, count) then (index, amplitude) records."""
        idx = np.flatnonzero(np.abs(self.amplitudes) > threshold)
        rec = np.empty(len(idx), dtype=[("index", "<u8"), ("amplitude", "<f8")])
        rec["index"] = idx
        rec["amplitude"] = self.amplitudes[idx]
        with open(path, "wb") as fh:
            fh.write(struct.pack("<QQQ", self.basis.n_modes, self.basis.cutoff, len(idx)))
            fh.write(rec.tobytes())

    @classmethod
    def load(cls, path) -> "AmplitudeTable":
        with open(path, "rb") as fh:
            n_modes, cutoff, count = struct.unpack("<QQQ", fh.read(24))
            rec = np.frombuffer(fh.read(16 * count), dtype=[("index", "<u8"), ("amplitude", "<f8")])
        basis = FockBasis(int(n_modes), int(cutoff))
        amps = np.zeros(basis.dim)
        amps[rec["index"].astype(np.int64)] = rec["amplitude"]
        return cls(basis, amps)


def norm_deficit(table: AmplitudeTable, warn_above: float | None = 0.01) -> float:
    """1 - sum P(v) over the truncated table, clipped to [0, 1]."""
    deficit = float(min(1.0, max(0.0, 1.0 - table.total_probability)))
    if warn_above is not None and deficit > warn_above:
        warnings.warn(f"cutoff {table.basis.cutoff} misses {deficit:.3g} of the probability",
                      TruncationWarning, stacklevel=2)
    return deficit


def doktorov_state(params: DoktorovParams, basis: FockBasis, work_cutoff: int | None = None) -> AmplitudeTable:
    """Amplitudes of the initial ground state in the intermediate Fock basis.

    The state is propagated on a padded working basis (``work_cutoff`` levels
    per mode, see :func:`default_work_cutoff`) and projected onto ``basis``
    at the end.
    """
    n = basis.n_modes
    if len(params.l) != n:
        raise ValueError(f"parameters describe {len(params.l)} modes, basis has {n}")
    w = default_work_cutoff(n, basis.cutoff, params=params) if work_cutoff is None else max(int(work_cutoff), basis.cutoff)
    psi = vacuum(n, w)
    for mode, lam in enumerate(params.squeezing):
        psi = apply_squeeze(psi, mode, lam)
    psi = apply_rotation(psi, params.O_L)
    for mode, alpha in enumerate(params.displacement):
        psi = apply_displacement(psi, mode, alpha)
    psi = psi[(slice(0, basis.levels),) * n]
    return AmplitudeTable(basis, psi.reshape(-1), work_cutoff=w)


@dataclass(frozen=True)
class ConfigTable:
    """Histogram of boson-sampling draws."""

    basis: FockBasis
    indices: np.ndarray
    counts: np.ndarray
    n_draws: int
    seed: int | None = None
    configs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "indices", np.asarray(self.indices, dtype=np.int64))
        object.__setattr__(self, "counts", np.asarray(self.counts, dtype=np.int64))
        object.__setattr__(self, "configs", self.basis.configs(self.indices))
        if int(self.counts.sum()) != int(self.n_draws):
            raise ValueError("counts do not add up to the number of draws")

    def __len__(self) -> int:
        return len(self.indices)

    def as_dict(self) -> dict:
        return {tuple(int(x) for x in c): int(n) for c, n in zip(self.configs, self.counts)}

    @classmethod
    def full_support(cls, table: AmplitudeTable, threshold: float = 0.0) -> "ConfigTable":
        """Every configuration with probability above ``threshold``, one count each."""
        idx = np.flatnonzero(table.probabilities > threshold)
        return cls(table.basis, idx, np.ones(len(idx), dtype=np.int64), len(idx))


def spawn_generators(seed, n_streams: int) -> list:
    """Independent generators for ``n_streams`` fixed chunks of work.

    Streams are tied to chunk number, not to worker, so results do not depend
    on how many workers process the chunks.
    """
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_streams)]


def sample(table: AmplitudeTable, n_draws: int, seed=None, workers: int = 1,
           chunk_size: int = SAMPLE_CHUNK) -> ConfigTable:
    """Draw ``n_draws`` configurations from P(v) / sum P over the truncated table."""
    if n_draws < 1:
        raise ValueError("need at least one draw")
    p = table.probabilities
    z = p.sum()
    if not z > 0:
        raise EmptyTable("amplitude table carries no probability")
    p = p / z
    n_chunks = -(-n_draws // chunk_size)
    rngs = spawn_generators(seed, n_chunks)
    sizes = [min(chunk_size, n_draws - k * chunk_size) for k in range(n_chunks)]

    def draw(k):
        return rngs[k].multinomial(sizes[k], p)

    if workers > 1 and n_chunks > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(draw, range(n_chunks)))
    else:
        parts = [draw(k) for k in range(n_chunks)]
    counts = np.sum(parts, axis=0)
    nz = np.flatnonzero(counts)
    return ConfigTable(table.basis, nz, counts[nz], n_draws, seed)
