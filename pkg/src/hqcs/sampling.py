"""Classical sampling of (v_m, v_f) pairs and the completeness metric."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .focksim import AmplitudeTable, ConfigTable, spawn_generators
from .signs import config_sign

WEIGHT_MODES = ("exact_probability", "empirical_counts")
LOOP_CHUNK = 1 << 16


class ZeroWeightRow(ValueError):
    pass


@dataclass(frozen=True)
class CsConfig:
    n_loops: int
    bias: float = 1.0
    seed: int | None = None
    weight_mode: str = "exact_probability"

    def __post_init__(self):
        if self.n_loops < 1:
            raise ValueError("need at least one sampling loop")
        if not self.bias >= 1.0:
            raise ValueError(f"bias k must be >= 1, got {self.bias}")
        if self.weight_mode not in WEIGHT_MODES:
            raise ValueError(f"weight_mode must be one of {WEIGHT_MODES}")


@dataclass(frozen=True)
class PairSet:
    """Distinct (v_m, v_f) pairs with visit counts, sorted lexicographically."""

    vm: np.ndarray
    vf: np.ndarray
    counts: np.ndarray

    @classmethod
    def from_draws(cls, vm: np.ndarray, vf: np.ndarray, weights=None) -> "PairSet":
        vm = np.asarray(vm, dtype=np.int64)
        vf = np.asarray(vf, dtype=np.int64)
        n = vm.shape[1]
        if len(vm) == 0:
            return cls(vm.reshape(0, n), vf.reshape(0, n), np.zeros(0, dtype=np.int64))
        keys, inverse = np.unique(np.hstack([vm, vf]), axis=0, return_inverse=True)
        w = np.ones(len(vm), dtype=np.int64) if weights is None else np.asarray(weights, dtype=np.int64)
        counts = np.bincount(inverse.reshape(-1), weights=w, minlength=len(keys)).astype(np.int64)
        return cls(keys[:, :n], keys[:, n:], counts)

    @property
    def n_modes(self) -> int:
        return self.vm.shape[1]

    @property
    def m_pair(self) -> int:
        return len(self.counts)

    @property
    def distinct_vm(self) -> np.ndarray:
        return np.unique(self.vm, axis=0)

    @property
    def distinct_vf(self) -> np.ndarray:
        return np.unique(self.vf, axis=0)

    @property
    def m_m(self) -> int:
        return len(self.distinct_vm)

    @property
    def m_f(self) -> int:
        return len(self.distinct_vf)

    @property
    def total_visits(self) -> int:
        return int(self.counts.sum())

    def merge(self, other: "PairSet") -> "PairSet":
        return PairSet.from_draws(np.vstack([self.vm, other.vm]), np.vstack([self.vf, other.vf]),
                                  np.concatenate([self.counts, other.counts]))

    def stats(self) -> dict:
        return {"M_m": self.m_m, "M_f": self.m_f, "M_pair": self.m_pair}

    def write(self, path) -> None:
        with open(path, "w") as fh:
            for a, b, c in zip(self.vm, self.vf, self.counts):
                fh.write(f"{_fmt(a)}\t{_fmt(b)}\t{int(c)}\n")

    @classmethod
    def read(cls, path) -> "PairSet":
        vm, vf, counts = [], [], []
        with open(path) as fh:
            for line in fh:
                if not line.strip():
                    continue
                a, b, c = line.rstrip("\n").split("\t")
                vm.append(_parse(a))
                vf.append(_parse(b))
                counts.append(int(c))
        return cls.from_draws(np.array(vm), np.array(vf), counts)


def _fmt(v) -> str:
    return "(" + ",".join(str(int(x)) for x in v) + ")"


def _parse(s: str) -> list:
    return [int(x) for x in s.strip().strip("()").split(",") if x.strip()]


def conditional_cdfs(solutions, vmax, bias: float) -> list:
    """Per-mode cumulative P(v_f | v_m) proportional to |<chi_m|chi_f>|^(2/k)."""
    out = []
    for n, sol in enumerate(solutions):
        rows = np.abs(sol.overlaps[: vmax[n] + 1]) ** (2.0 / bias)
        norm = rows.sum(axis=1)
        if np.any(norm <= 0):
            bad = int(np.flatnonzero(norm <= 0)[0])
            raise ZeroWeightRow(f"mode {n}: overlap row for v_m={bad} is all zero")
        cdf = np.cumsum(rows / norm[:, None], axis=1)
        cdf[:, -1] = 1.0
        out.append(cdf)
    return out


def vm_weights(configs: ConfigTable, table: AmplitudeTable | None, weight_mode: str) -> np.ndarray:
    if weight_mode == "empirical_counts":
        w = configs.counts.astype(float)
    elif weight_mode == "exact_probability":
        if table is None:
            raise ValueError("exact_probability weighting needs the amplitude table")
        w = table.probabilities[configs.indices]
    else:
        raise ValueError(f"unknown weight mode {weight_mode!r}")
    total = w.sum()
    if not total > 0:
        raise ValueError("v_m weights carry no probability")
    return w / total


def sample_pairs(configs: ConfigTable, solutions, cs: CsConfig, table: AmplitudeTable | None = None) -> PairSet:
    """Run ``cs.n_loops`` loops: draw v_m, then each v_f,n given v_m,n.

    Loops are split into fixed chunks with one RNG stream per chunk, so the
    result depends only on ``cs.seed``, and the first L loops of a longer run
    are exactly the loops of a run with ``n_loops = L``.
    """
    if len(configs) == 0:
        raise ValueError("empty configuration table")
    n_modes = configs.configs.shape[1]
    if len(solutions) != n_modes:
        raise ValueError(f"{len(solutions)} mode solutions for {n_modes} modes")
    vmax = configs.configs.max(axis=0)
    for n, sol in enumerate(solutions):
        if vmax[n] >= sol.n_basis:
            raise ValueError(f"mode {n}: v_m={vmax[n]} outside the primitive basis")
    p = vm_weights(configs, table, cs.weight_mode)
    cdfs = conditional_cdfs(solutions, vmax, cs.bias)
    cdf_m = np.cumsum(p)
    cdf_m[-1] = 1.0

    n_chunks = -(-cs.n_loops // LOOP_CHUNK)
    rngs = spawn_generators(cs.seed, n_chunks)
    result = None
    for k, rng in enumerate(rngs):
        size = min(LOOP_CHUNK, cs.n_loops - k * LOOP_CHUNK)
        # one row of uniforms per loop: runs with fewer loops are prefixes of longer ones
        u = rng.random((size, n_modes + 1))
        pick = np.minimum(np.searchsorted(cdf_m, u[:, 0], side="right"), len(p) - 1)
        vm = configs.configs[pick]
        vf = np.empty_like(vm)
        for n in range(n_modes):
            rows = cdfs[n][vm[:, n]]
            vf[:, n] = np.minimum((rows <= u[:, n + 1 : n + 2]).sum(axis=1), rows.shape[1] - 1)
        part = PairSet.from_draws(vm, vf)
        result = part if result is None else result.merge(part)
    return result


def vm_coefficients(configs: ConfigTable, table: AmplitudeTable, dq, normalize: bool = True) -> np.ndarray:
    """Signed amplitudes sgn(v_m) sqrt(P(v_m)) on the sampled support.

    With ``normalize`` the probabilities are divided by the total over the
    truncated table, i.e. the distribution the sampler actually draws from.
    """
    p = table.probabilities[configs.indices]
    if normalize:
        p = p / table.total_probability
    return config_sign(dq, configs.configs) * np.sqrt(p)


def overlap_product(vm: np.ndarray, vf: np.ndarray, solutions) -> np.ndarray:
    """prod_n <chi_m^{v_m,n}|chi_f^{v_f,n}> for every (row of vm, row of vf)."""
    W = np.ones((len(vm), len(vf)))
    for n, sol in enumerate(solutions):
        W *= sol.overlaps[np.ix_(vm[:, n], vf[:, n])]
    return W


def transition_amplitudes(vm: np.ndarray, coeffs: np.ndarray, vf: np.ndarray, solutions,
                          chunk: int = 4096) -> np.ndarray:
    """A(v_f) = sum_m coeffs[m] prod_n Omega_n[v_m,n, v_f,n], summed in chunks over v_m."""
    A = np.zeros(len(vf))
    for lo in range(0, len(vm), chunk):
        A += coeffs[lo : lo + chunk] @ overlap_product(vm[lo : lo + chunk], vf, solutions)
    return A


def pair_amplitudes(pairs: PairSet, configs: ConfigTable, coeffs: np.ndarray, solutions):
    """A(v_f) restricted to the sampled pairs (each distinct pair counted once)."""
    lookup = {tuple(c): i for i, c in enumerate(configs.configs.tolist())}
    vf, inverse = np.unique(pairs.vf, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    A = np.zeros(len(vf))
    for row, (a, b) in enumerate(zip(pairs.vm, pairs.vf)):
        m = lookup.get(tuple(a.tolist()))
        if m is None:
            continue
        term = coeffs[m]
        for n, sol in enumerate(solutions):
            term *= sol.overlaps[a[n], b[n]]
        A[inverse[row]] += term
    return vf, A


def completeness(pairs: PairSet, configs: ConfigTable, table: AmplitudeTable, dq, solutions,
                 normalize: bool = True) -> float:
    """sum over sampled v_f of |sum over the full v_m support of <i|m><m|f>|^2.

    By default the amplitudes are renormalized over the truncated table, so
    the metric measures coverage of what the sampler can deliver and tends to
    1; ``normalize=False`` uses the raw overlaps, bounded by 1 - norm deficit.
    """
    if pairs.m_pair == 0:
        raise ValueError("empty pair set")
    coeffs = vm_coefficients(configs, table, dq, normalize)
    A = transition_amplitudes(configs.configs, coeffs, pairs.distinct_vf, solutions)
    return float(np.sum(A**2))
