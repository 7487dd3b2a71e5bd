"""Dimensionless Duschinsky map and its SVD (Doktorov) parameterization."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SINGULAR_TOL = 1e-12


class SingularMap(ValueError):
    pass


@dataclass(frozen=True)
class DimensionlessMap:
    """R_m = A R_i + d with R = sqrt(omega) q."""

    A: np.ndarray
    d: np.ndarray


@dataclass(frozen=True)
class DoktorovParams:
    O_L: np.ndarray
    l: np.ndarray
    O_R: np.ndarray
    d: np.ndarray

    @property
    def squeezing(self) -> np.ndarray:
        """Single-mode squeezing parameters ln(l)."""
        return np.log(self.l)

    @property
    def displacement(self) -> np.ndarray:
        """Coherent displacement amplitudes d / sqrt(2)."""
        return self.d / np.sqrt(2.0)

    def reconstruct(self) -> np.ndarray:
        return self.O_L @ np.diag(self.l) @ self.O_R.T


def build_dimensionless(omega_i, omega_m, S, dq) -> DimensionlessMap:
    sqrt_m = np.sqrt(np.asarray(omega_m, dtype=float))
    A = sqrt_m[:, None] * np.asarray(S, dtype=float) / np.sqrt(np.asarray(omega_i, dtype=float))[None, :]
    d = sqrt_m * np.asarray(dq, dtype=float)
    return DimensionlessMap(A, d)


def decompose(dmap: DimensionlessMap) -> DoktorovParams:
    """SVD of A with a fixed gauge.

    Singular values come out in descending order.  Each column of ``O_L`` is
    flipped so its first non-negligible entry is positive; the matching column
    of ``O_R`` is flipped with it, so ``O_L diag(l) O_R^T`` is unchanged.
    """
    A = np.asarray(dmap.A, dtype=float)
    u, l, vt = np.linalg.svd(A)
    if l[-1] <= SINGULAR_TOL * l[0]:
        raise SingularMap(f"dimensionless Duschinsky map is singular (condition {l[0] / max(l[-1], 1e-300):.3e})")
    v = vt.T.copy()
    u = u.copy()
    for k in range(u.shape[1]):
        col = u[:, k]
        first = np.flatnonzero(np.abs(col) > 1e-12)[0]
        if col[first] < 0:
            u[:, k] *= -1
            v[:, k] *= -1
    return DoktorovParams(O_L=u, l=l, O_R=v, d=np.asarray(dmap.d, dtype=float).copy())
