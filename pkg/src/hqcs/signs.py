"""Closed-form 1-D harmonic overlaps and the product sign rule."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

MAX_QUANTA = 170
LOG_SPACE_ABOVE = 20


class OverlapOverflow(OverflowError):
    pass


class SignConditionWarning(UserWarning):
    """omega_m < omega_i for a mode: the sign rule is only approximately valid."""


@dataclass(frozen=True)
class OneModeOverlapParams:
    beta_i: float
    beta_m: float
    dq: float
    v: int

    def __post_init__(self):
        if not (self.beta_i > 0 and self.beta_m > 0):
            raise ValueError("frequencies must be positive")
        if self.v < 0:
            raise ValueError("quantum number must be non-negative")


def _terms(beta_i, beta_m, dq, v):
    """(log|term|, sign) for each surviving l of Gamma * dq^l * C_l'."""
    s = beta_i + beta_m
    log_gamma = 0.5 * (math.lgamma(v + 1) - v * math.log(2.0) + math.log(2.0 * math.sqrt(beta_i * beta_m) / s))
    log_gamma -= beta_i * beta_m * dq**2 / (2.0 * s)
    ratio = (beta_m - beta_i) / s
    out = []
    for l in range(v % 2, v + 1, 2):
        k = (v - l) // 2
        if l > 0 and dq == 0.0:
            continue
        if k > 0 and ratio == 0.0:
            continue
        logt = log_gamma + 0.5 * l * math.log(beta_m) + l * math.log(2.0) - math.lgamma(l + 1)
        logt += l * math.log(beta_i / s) - math.lgamma(k + 1)
        sign = 1.0
        if l:
            logt += l * math.log(abs(dq))
            sign *= math.copysign(1.0, dq) ** l
        if k:
            logt += k * math.log(abs(ratio))
            sign *= math.copysign(1.0, ratio) ** k
        out.append((logt, sign))
    return out


def one_mode_overlap_analytic(params: OneModeOverlapParams) -> float:
    """<chi_i^0 | chi_m^v> for two displaced, distorted 1-D oscillators.

    ``chi_i^0`` is centred at ``q = dq`` in the coordinate of ``chi_m``.  The
    sum over ``l`` runs over ``l = v, v-2, ...``; at ``dq = 0`` only ``l = 0``
    survives.  Above ``v = 20`` the terms are combined in log space.
    """
    v = int(params.v)
    if v > MAX_QUANTA:
        raise OverlapOverflow(f"v = {v} exceeds the supported maximum of {MAX_QUANTA}")
    terms = _terms(float(params.beta_i), float(params.beta_m), float(params.dq), v)
    if not terms:
        return 0.0
    if v <= LOG_SPACE_ABOVE:
        return float(sum(sgn * math.exp(lt) for lt, sgn in terms))
    top = max(lt for lt, _ in terms)
    acc = sum(sgn * math.exp(lt - top) for lt, sgn in terms)
    return float(acc * math.exp(top))


def one_mode_overlaps(beta_i: float, beta_m: float, dq: float, vmax: int) -> np.ndarray:
    return np.array([one_mode_overlap_analytic(OneModeOverlapParams(beta_i, beta_m, dq, v))
                     for v in range(vmax + 1)])


def config_sign(dq, configs) -> np.ndarray:
    """prod_n sgn(dq_n)^{v_n}, with sgn(0) = +1.

    ``configs`` may be a single configuration or an (M, N) array; the result
    has the matching shape (scalar or length M).
    """
    neg = np.asarray(dq, dtype=float) < 0
    v = np.asarray(configs)
    odd = (v[..., neg].sum(axis=-1) % 2).astype(bool)
    out = np.where(odd, -1, 1)
    return int(out) if out.ndim == 0 else out


def check_sign_conditions(omega_i, omega_m, rtol: float = 0.0) -> np.ndarray:
    """Flag modes with omega_m < omega_i and warn about them."""
    omega_i = np.asarray(omega_i, dtype=float)
    omega_m = np.asarray(omega_m, dtype=float)
    loose = omega_m < omega_i * (1.0 - rtol)
    if np.any(loose):
        warnings.warn(
            f"omega_m < omega_i for modes {np.flatnonzero(loose).tolist()}; sign rule used in its looser form",
            SignConditionWarning,
            stacklevel=2,
        )
    return loose


def sign_rule_inapplicable_mass(configs, probabilities, omega_i, omega_m, S, mix_tol: float = 1e-8) -> float:
    """Probability mass on configurations the 1-D sign argument does not cover.

    A configuration is counted when it carries quanta in a mode whose
    intermediate frequency is below the initial one, or in a mode that the
    Duschinsky matrix mixes with others.
    """
    S = np.asarray(S, dtype=float)
    mixed = (np.sum(S**2, axis=1) - np.diag(S) ** 2) > mix_tol
    loose = np.asarray(omega_m) < np.asarray(omega_i)
    bad_mode = mixed | loose
    configs = np.asarray(configs)
    p = np.asarray(probabilities, dtype=float)
    hit = np.any((configs > 0) & bad_mode[None, :], axis=1)
    total = p.sum()
    return float(p[hit].sum() / total) if total > 0 else 0.0
