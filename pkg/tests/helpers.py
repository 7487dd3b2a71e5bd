"""Model builders shared by the tests."""
import numpy as np

from hqcs import doktorov, focksim
from hqcs.model import (HARTREE_TO_CM1, HARTREE_TO_EV, DuschinskyMap, Harmonic, HarmonicPES, Morse,
                        VibronicModel, givens, make_rotation)
from hqcs.oracle import HarmonicPair

CM = 1.0 / HARTREE_TO_CM1
D_MORSE = 5.52 / HARTREE_TO_EV
W0 = 3868.0 * CM
DQ0 = np.sqrt(D_MORSE / 2.0) / W0

# one-mode benchmark taken from the pyridine mode-3 parameters
SI_OVERLAPS = [0.26833, 0.44824, 0.52237, 0.48707, 0.37953, 0.24482, 0.11396]
MODE3 = dict(omega_i=631.48 * CM, omega_m=613.41 * CM, dq=45.05618)

SIGN_BENCHMARKS = [(0.5, np.pi / 6), (0.5, np.pi / 4), (0.5, np.pi / 3), (0.2, np.pi / 2), (0.5, np.pi / 2),
                   (2.0, np.pi / 2)]


def harmonic_model(omega_i, omega_f, S=None, dq=None, e_ad=0.0, mu=1.0) -> VibronicModel:
    omega_i = np.atleast_1d(np.asarray(omega_i, dtype=float))
    omega_f = np.atleast_1d(np.asarray(omega_f, dtype=float))
    n = len(omega_i)
    S = np.eye(n) if S is None else np.asarray(S, dtype=float)
    dq = np.zeros(n) if dq is None else np.atleast_1d(np.asarray(dq, dtype=float))
    return VibronicModel(HarmonicPES(omega_i), tuple(Harmonic(float(w)) for w in omega_f), omega_f,
                         DuschinskyMap(S, dq), e_ad, mu)


def mode3_model() -> VibronicModel:
    return harmonic_model([MODE3["omega_i"]], [MODE3["omega_m"]], dq=[MODE3["dq"]])


def two_mode_benchmark(ratio: float, theta: float, sign: float = -1.0) -> VibronicModel:
    wf = np.array([W0, ratio * W0])
    return harmonic_model(wf / 5.0, wf, givens(2, 0, 1, theta), sign * DQ0 * np.ones(2))


def four_mode_benchmark() -> VibronicModel:
    wf = W0 / np.arange(1, 5)
    pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    S = make_rotation(4, [(p, np.pi / 4) for p in pairs])
    return harmonic_model(wf / 5.0, wf, S, DQ0 * np.array([1.0, -1.0, -1.0, -1.0]))


def morse_model(theta: float = 0.0) -> VibronicModel:
    wf = np.array([W0, W0 / 2])
    pots = tuple(Morse.from_frequency(D_MORSE, w) for w in wf)
    return VibronicModel(HarmonicPES(wf / 5.0), pots, wf, DuschinskyMap(givens(2, 0, 1, theta), DQ0 * np.ones(2)),
                         2.0 * D_MORSE, 1.0, "morse2")


def pair_of(model) -> HarmonicPair:
    return HarmonicPair.from_model(model)


def fock_table(model, cutoff, work_cutoff=None):
    pair = pair_of(model)
    params = doktorov.decompose(doktorov.build_dimensionless(pair.omega_i, pair.omega_m, pair.S, pair.dq))
    return focksim.doktorov_state(params, focksim.FockBasis(model.n_modes, cutoff), work_cutoff), params
