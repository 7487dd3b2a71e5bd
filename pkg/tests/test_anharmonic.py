import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hqcs.anharmonic import (HoBasisSpec, PotentialWindowWarning, UnsupportedPotentialForLadder, build_ho_dvr,
                             mode_hamiltonian, potential_matrix, solve_mode, solve_modes)
from hqcs.model import Harmonic, Morse, Polynomial

from helpers import CM, D_MORSE, W0, morse_model


def test_dvr_grid_symmetric():
    g = build_ho_dvr(HoBasisSpec(0.02, 31))
    np.testing.assert_allclose(g.points, -g.points[::-1], atol=1e-10)
    np.testing.assert_allclose(g.transform @ g.transform.T, np.eye(31), atol=1e-12)


def test_dvr_two_points():
    w = 0.03
    g = build_ho_dvr(HoBasisSpec(w, 2))
    np.testing.assert_allclose(g.points, [-1 / np.sqrt(2 * w), 1 / np.sqrt(2 * w)])


def test_quartic_moment():
    w = 0.7
    V = potential_matrix(Polynomial((0, 0, 0, 1.0)), HoBasisSpec(w, 10), path="ladder")
    assert V[0, 0] == pytest.approx(3 / (4 * w**2), rel=1e-13)


@pytest.mark.parametrize("path", ["ladder", "dvr"])
def test_harmonic_is_diagonal(path):
    w = 0.01
    H = mode_hamiltonian(Harmonic(w), HoBasisSpec(w, 20), path)
    if path == "ladder":
        np.testing.assert_allclose(H, np.diag((np.arange(20) + 0.5) * w), atol=1e-15)
    sol = solve_mode(Harmonic(w), HoBasisSpec(w, 20), 5, path)
    np.testing.assert_allclose(sol.energies, (np.arange(5) + 0.5) * w, rtol=1e-9)


def test_ho_ground_level_dvr():
    w = 0.02
    sol = solve_mode(Polynomial((0.0, 0.5 * w**2)), HoBasisSpec(w * 1.3, 40), 1, path="dvr")
    assert abs(sol.energies[0] - w / 2) < 1e-6 * w


def test_morse_levels_match_closed_form():
    m = Morse.from_frequency(D_MORSE, W0)
    sol = solve_mode(m, HoBasisSpec(W0, 100), 10)
    np.testing.assert_allclose(sol.energies, m.levels(np.arange(10)), atol=1e-6 * W0)


def test_morse_dvr_vs_polynomial_fit():
    m = Morse.from_frequency(D_MORSE, W0)
    # least-squares fit between the classical turning points of v = 15
    e = m.levels(15)
    lo = -np.log(1 + np.sqrt(e / D_MORSE)) / m.alpha
    hi = -np.log(1 - np.sqrt(e / D_MORSE)) / m.alpha
    x = np.linspace(lo, hi, 4000)
    coef = np.polynomial.Polynomial.fit(x, m(x), 12).convert().coef
    poly = Polynomial(tuple(coef[1:]))
    spec = HoBasisSpec(W0, 60)
    e_dvr = solve_mode(m, spec, 10, "dvr").energies
    e_poly = solve_mode(poly, spec, 10, "ladder").energies
    assert np.max(np.abs(e_dvr - e_poly)) < 1.0 * CM


def test_ladder_rejects_morse():
    with pytest.raises(UnsupportedPotentialForLadder):
        potential_matrix(Morse(1.0, 1.0), HoBasisSpec(1.0, 4), path="ladder")


def test_window_warning():
    with pytest.warns(PotentialWindowWarning):
        solve_mode(Morse.from_frequency(0.01, 0.01), HoBasisSpec(0.01, 12), 8)


def test_bad_n_states():
    with pytest.raises(ValueError):
        solve_mode(Harmonic(1.0), HoBasisSpec(1.0, 4), 5)


@pytest.mark.filterwarnings("ignore::hqcs.anharmonic.PotentialWindowWarning")
@settings(max_examples=20, deadline=None)
@given(st.floats(0.005, 0.02), st.floats(-0.05, 0.05), st.floats(0.0, 0.01))
def test_eigenvectors_orthonormal(w, g3, g4):
    pot = Polynomial((0.0, 0.5 * w**2, g3 * w**2.5, g4 * w**3))
    sol = solve_mode(pot, HoBasisSpec(w, 40), 40)
    X = sol.overlaps
    np.testing.assert_allclose(X.T @ X, np.eye(40), atol=1e-10)
    np.testing.assert_allclose(X @ X.T, np.eye(40), atol=1e-10)


def test_morse_overlap_columns_normalized():
    sols = solve_modes(morse_model(), [W0, W0 / 2], 60, 10)
    for sol in sols:
        np.testing.assert_allclose(np.sum(sol.overlaps**2, axis=0), 1.0, atol=1e-12)
        assert np.all(sol.overlaps[np.argmax(np.abs(sol.overlaps), axis=0), np.arange(10)] > 0)
