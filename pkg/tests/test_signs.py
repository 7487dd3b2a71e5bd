import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hqcs.oracle import HarmonicPair, quadrature_overlap
from hqcs.signs import (OneModeOverlapParams, OverlapOverflow, SignConditionWarning, check_sign_conditions,
                        config_sign, one_mode_overlap_analytic, one_mode_overlaps, sign_rule_inapplicable_mass)



def _quad(bi, bm, dq, v):
    pair = HarmonicPair(np.array([bi]), np.array([bm]), np.eye(1), np.array([dq]))
    return quadrature_overlap(pair, (v,))


def test_identical_states():
    assert one_mode_overlap_analytic(OneModeOverlapParams(0.01, 0.01, 0.0, 0)) == pytest.approx(1.0, abs=1e-14)


def test_odd_vanishes_without_displacement():
    for v in (1, 3, 7):
        assert one_mode_overlap_analytic(OneModeOverlapParams(0.01, 0.03, 0.0, v)) == 0.0


@settings(max_examples=40, deadline=None)
@given(st.floats(0.002, 0.02), st.floats(0.002, 0.02), st.floats(-40.0, 40.0), st.integers(0, 12))
def test_matches_quadrature(bi, bm, dq, v):
    assert one_mode_overlap_analytic(OneModeOverlapParams(bi, bm, dq, v)) == pytest.approx(
        _quad(bi, bm, dq, v), abs=1e-9)


def test_log_space_branch_consistent():
    bi, bm, dq = 0.003, 0.004, 40.0
    vals = one_mode_overlaps(bi, bm, dq, 30)
    for v in (21, 25, 30):
        assert vals[v] == pytest.approx(_quad(bi, bm, dq, v), abs=1e-9)


def test_overflow_guard():
    with pytest.raises(OverlapOverflow):
        one_mode_overlap_analytic(OneModeOverlapParams(0.01, 0.01, 1.0, 171))


def test_bad_params():
    with pytest.raises(ValueError):
        OneModeOverlapParams(-1.0, 0.01, 0.0, 0)
    with pytest.raises(ValueError):
        OneModeOverlapParams(0.01, 0.01, 0.0, -1)


def test_config_sign_examples():
    assert config_sign([-1.0, 2.0], [1, 2]) == -1
    assert config_sign([1.0, 2.0], [3, 5]) == 1
    assert config_sign([0.0, -1.0], [3, 2]) == 1
    np.testing.assert_array_equal(config_sign([-1.0, -1.0], [[0, 0], [1, 0], [1, 1]]), [1, -1, 1])


@given(st.lists(st.floats(0.1, 5.0), min_size=1, max_size=5), st.data())
def test_config_sign_all_negative_is_parity(mags, data):
    v = data.draw(st.lists(st.integers(0, 9), min_size=len(mags), max_size=len(mags)))
    assert config_sign(-np.array(mags), v) == (-1) ** sum(v)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.002, 0.02), st.floats(1.0, 3.0), st.floats(1.0, 40.0), st.integers(0, 10))
def test_sign_rule_when_omega_m_above_omega_i(bi, ratio, mag, v):
    for dq in (mag, -mag):
        val = one_mode_overlap_analytic(OneModeOverlapParams(bi, bi * ratio, dq, v))
        if abs(val) > 1e-12:
            # the initial ground state is centred at +dq: its sign follows sgn(dq)^v
            assert np.sign(val) == config_sign([dq], [v])


def test_check_sign_conditions_warns():
    with pytest.warns(SignConditionWarning):
        flags = check_sign_conditions([2.0, 1.0], [1.0, 1.0])
    np.testing.assert_array_equal(flags, [True, False])


def test_inapplicable_mass():
    configs = np.array([[0, 0], [1, 0], [0, 1]])
    p = np.array([0.5, 0.3, 0.2])
    S = np.eye(2)
    assert sign_rule_inapplicable_mass(configs, p, [1.0, 2.0], [1.0, 1.0], S) == pytest.approx(0.2)
    assert sign_rule_inapplicable_mass(configs, p, [1.0, 1.0], [1.0, 1.0], S) == 0.0
