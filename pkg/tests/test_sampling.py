import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hqcs.anharmonic import HoBasisSpec, ModeSolution, solve_mode, solve_modes
from hqcs.focksim import AmplitudeTable, ConfigTable, FockBasis, sample
from hqcs.sampling import (CsConfig, PairSet, ZeroWeightRow, completeness, conditional_cdfs, sample_pairs,
                           transition_amplitudes, vm_coefficients)
from hqcs.model import Harmonic, intermediate_pes

from helpers import fock_table, harmonic_model, morse_model


def _identity_solutions(n_modes, n):
    return [ModeSolution(np.arange(n) + 0.5, np.eye(n), 1.0) for _ in range(n_modes)]


def _small_case(seed=0):
    model = harmonic_model([0.004, 0.006], [0.006, 0.008], np.eye(2), [6.0, -4.0])
    table, _ = fock_table(model, 6)
    configs = sample(table, 5000, seed=seed)
    sols = [solve_mode(Harmonic(0.0065), HoBasisSpec(0.006, 30), 10),
            solve_mode(Harmonic(0.0075), HoBasisSpec(0.008, 30), 10)]
    return model, table, configs, sols


def test_cs_config_validation():
    with pytest.raises(ValueError):
        CsConfig(0)
    with pytest.raises(ValueError):
        CsConfig(10, bias=0.5)
    with pytest.raises(ValueError):
        CsConfig(10, weight_mode="other")


def test_identity_overlaps_copy_vm():
    _, table, configs, _ = _small_case()
    pairs = sample_pairs(configs, _identity_solutions(2, 10), CsConfig(2000, seed=1), table)
    np.testing.assert_array_equal(pairs.vm, pairs.vf)


def test_single_loop_single_pair():
    _, table, configs, sols = _small_case()
    pairs = sample_pairs(configs, sols, CsConfig(1, seed=2), table)
    assert pairs.m_pair == 1 and pairs.total_visits == 1


def test_bias_broadens_vf():
    _, table, configs, sols = _small_case()
    narrow = sample_pairs(configs, sols, CsConfig(20_000, bias=1.0, seed=4), table)
    wide = sample_pairs(configs, sols, CsConfig(20_000, bias=4.0, seed=4), table)
    assert wide.m_f > narrow.m_f


def test_reproducible_and_nested():
    _, table, configs, sols = _small_case()
    big = sample_pairs(configs, sols, CsConfig(70_000, seed=9), table)
    again = sample_pairs(configs, sols, CsConfig(70_000, seed=9), table)
    np.testing.assert_array_equal(big.counts, again.counts)
    small = sample_pairs(configs, sols, CsConfig(1000, seed=9), table)
    keys_big = {(tuple(a), tuple(b)) for a, b in zip(big.vm, big.vf)}
    assert all((tuple(a), tuple(b)) in keys_big for a, b in zip(small.vm, small.vf))


def test_conditional_matches_overlap_squares():
    _, table, configs, sols = _small_case()
    one = ConfigTable(configs.basis, [configs.basis.index((2, 1))], [1], 1)
    pairs = sample_pairs(one, sols, CsConfig(100_000, seed=3), table)
    p_emp = np.zeros(10)
    for b, c in zip(pairs.vf, pairs.counts):
        p_emp[b[0]] += c
    p_emp /= p_emp.sum()
    row = sols[0].overlaps[2] ** 2
    np.testing.assert_allclose(p_emp, row / row.sum(), atol=0.01)


def test_zero_weight_row():
    sol = ModeSolution(np.arange(2) + 0.5, np.array([[1.0, 0.0], [0.0, 0.0]]), 1.0)
    with pytest.raises(ZeroWeightRow):
        conditional_cdfs([sol], [1], 1.0)


def test_empirical_weights_need_no_table():
    _, _, configs, sols = _small_case()
    pairs = sample_pairs(configs, sols, CsConfig(100, seed=1, weight_mode="empirical_counts"))
    assert pairs.total_visits == 100
    with pytest.raises(ValueError):
        sample_pairs(configs, sols, CsConfig(100, seed=1))


def test_pairset_io_roundtrip(tmp_path):
    ps = PairSet.from_draws(np.array([[0, 1], [0, 1], [2, 0]]), np.array([[1, 1], [1, 1], [0, 0]]))
    assert ps.m_pair == 2 and ps.total_visits == 3
    ps.write(tmp_path / "p.tsv")
    assert (tmp_path / "p.tsv").read_text().splitlines()[0] == "(0,1)\t(1,1)\t2"
    back = PairSet.read(tmp_path / "p.tsv")
    np.testing.assert_array_equal(back.counts, ps.counts)
    np.testing.assert_array_equal(back.vm, ps.vm)


def test_merge_adds_counts():
    a = PairSet.from_draws(np.array([[0]]), np.array([[1]]))
    b = PairSet.from_draws(np.array([[0], [1]]), np.array([[1], [1]]))
    m = a.merge(b)
    assert m.stats() == {"M_m": 2, "M_f": 1, "M_pair": 2}
    assert m.total_visits == 3


def test_completeness_full_support_is_one():
    model, table, _, sols = _small_case()
    full = ConfigTable.full_support(table)
    vf = np.array([(a, b) for a in range(10) for b in range(10)])
    pairs = PairSet.from_draws(np.zeros_like(vf), vf)
    c_norm = completeness(pairs, full, table, model.duschinsky.displacement, sols)
    c_raw = completeness(pairs, full, table, model.duschinsky.displacement, sols, normalize=False)
    assert c_norm <= 1 + 1e-12
    assert c_raw == pytest.approx(c_norm * table.total_probability, rel=1e-12)
    assert c_norm > 0.99


def test_vm_coefficients_signs():
    table = AmplitudeTable(FockBasis(1, 2), [0.8, -0.6, 0.0])
    ct = ConfigTable(table.basis, [0, 1], [1, 1], 2)
    np.testing.assert_allclose(vm_coefficients(ct, table, [-1.0]), [0.8, -0.6])
    np.testing.assert_allclose(vm_coefficients(ct, table, [1.0]), [0.8, 0.6])


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 3), st.integers(0, 1000))
def test_transition_amplitudes_chunking(n_modes, seed):
    rng = np.random.default_rng(seed)
    n = 4
    sols = []
    for _ in range(n_modes):
        q, _ = np.linalg.qr(rng.normal(size=(n, n)))
        sols.append(ModeSolution(np.arange(n) + 0.5, q, 1.0))
    vm = rng.integers(0, n, size=(9, n_modes))
    vf = rng.integers(0, n, size=(5, n_modes))
    c = rng.normal(size=9)
    np.testing.assert_allclose(transition_amplitudes(vm, c, vf, sols, chunk=2),
                               transition_amplitudes(vm, c, vf, sols, chunk=100), atol=1e-14)


def test_morse_pipeline_smoke():
    model = morse_model(np.pi / 4)
    table, _ = fock_table(model, 8)
    configs = sample(table, 20_000, seed=1)
    sols = solve_modes(model, intermediate_pes(model).frequencies, 60, 10)
    pairs = sample_pairs(configs, sols, CsConfig(20_000, seed=2), table)
    c = completeness(pairs, configs, table, model.duschinsky.displacement, sols)
    assert 0.5 < c <= 1.0
