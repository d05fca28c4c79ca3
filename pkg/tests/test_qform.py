import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from cpnflow.qform import (
    QFormMatrix,
    SymTensor3,
    _q_matrix_a,
    assemble_Q,
    assemble_Qtilde,
    block_decomposition_at_one,
    canonical_triples,
    delta_box,
    lambda0,
    min_eig_ratio,
    multiplicities,
    n_coords,
    norm_matrix,
    ordered_sum_matrix,
    pair_count,
)
from cpnflow.sympl_core import SingularSpectrum

GOLDEN_LAMBDA0_N3 = 1.8498822792898864
SQ5 = 3 - math.sqrt(5)


def test_coordinate_counts():
    for n, m in [(1, 4), (2, 20), (3, 56)]:
        assert n_coords(n) == m == len(canonical_triples(n))
    assert set(multiplicities(2)) == {1.0, 3.0, 6.0}


def test_tensor_round_trip():
    rng = np.random.default_rng(0)
    h = SymTensor3(2, rng.standard_normal(20))
    np.testing.assert_array_equal(SymTensor3.from_full(h.full()).coeffs, h.coeffs)
    with pytest.raises(ValueError):
        SymTensor3.from_full(rng.standard_normal((4, 4, 4)))


def test_hand_values_n1():
    Q = assemble_Q(SingularSpectrum.ones(1))
    assert Q(SymTensor3.from_components(1, {(0, 0, 0): 1.0})) == pytest.approx(1.0)
    assert Q(SymTensor3.from_components(1, {(0, 1, 1): 1.0})) == pytest.approx(5.0)


def test_n1_independent_of_lambda():
    base = assemble_Q(SingularSpectrum.ones(1)).mat
    for a in (1.5, 3.0, 40.0):
        np.testing.assert_array_equal(assemble_Q(SingularSpectrum([a, 1 / a])).mat, base)


def test_qform_matrix_rejects_asymmetric():
    M = np.zeros((4, 4))
    M[0, 1] = 1.0
    with pytest.raises(ValueError):
        QFormMatrix(1, M)


def test_qtilde_equals_q_at_one():
    for n in (1, 2, 3):
        sp = SingularSpectrum.ones(n)
        np.testing.assert_array_equal(assemble_Qtilde(sp).mat, assemble_Q(sp).mat)


def test_qtilde_hand_value_n1():
    # symmetric component {1, 1, 2} (1-based) set to 1; of its ordered placements only
    # h_121 has the (i, i', k) pattern, so the added square is (2 - 0.5)^2 exactly once
    sp = SingularSpectrum([2.0, 0.5])
    h = SymTensor3.from_components(1, {(0, 0, 1): 1.0})
    diff = assemble_Qtilde(sp)(h) - assemble_Q(sp)(h)
    H = h.full()
    assert diff == pytest.approx(oracles.gradient_term(H, sp.lam), abs=1e-14)
    assert diff == pytest.approx((2 - 0.5) ** 2, abs=1e-14)


@pytest.mark.parametrize("n", [1, 2])
def test_brute_force_oracle(n):
    rng = np.random.default_rng(100 + n)
    for _ in range(25):
        lam = oracles.canonical_lam(oracles.random_pinched_lams(rng, n, 9.0, 1)[0])
        sp = SingularSpectrum(lam)
        v = rng.standard_normal(n_coords(n))
        H = oracles.full_tensor(n, v)
        ref = oracles.q_evolution(H, lam)
        assert abs(assemble_Q(sp)(v) - ref) <= 1e-12 * max(1.0, abs(ref))
        assert abs(assemble_Q(sp, route="grouped")(v) - oracles.q_grouped(H, lam)) <= 1e-12 * max(1.0, abs(ref))
        ref_t = ref + oracles.gradient_term(H, lam)
        assert abs(assemble_Qtilde(sp)(v) - ref_t) <= 1e-12 * max(1.0, abs(ref_t))
        assert norm_matrix(n)(v) == pytest.approx(oracles.canonical_norm(H), rel=1e-13)
        assert ordered_sum_matrix(n)(v) == pytest.approx(float((H**2).sum()), rel=1e-13)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 3), seed=st.integers(0, 2**31 - 1))
def test_routes_agree(n, seed):
    rng = np.random.default_rng(seed)
    sp = SingularSpectrum.from_log(rng.uniform(-1.5, 1.5, n))
    v = rng.standard_normal(n_coords(n))
    a = assemble_Q(sp)(v)
    b = assemble_Q(sp, route="grouped")(v)
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a))
    assert assemble_Qtilde(sp)(v) >= a - 1e-12 * max(1.0, abs(a))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_blocks_reconstruct(n):
    blocks = block_decomposition_at_one(n)
    total = sum(b.mat for b in blocks)
    np.testing.assert_allclose(total, assemble_Q(SingularSpectrum.ones(n)).mat, atol=1e-12, rtol=0)
    pc = pair_count(n)
    for r, b in enumerate(blocks):
        outside = pc != r + 1
        assert not b.mat[outside].any() and not b.mat[:, outside].any()


def test_block_n1_structure():
    b1, b2, b3 = block_decomposition_at_one(1)
    assert not b2.mat.any() and not b3.mat.any()
    # (h111, h122) and (h222, h112) in canonical order 111, 112, 122, 222
    np.testing.assert_allclose(b1.mat[np.ix_([0, 2], [0, 2])], [[1, -1], [-1, 5]])
    np.testing.assert_allclose(b1.mat[np.ix_([3, 1], [3, 1])], [[1, -1], [-1, 5]])
    np.testing.assert_allclose(np.linalg.eigvalsh([[1, -1], [-1, 5]]), [3 - math.sqrt(5), 3 + math.sqrt(5)])


@pytest.mark.parametrize("n,block,expected", [(1, 0, SQ5), (2, 1, 2.0), (3, 2, 4.0)])
def test_block_smallest_eigenvalues(n, block, expected):
    b = block_decomposition_at_one(n)[block]
    sel = pair_count(n) == block + 1
    assert np.linalg.eigvalsh(b.mat[np.ix_(sel, sel)])[0] == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_min_eig_ratio_at_one(n):
    assert min_eig_ratio(assemble_Q(SingularSpectrum.ones(n)), norm_matrix(n)) == pytest.approx(SQ5, abs=1e-9)


def test_min_eig_ratio_identity_and_errors():
    N = norm_matrix(2)
    assert min_eig_ratio(N, N) == pytest.approx(1.0)
    bad = QFormMatrix(2, -np.eye(20))
    with pytest.raises(ValueError):
        min_eig_ratio(N, bad)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_norm_bounds(n):
    N, O = norm_matrix(n).mat, ordered_sum_matrix(n).mat
    assert np.linalg.eigvalsh(N - O / 6).min() >= -1e-14
    assert np.linalg.eigvalsh(O - N).min() >= -1e-14


@pytest.mark.parametrize("n", [1, 2, 3])
def test_delta_at_one(n):
    d = delta_box(n, 1.0).delta
    assert d >= SQ5 / 6 - 1e-12
    assert d > 0


def test_delta_n1_independent_of_Lambda():
    vals = [delta_box(1, L).delta for L in (1.0, 2.0, 16.0, 1e3)]
    assert max(vals) - min(vals) <= 1e-14 and vals[0] > 0


def test_delta_brackets_lambda0_n2():
    L0 = oracles.LAMBDA0_N2
    assert delta_box(2, L0 - 1e-3).delta > 0
    assert delta_box(2, L0 + 1e-3).delta < 0


@pytest.mark.parametrize("n", [2, 3])
def test_delta_nonincreasing_ladder(n):
    ladder = np.arange(1.0, 3.01, 0.2)
    vals = [delta_box(n, L, grid_steps=17).delta for L in ladder]
    assert np.all(np.diff(vals) <= 1e-12)


def test_symmetry_reduction_matches_full_grid():
    for n, L in [(2, 1.7), (2, 2.5), (3, 1.6)]:
        full = delta_box(n, L, grid_steps=9, reduce=False, refine=False)
        red = delta_box(n, L, grid_steps=9, reduce=True, refine=False)
        assert red.delta == pytest.approx(full.delta, abs=1e-13)


def test_sign_flip_and_pair_swap_are_symmetries():
    rng = np.random.default_rng(3)
    w = np.sqrt(1.0 / multiplicities(3))
    for _ in range(5):
        t = rng.uniform(-1, 1, 3)
        ref = None
        for tt in (t, t * [-1, 1, 1], t[[2, 0, 1]], -t):
            lam = np.empty(6)
            lam[0::2], lam[1::2] = np.exp(tt), np.exp(-tt)
            e = np.linalg.eigvalsh(_q_matrix_a(3, lam) * w[:, None] * w[None, :])
            ref = e if ref is None else ref
            np.testing.assert_allclose(e, ref, atol=1e-12)


def test_metric_box_is_square_of_singular_box():
    a = delta_box(2, 1.8, box="singular").delta
    b = delta_box(2, 1.8**2, box="metric").delta
    assert a == pytest.approx(b, abs=1e-12)
    with pytest.raises(ValueError):
        delta_box(2, 2.0, box="other")


def test_delta_rejects_small_Lambda():
    with pytest.raises(ValueError):
        delta_box(2, 0.9)


def test_lambda0_n1_exceeds_cap():
    for cap in (4.0, 16.0):
        r = lambda0(1, cap=cap)
        assert r.exceeds_cap and r.to_record()["lambda0"] == "exceeds cap"


def test_lambda0_n2():
    r = lambda0(2)
    assert abs(r.lambda0 - oracles.LAMBDA0_N2) <= 1e-3
    assert r.bracket[0] <= oracles.LAMBDA0_N2 <= r.bracket[1] + 1e-12


def test_lambda0_n3_golden():
    r = lambda0(3, tol=1e-7, grid_steps=17)
    assert r.lambda0 == pytest.approx(GOLDEN_LAMBDA0_N3, abs=1e-6)
    assert 1.0 < r.lambda0 <= oracles.LAMBDA0_N2


def test_lambda0_validation():
    with pytest.raises(ValueError):
        lambda0(2, tol=0.0)
    with pytest.raises(ValueError):
        lambda0(2, cap=1.0)
