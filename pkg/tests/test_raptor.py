import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cvqkd_rateopt.protograph import default_protograph_path, load_protograph, parse_protograph
from cvqkd_rateopt.raptor import (
    ConstructionError,
    RateRangeError,
    encode,
    extend_to_rate,
    lift,
    view_from_parity_check,
)

DESK_RATES = [0.2, 0.1, 0.05, 0.02, 0.01]


@pytest.fixture(scope="module")
def desk_code():
    return lift(load_protograph(default_protograph_path()), 500, seed=1)


def gf2_rank(a):
    a = np.array(a, dtype=np.uint8) % 2
    r = 0
    for c in range(a.shape[1]):
        piv = np.flatnonzero(a[r:, c])
        if piv.size == 0:
            continue
        p = r + piv[0]
        a[[r, p]] = a[[p, r]]
        rows = np.flatnonzero(a[:, c])
        rows = rows[rows != r]
        a[rows] ^= a[r]
        r += 1
        if r == a.shape[0]:
            break
    return r


def test_two_column_base_is_forest():
    code = lift(parse_protograph("1 2 2\n1 1\npunctured:\n"), 4, seed=3)
    v = code.view(0)
    h = v.h.toarray()
    assert h.shape == (4, 8) and v.rate == 0.5
    # each block is a permutation matrix
    for blk in (h[:, :4], h[:, 4:]):
        assert np.array_equal(blk.sum(0), np.ones(4)) and np.array_equal(blk.sum(1), np.ones(4))
    # no 4-cycle: no two rows share two columns (exhaustive)
    for a, b in itertools.combinations(range(4), 2):
        assert (h[a] & h[b]).sum() < 2


def test_parallel_edges_need_room():
    p = parse_protograph("1 2 1\n2 1\npunctured:\n")
    with pytest.raises(ConstructionError, match="larger lifting factor"):
        lift(p, 2)
    with pytest.raises(ConstructionError):
        lift(p, 1)


def test_parallel_edges_are_four_cycle_free():
    p = parse_protograph("1 2 1\n3 1\npunctured:\n")
    h = lift(p, 7, seed=0).view(0).h.toarray()
    assert h.max() == 1
    blk = h[:, :7]
    assert np.all(blk.sum(1) == 3)
    for a, b in itertools.combinations(range(7), 2):
        assert (blk[a] & blk[b]).sum() < 2


def test_lift_is_deterministic():
    p = load_protograph(default_protograph_path())
    a, b = lift(p, 40, seed=5), lift(p, 40, seed=5)
    assert (a.core_h != b.core_h).nnz == 0
    assert np.array_equal(a.ext_links, b.ext_links)
    c = lift(p, 40, seed=6)
    assert (a.core_h != c.core_h).nnz > 0


def test_core_dimensions(desk_code):
    p = desk_code.protograph
    assert desk_code.k == 1000
    assert desk_code.n_core == 500 * p.n_transmitted
    assert desk_code.rate_max == pytest.approx(0.2)
    assert desk_code.rate_min == pytest.approx(0.01)


def test_core_rank():
    code = lift(load_protograph(default_protograph_path()), 20, seed=1)
    h = code.core_h.toarray()
    # all variables (punctured ones too) are fixed by k info bits
    assert gf2_rank(h) == code.n_core_vars - code.k


def test_extension_arithmetic(desk_code):
    v = extend_to_rate(desk_code, 0.01)
    assert v.n == 100000
    assert v.m_ext == 100000 - desk_code.n_core
    assert extend_to_rate(desk_code, desk_code.rate_max).m_ext == 0


@pytest.mark.parametrize("r", np.round(np.arange(0.01, 0.2001, 0.01), 2))
def test_rate_coverage(desk_code, r):
    v = extend_to_rate(desk_code, r)
    assert v.rate == desk_code.k / v.n
    assert abs(v.rate - r) <= desk_code.k / (v.n * (v.n - 1))


def test_out_of_range(desk_code):
    with pytest.raises(RateRangeError) as ei:
        extend_to_rate(desk_code, 0.3)
    assert ei.value.achievable == pytest.approx((0.01, 0.2))
    with pytest.raises(RateRangeError):
        extend_to_rate(desk_code, 0.005)


def test_views_are_nested(desk_code):
    a = desk_code.view(200)
    b = desk_code.view(500)
    ha, hb = a.h.toarray(), b.h[: a.h.shape[0], : a.h.shape[1]].toarray()
    assert np.array_equal(ha, hb)
    core = desk_code.core_h.toarray()
    assert np.array_equal(b.h[: core.shape[0], : core.shape[1]].toarray(), core)


def test_extension_degree_profile(desk_code):
    v = desk_code.view(3000)
    h = v.h.tocsc()
    nc = desk_code.n_core_vars
    m_core = desk_code.core_h.shape[0]
    assert np.all(np.diff(h.indptr)[nc:] == 1)
    rows = v.h.tocsr()[m_core:]
    assert np.all(np.diff(rows.indptr) == desk_code.ext_degree + 1)
    # extension rows touch core variables and exactly one new parity
    assert np.all(desk_code.ext_links < nc)


@pytest.mark.parametrize("r", DESK_RATES)
def test_random_codewords_satisfy_all_checks(desk_code, r):
    v = extend_to_rate(desk_code, r)
    rng = np.random.default_rng(int(r * 1000))
    for _ in range(20):
        info = rng.integers(0, 2, v.k)
        c = encode(v, info, full=True)
        assert not v.syndrome(c).any()
        tx = encode(v, info)
        assert tx.size == v.n
        assert np.array_equal(tx[: v.k], info)


def test_zero_info_gives_zero_codeword(desk_code):
    v = extend_to_rate(desk_code, 0.05)
    assert not encode(v, np.zeros(v.k, dtype=int)).any()
    with pytest.raises(ValueError):
        encode(v, np.zeros(v.k + 1, dtype=int))


def test_small_code_matches_brute_force():
    h = np.array([
        [1, 1, 0, 1, 0, 0],
        [0, 1, 1, 0, 1, 0],
        [1, 0, 1, 0, 1, 1],
    ])
    v = view_from_parity_check(h, [0, 1, 2])
    codebook = [c for c in itertools.product([0, 1], repeat=6) if not (h @ c % 2).any()]
    assert len(codebook) == 8
    for c in codebook:
        assert np.array_equal(encode(v, np.array(c[:3])), c)


def test_non_triangular_matrix_rejected():
    h = np.array([[1, 0, 1, 1], [0, 1, 1, 1]])
    with pytest.raises(ConstructionError):
        view_from_parity_check(h, [0, 1])


@settings(max_examples=25, deadline=None)
@given(m=st.integers(0, 400), seed=st.integers(0, 2**31))
def test_linearity(m, seed):
    code = lift(load_protograph(default_protograph_path()), 10, seed=2)
    m = min(m, code.max_extension)
    v = code.view(m)
    rng = np.random.default_rng(seed)
    a, b = rng.integers(0, 2, v.k), rng.integers(0, 2, v.k)
    assert np.array_equal(encode(v, a ^ b), encode(v, a) ^ encode(v, b))
