import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from corrlab import corrmat
from corrlab.errors import (
    AlphaSumNonzeroError,
    BadParameterError,
    Condition3ViolatedError,
    DuplicateAlphaError,
    NegativeEntryError,
    NonpositiveScaleError,
    NotSquareError,
    SchmidtOrderError,
    SumNotOneError,
)

distinct_alphas = st.lists(
    st.floats(-10, 10, allow_nan=False), min_size=2, max_size=7, unique=True
).filter(lambda a: min(abs(x - y) for i, x in enumerate(a) for y in a[i + 1:]) > 1e-3)


def test_validate_accepts_exact():
    P = corrmat.validate([[0.5, 0], [0, 0.5]])
    assert P.n == 2
    with pytest.raises(ValueError):
        P.entries[0, 0] = 1.0


def test_validate_sum_not_one():
    with pytest.raises(SumNotOneError) as exc:
        corrmat.validate([[0.5, 0.1], [0.1, 0.5]])
    assert exc.value.actual == pytest.approx(1.2)


def test_validate_negative_entry_reports_one_based():
    with pytest.raises(NegativeEntryError) as exc:
        corrmat.validate([[1.1, -0.1], [0, 0]])
    assert (exc.value.x, exc.value.y) == (1, 2)


def test_validate_not_square():
    with pytest.raises(NotSquareError):
        corrmat.validate(np.ones((2, 3)) / 6)


def test_normalize_is_explicit():
    P = corrmat.normalize([[1, 1], [1, 1]])
    np.testing.assert_allclose(P.entries, 0.25)


@pytest.mark.parametrize(
    "P, rows",
    [([[0.5, 0], [0, 0.5]], [0.5, 0.5]), ([[0.4, 0.1], [0.1, 0.4]], [0.5, 0.5])],
)
def test_marginals_examples(P, rows):
    r, c = corrmat.marginals(P)
    np.testing.assert_allclose(r, rows)
    np.testing.assert_allclose(c, rows)


def test_marginals_b3_uniform():
    r, c = corrmat.marginals(corrmat.make_bm(3, 0.5))
    np.testing.assert_allclose(r, 1 / 3, atol=1e-15)
    np.testing.assert_allclose(c, 1 / 3, atol=1e-15)


def test_edm_examples():
    np.testing.assert_allclose(corrmat.make_edm([0, 1]).entries, [[0, 0.5], [0.5, 0]])
    E = corrmat.make_edm([-1, 0, 1]).entries
    # direct sum of squared differences is 2 * (1 + 4 + 1) = 12
    assert E[0, 2] == pytest.approx(4 / 12)
    assert E[0, 1] == pytest.approx(1 / 12)


def test_edm_duplicate():
    with pytest.raises(DuplicateAlphaError):
        corrmat.make_edm([1, 2, 1])


@given(distinct_alphas, st.floats(-5, 5))
def test_edm_zero_diagonal_and_shift_invariant(alphas, shift):
    E = corrmat.make_edm(alphas).entries
    assert np.all(np.diag(E) == 0)
    np.testing.assert_allclose(E, E.T)
    np.testing.assert_allclose(corrmat.make_edm(np.asarray(alphas) + shift).entries, E, atol=1e-9)


def test_modified_edm_examples():
    E = corrmat.make_edm([-1, 0, 2]).entries
    np.testing.assert_allclose(corrmat.make_modified_edm([-1, 0, 2], np.ones(3), np.ones(3)), E)
    out = corrmat.make_modified_edm([0, 1], [2, 1], [0.5, 1])
    # entry (x, y) = L_x EDM(x, y) R_y: (1,2) -> 2 * 0.5 * 1, (2,1) -> 1 * 0.5 * 0.5
    np.testing.assert_allclose(out, [[0, 1.0], [0.25, 0]])
    with pytest.raises(NonpositiveScaleError):
        corrmat.make_modified_edm([0, 1], [0, 1], [1, 1])


def test_bm_examples():
    B = corrmat.make_bm(3, 0.5).entries
    assert B[0, 0] == pytest.approx(0.5 / 9, abs=1e-15)
    assert B[0, 1] == pytest.approx(1.25 / 9, abs=1e-15)
    B6 = corrmat.make_bm(6, 0.5).entries
    for x in range(1, 6):  # 1-based x >= 2 paired with m + 2 - x
        assert B6[x, 6 - x] == pytest.approx(0.5 / 36, abs=1e-15)
    np.testing.assert_allclose(corrmat.make_bm(5, 1e-12).entries, 1 / 25, atol=1e-13)


@pytest.mark.parametrize("m, k", [(2, 0.5), (4, 0.0), (4, 1.0), (3.5, 0.5)])
def test_bm_bad_parameters(m, k):
    with pytest.raises(BadParameterError):
        corrmat.make_bm(m, k)


@given(st.integers(3, 10), st.floats(0.01, 0.99))
def test_bm_structure(m, k):
    B = corrmat.make_bm(m, k).entries
    idx = np.arange(m)
    key = (idx[:, None] + idx[None, :]) % m
    for v in range(m):
        vals = B[key == v]
        assert np.ptp(vals) <= 1e-15
    pair = corrmat.polygon_pair(m, k)
    np.testing.assert_allclose(B, pair.slack() / m**2, atol=1e-12)
    assert B.min() == pytest.approx((1 - k) / m**2, abs=1e-15)
    assert np.all(pair.slack() > 0)


def test_q_and_am_identities():
    q = corrmat.q_of_k(0.5)
    assert q == pytest.approx(2 - math.sqrt(3), abs=1e-15)
    assert abs((1 + q * q) * (1 - 0.5) / 2 - q) <= 1e-12
    A = corrmat.make_am(4, 0.5).entries
    assert abs(A.sum() - 1) <= 1e-12
    assert A[0, 0] == pytest.approx((1 - q) ** 2 / 2)
    np.testing.assert_allclose(A[0, 1:], q * (1 - q) / 8)


@given(st.integers(3, 9), st.floats(0.05, 0.95))
def test_am_embeds_bm(m, k):
    q = corrmat.q_of_k(k)
    A = corrmat.make_am(m, k).entries
    np.testing.assert_allclose(A[1:, 1:], (1 + q * q) / 2 * corrmat.make_bm(m, k).entries, atol=1e-12)
    assert abs((1 + q * q) * (1 - k) / 2 - q) <= 1e-12
    assert A.min() >= 0 and abs(A.sum() - 1) <= 1e-9


def _alphas_with_row_share(share):
    # alphas (1, b, c) with b + c = -1 and first EDM row share `share`;
    # for zero-sum alphas row x carries (m a_x^2 + S) / (2 m S), S = sum a^2
    S = 3 / (6 * share - 1)
    bc = (1 - (S - 1)) / 2
    disc = math.sqrt(1 - 4 * bc)
    return [1.0, (-1 + disc) / 2, (-1 - disc) / 2]


def test_theorem1_family_r_values():
    alphas = _alphas_with_row_share(0.4)
    assert corrmat.make_edm(alphas).entries[0].sum() == pytest.approx(0.4)
    P, L, R = corrmat.make_theorem1_family([0.6, 0.4], alphas)
    assert L[0] - 1 == pytest.approx(0.25)
    assert 1 - R[0] == pytest.approx(0.25)
    assert P.entries[3, 3] == 0
    P, L, R = corrmat.make_theorem1_family([0.5, 0.5], alphas)
    np.testing.assert_allclose(P.entries[:3, :3], corrmat.make_edm(alphas).entries)


def test_theorem1_family_errors():
    alphas = _alphas_with_row_share(0.4)
    with pytest.raises(SchmidtOrderError):
        corrmat.make_theorem1_family([0.4, 0.6], alphas)
    with pytest.raises(AlphaSumNonzeroError):
        corrmat.make_theorem1_family([0.6, 0.4], [1.0, 2.0, 3.0])
    # mu1 = 0.95 needs a first row share above 0.45
    with pytest.raises(Condition3ViolatedError):
        corrmat.make_theorem1_family([0.95, 0.05], alphas)


@given(st.floats(0.5, 0.7))
def test_theorem1_family_rank_preserved(l1):
    alphas = [-3.0, -1.0, 0.5, 3.5]
    P, L, R = corrmat.make_theorem1_family([l1, 1 - l1], alphas)
    E = corrmat.make_edm(alphas).entries
    block = P.entries[:4, :4]
    assert np.linalg.matrix_rank(block, tol=1e-12) == np.linalg.matrix_rank(E, tol=1e-12)


def test_json_and_csv_round_trip(rng):
    P = corrmat.validate(rng.dirichlet(np.ones(9)).reshape(3, 3))
    assert corrmat.from_json(P.to_json()).entries.tolist() == P.entries.tolist()
    back = corrmat.read_csv(io.StringIO(P.to_csv()))
    assert back.entries.tolist() == P.entries.tolist()
    flat = {"n": 3, "entries": P.entries.ravel().tolist()}
    np.testing.assert_array_equal(corrmat.from_dict(flat).entries, P.entries)


def test_csv_format():
    buf = io.StringIO()
    corrmat.write_csv(corrmat.validate([[0.5, 0], [0, 0.5]]), buf, {"family": "x"})
    lines = buf.getvalue().splitlines()
    assert lines[:3] == ["# family=x", "x,y,p", "1,1,0.5"]
