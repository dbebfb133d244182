import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from corrlab import corrmat
from corrlab import reach as rc
from corrlab.bounds import am_certificate
from corrlab.errors import DimensionMismatchError, NotPositiveError
from corrlab.factorize import protocol_from_certificate
from corrlab.quantum import generated_correlation

from conftest import random_correlation

seeds = st.integers(0, 2**32 - 1)


def phat_oracle(P, lam, s, t):
    n = len(P)
    out = np.zeros((n, n))
    for x in range(n):
        for y in range(n):
            col = sum(P[a][y] for a in range(n))
            row = sum(P[x][b] for b in range(n))
            out[x, y] = P[x][y] - lam * s[x] * col - lam * t[y] * row + lam**2 * s[x] * t[y]
    return out


def simplex(rng, n):
    return rng.dirichlet(np.ones(n))


def test_phat_examples():
    P = np.array([[0.4, 0.1], [0.1, 0.4]])
    np.testing.assert_array_equal(rc.phat(P, 0.0, [0.5, 0.5], [0.5, 0.5]), P)
    # 0.4 - 0.2*0.5*0.5 - 0.2*0.5*0.5 + 0.04*0.25
    assert rc.phat(P, 0.2, [0.5, 0.5], [0.5, 0.5])[0, 0] == pytest.approx(0.31, abs=1e-15)
    with pytest.raises(DimensionMismatchError):
        rc.phat(P, 0.2, [1.0], [0.5, 0.5])


@given(st.integers(2, 5), st.floats(0, 0.99), seeds)
def test_phat_identities(n, lam, seed):
    rng = np.random.default_rng(seed)
    P = random_correlation(rng, n, positive=False)
    s, t = simplex(rng, n), simplex(rng, n)
    H = rc.phat(P, lam, s, t)
    np.testing.assert_allclose(H, phat_oracle(P, lam, s, t), atol=1e-14)
    assert abs(H.sum() - (1 - lam) ** 2) <= 1e-12
    np.testing.assert_allclose(H.sum(axis=1), (1 - lam) * (P.sum(axis=1) - lam * s), atol=1e-14)


def test_phat_derivative_at_zero_uniform():
    rng = np.random.default_rng(3)
    P = random_correlation(rng, 3)
    u = np.full(3, 1 / 3)
    D = rc.phat_derivative(P, 0.0, u, u)
    np.testing.assert_allclose(D, -(P.sum(axis=0)[None, :] + P.sum(axis=1)[:, None]) / 3, atol=1e-15)


@given(st.floats(0.001, 0.98), seeds)
def test_phat_derivative_finite_difference(lam, seed):
    rng = np.random.default_rng(seed)
    P = random_correlation(rng, 3)
    s, t = simplex(rng, 3), simplex(rng, 3)
    h = 1e-6
    fd = (rc.phat(P, lam + h, s, t) - rc.phat(P, lam - h, s, t)) / (2 * h)
    D = rc.phat_derivative(P, lam, s, t)
    np.testing.assert_allclose(D, fd, atol=1e-6)
    H = rc.phat(P, lam, s, t)
    alt = -(np.outer(s, H.sum(axis=0)) + np.outer(H.sum(axis=1), t)) / (1 - lam)
    np.testing.assert_allclose(D, alt, atol=1e-10)


def test_find_feasible_examples():
    rng = np.random.default_rng(0)
    P = random_correlation(rng, 4)
    res = rc.find_feasible_st(P, 0.0)
    assert res.feasible and res.margin >= 0
    r, c = corrmat.marginals(P)
    assert rc.phat(P, 0.0, r, c).min() > 0
    res = rc.find_feasible_st(corrmat.make_bm(6, 0.5).entries, 0.29)
    assert res.feasible
    assert rc.phat(corrmat.make_bm(6, 0.5), 0.29, res.s, res.t).min() >= -1e-10


def test_find_feasible_reaches_am_certificate_region():
    A = corrmat.make_am(8, 0.5)
    lam, s, t, _ = am_certificate(8, 0.5, 1e-3)
    assert rc.phat(A, lam, s, t).min() >= 0
    res = rc.find_feasible_st(A.entries, lam)
    assert res.feasible and res.margin >= -1e-12


def test_find_feasible_reports_failure_above_bound():
    P = corrmat.make_bm(6, 0.5).entries
    res = rc.find_feasible_st(P, 0.35, restarts=2)
    assert not res.feasible and res.margin < 0


def test_feasibility_result_json():
    res = rc.find_feasible_st(np.array([[0.4, 0.1], [0.1, 0.4]]), 0.1)
    d = json.loads(json.dumps(res.to_dict()))
    assert d["feasible"] and len(d["s"]) == 2


def test_threshold_examples():
    assert rc.threshold_upper_bound(corrmat.product([1, 2], [3, 1]).entries) == pytest.approx(1.0)
    P = np.array([[0.4, 0.1], [0.1, 0.4]])
    assert rc.threshold_upper_bound(P) == pytest.approx(1 - 2 * math.sqrt(0.15), abs=1e-15)


@pytest.mark.parametrize("m", range(3, 9))
@pytest.mark.parametrize("k", [0.25, 0.5])
def test_threshold_bm(m, k):
    assert abs(rc.threshold_upper_bound(corrmat.make_bm(m, k)) - (1 - math.sqrt(k))) <= 1e-9


def _brute_threshold(P):
    n = len(P)
    r, c = P.sum(axis=1), P.sum(axis=0)
    best = 0.0
    for perm in itertools.permutations(range(n)):
        best = max(best, sum(math.sqrt(max(0.0, r[x] * c[perm[x]] - P[x, perm[x]])) for x in range(n)))
    return 1 - best


@given(st.integers(2, 5), seeds)
def test_threshold_matches_brute_force(n, seed):
    P = random_correlation(np.random.default_rng(seed), n, positive=False)
    assert abs(rc.threshold_upper_bound(P) - _brute_threshold(P)) <= 1e-12
    assert abs(rc.threshold_upper_bound_bruteforce(P) - _brute_threshold(P)) <= 1e-12


@given(st.integers(2, 5), seeds)
def test_threshold_below_one_for_rank_two(n, seed):
    P = random_correlation(np.random.default_rng(seed), n)
    if np.linalg.matrix_rank(P, tol=1e-10) >= 2:
        assert rc.threshold_upper_bound(P) < 1


@given(st.integers(2, 4), seeds, st.floats(0, 1))
def test_certificates_stay_feasible_for_smaller_noise(n, seed, frac):
    rng = np.random.default_rng(seed)
    P = random_correlation(rng, n)
    lam = 0.5 * rc.threshold_upper_bound(P)
    res = rc.find_feasible_st(P, lam, restarts=2, seed=rng)
    if res.feasible:
        assert np.all(rc.phat_derivative(P, lam, res.s, res.t) <= 1e-10)
        low = rc.phat(P, lam * frac, res.s, res.t)
        assert np.all(low >= rc.phat(P, lam, res.s, res.t) - 1e-12)


def test_region_bm6():
    reg = rc.estimate_region(corrmat.make_bm(6, 0.5).entries)
    edge = 1 - math.sqrt(0.5)
    assert reg.lambda_lo - 1e-4 <= edge <= reg.lambda_hi + 1e-4
    assert reg.boundary_kind is rc.BoundaryKind.CLOSED_CERTIFIED
    assert reg.lambda_lo <= reg.lambda_hi <= 1


def test_region_product():
    reg = rc.estimate_region(corrmat.product([1, 2, 3], [2, 2, 1]).entries)
    assert reg.lambda_hi == 1.0 and reg.lambda_lo >= 1 - 1e-4
    assert reg.boundary_kind is rc.BoundaryKind.OPEN_CERTIFIED


def test_region_am8():
    reg = rc.estimate_region(corrmat.make_am(8, 0.5).entries)
    assert reg.lambda_hi >= corrmat.q_of_k(0.5) - 1e-3
    assert reg.lambda_hi - reg.lambda_lo <= 1e-4
    json.dumps(reg.to_dict())


def test_region_interval_property():
    rng = np.random.default_rng(9)
    P = random_correlation(rng, 3)
    reg = rc.estimate_region(P, tol_lambda=1e-3)
    assert reg.lambda_hi - reg.lambda_lo <= 1e-3
    for lam in np.linspace(0, reg.lambda_lo, 5):
        assert rc.find_feasible_st(P, lam, init=(reg.witness.s, reg.witness.t)).feasible


def test_region_needs_positive_entries():
    with pytest.raises(NotPositiveError):
        rc.estimate_region(corrmat.make_edm([-1, 0, 1]).entries)


def test_classify_examples():
    res = rc.classify_sudden_death(corrmat.make_bm(6, 0.5).entries)
    assert res.verdict is rc.Verdict.SUDDEN_DEATH
    assert abs(res.boundary - (1 - math.sqrt(0.5))) <= 1e-4
    res = rc.classify_sudden_death(corrmat.make_am(8, 0.5).entries)
    assert res.verdict is rc.Verdict.GRADUAL_DECAY
    res = rc.classify_sudden_death(corrmat.product([1, 2], [1, 1]).entries)
    assert res.verdict is rc.Verdict.INCONCLUSIVE
    json.dumps(res.to_dict())


@pytest.mark.parametrize("seed", range(4))
def test_certificates_produce_protocols(seed):
    rng = np.random.default_rng(100 + seed)
    P = random_correlation(rng, 3)
    lam = 0.5 * rc.estimate_region(P, tol_lambda=1e-2).lambda_lo
    res = rc.find_feasible_st(P, lam, center=True)
    assert res.feasible
    p = protocol_from_certificate(P, lam, res.s, res.t)
    np.testing.assert_allclose(generated_correlation(p).entries, P, atol=1e-9)
