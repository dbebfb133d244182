"""Reproduction presets: sudden death of B_m, gradual decay of A_m, and the
certificate-to-protocol round trip on random correlations."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bounds import advantage_estimate, am_certificate, am_cost_bounds
from .corrmat import make_am, make_bm, q_of_k
from .factorize import (
    RankBounds,
    diagonalize_factorization,
    explicit_bm_factorization,
    noisy_threshold,
    protocol_from_certificate,
    protocol_from_noisy_factorization,
    verify_noisy_psd_factorization,
)
from .quantum import generated_correlation
from .reach import estimate_region, find_feasible_st, phat, threshold_upper_bound


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}  {self.detail}".rstrip()


BM_CASES = ((4, 0.25), (6, 0.5), (8, 0.75))


def thm3(cases=BM_CASES) -> list[Check]:
    out = []
    for m, k in cases:
        P = make_bm(m, k)
        f = explicit_bm_factorization(m, k)
        edge = 1 - math.sqrt(k)
        at = verify_noisy_psd_factorization(P, f, edge).passed
        past = verify_noisy_psd_factorization(P, f, edge + 1e-6).passed
        ev_gap = abs(noisy_threshold(f) - edge)
        out.append(Check(f"B_{m}(k={k}) factorization edge", at and not past and ev_gap <= 1e-9,
                         f"pass@edge={at} pass@edge+1e-6={past} |eig edge - (1-sqrt k)|={ev_gap:.2e}"))
        tb_gap = abs(threshold_upper_bound(P) - edge)
        out.append(Check(f"B_{m}(k={k}) permutation bound", tb_gap <= 1e-9, f"gap={tb_gap:.2e}"))
        proto = protocol_from_noisy_factorization(P, diagonalize_factorization(f), edge)
        err = float(np.max(np.abs(generated_correlation(proto).entries - P.entries)))
        out.append(Check(f"B_{m}(k={k}) protocol at edge", err <= 1e-9 and proto.d == 2,
                         f"d={proto.d} err={err:.2e}"))
        reg = estimate_region(P)
        inside = reg.lambda_lo - 1e-4 <= edge <= reg.lambda_hi + 1e-4
        out.append(Check(f"B_{m}(k={k}) region", inside,
                         f"[{reg.lambda_lo:.7f}, {reg.lambda_hi:.7f}] {reg.boundary_kind.value}"))
    return out


def thm2(m: int = 8, k: float = 0.5, js=range(1, 11)) -> list[Check]:
    q = q_of_k(k)
    P = make_am(m, k)
    epss = [q / 2**j for j in js]
    mins, lowers, uppers, s_up = [], [], [], []
    rb = RankBounds(int(np.linalg.matrix_rank(P.entries)), m + 1)
    for eps in epss:
        lam, s, t, _ = am_certificate(m, k, eps)
        mins.append(float(phat(P, lam, s, t).min()))
        b = am_cost_bounds(m, k, eps)
        lowers.append(b.lower)
        uppers.append(b.upper)
        s_up.append(advantage_estimate(P, lam, rb, b).s_upper)
    bad = [j for j, v in zip(js, mins) if v < -1e-12]
    out = [Check("A_m certificate nonnegative", not bad, f"failing j={bad} min={min(mins):.3g}")]
    inc = all(b > a for a, b in zip(lowers, lowers[1:]))
    out.append(Check("A_m cost lower increasing, > 10 at the end", inc and lowers[-1] > 10,
                     f"last={lowers[-1]:.4g}"))
    ratio = [u / lo for u, lo in zip(uppers, lowers)]
    growth = [ratio[i] / ratio[0] for i in range(len(ratio))]
    expect = [math.sqrt(epss[0] / e) for e in epss]
    within = all(e / 3 <= g <= 3 * e for g, e in zip(growth, expect))
    out.append(Check("A_m upper/lower grows like eps^-1/2", within,
                     f"growth={growth[-1]:.3g} expected={expect[-1]:.3g}"))
    mono = all(b <= a for a, b in zip(s_up, s_up[1:])) and s_up[-1] < s_up[0]
    out.append(Check("A_m advantage upper decreasing", mono, f"first={s_up[0]:.3g} last={s_up[-1]:.3g}"))
    return out


def random_positive(n: int, rng) -> np.ndarray:
    return rng.dirichlet(np.ones(n * n)).reshape(n, n)


def prop1_roundtrip(count: int = 20, n: int = 3, seed: int = 0, tol: float = 1e-9) -> list[Check]:
    rng = np.random.default_rng(seed)
    ok, worst = 0, 0.0
    for _ in range(count):
        P = random_positive(n, rng)
        reg = estimate_region(P, tol_lambda=1e-3, seed=rng)
        lam = reg.lambda_lo * rng.uniform(0.2, 0.95)
        res = find_feasible_st(P, lam, seed=rng, center=True)
        if not res.feasible:
            continue
        proto = protocol_from_certificate(P, lam, res.s, res.t)
        err = float(np.max(np.abs(generated_correlation(proto).entries - P)))
        worst = max(worst, err)
        ok += err <= tol
    return [Check(f"round trip {count} random {n}x{n}", ok == count, f"{ok}/{count} worst={worst:.2e}")]


PRESETS = {"thm2": thm2, "thm3": thm3, "prop1-roundtrip": prop1_roundtrip}
