"""Cost bounds and advantage of A_m as the noise approaches q.

Usage: python3 scripts/gradual_decay.py [--m 8] [--k 0.5] [--jmax 12]
"""

import argparse

import numpy as np

from corrlab.bounds import advantage_estimate, am_cost_bounds
from corrlab.corrmat import make_am, q_of_k
from corrlab.factorize import RankBounds
from corrlab.reach import classify_sudden_death


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--m", type=int, default=8)
    ap.add_argument("--k", type=float, default=0.5)
    ap.add_argument("--jmax", type=int, default=12)
    args = ap.parse_args()
    P = make_am(args.m, args.k)
    q = q_of_k(args.k)
    rb = RankBounds(int(np.linalg.matrix_rank(P.entries)), args.m + 1)
    print(f"q = {q:.6f}")
    print(f"{'j':>3} {'eps':>10} {'cost_lo':>9} {'cost_hi':>9} {'adv_lo':>7} {'adv_hi':>7}")
    for j in range(1, args.jmax + 1):
        eps = q / 2**j
        b = am_cost_bounds(args.m, args.k, eps)
        a = advantage_estimate(P, b.lam, rb, b)
        print(f"{j:>3} {eps:>10.3e} {b.lower:>9.3f} {b.upper:>9d} {a.s_lower:>7.3f} {a.s_upper:>7.3f}")
    c = classify_sudden_death(P)
    print(f"edge in [{c.region.lambda_lo:.6f}, {c.region.lambda_hi:.6f}], verdict {c.verdict.value}")
    print(c.evidence)


if __name__ == "__main__":
    main()
