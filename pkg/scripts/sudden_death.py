"""Locate the feasibility edge of B_m and compare it with 1 - sqrt(k).

Usage: python3 scripts/sudden_death.py [--m 8] [--k 0.5]
"""

import argparse
import math

from corrlab.corrmat import make_bm
from corrlab.reach import classify_sudden_death, threshold_upper_bound


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--m", type=int, nargs="+", default=[4, 6, 8])
    ap.add_argument("--k", type=float, nargs="+", default=[0.25, 0.5, 0.75])
    args = ap.parse_args()
    print(f"{'m':>3} {'k':>5} {'1-sqrt k':>10} {'bound':>10} {'lambda_lo':>10} {'lambda_hi':>10}  verdict")
    for m in args.m:
        for k in args.k:
            P = make_bm(m, k)
            c = classify_sudden_death(P)
            print(f"{m:>3} {k:>5} {1 - math.sqrt(k):>10.6f} {threshold_upper_bound(P):>10.6f} "
                  f"{c.region.lambda_lo:>10.6f} {c.region.lambda_hi:>10.6f}  {c.verdict.value}")


if __name__ == "__main__":
    main()
