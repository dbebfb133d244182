"""Certificate to protocol round trip on random positive correlations.

Usage: python3 scripts/roundtrip.py [--count 20] [--n 3] [--seed 0]
"""

import argparse

from corrlab.reproduce import prop1_roundtrip


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--count", type=int, default=20)
    ap.add_argument("--n", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    for check in prop1_roundtrip(args.count, args.n, args.seed):
        print(check.line())


if __name__ == "__main__":
    main()
