#!/usr/bin/env python3
"""Empirical tails of the b/A/B path sums against the Paulin bound on short paths."""

import argparse

from lspe_bound.chain import load_chain
from lspe_bound.experiment import FIXTURE_DIR, paulin_domination
from lspe_bound.model import load_basis


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--fixture", default="two_state")
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--lam", type=float, default=0.9)
    ap.add_argument("-n", type=int, default=20)
    ap.add_argument("-R", type=int, default=10**5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    path = FIXTURE_DIR / f"{args.fixture}.json"
    rows = paulin_domination(load_chain(path), load_basis(path), args.alpha, args.lam,
                             n=args.n, R=args.R, seed=args.seed)
    print(f"{'f':>2} {'j':>2} {'mode':>12} {'t':>9} {'empirical':>10} {'bound':>10}  verdict")
    for r in rows:
        print(f"{r['functional']:>2} {r['coordinate']:>2} {r['mode']:>12} {r['t']:9.3f} "
              f"{r['empirical']:10.5f} {r['bound']:10.4g}  {r['verdict']}")


if __name__ == "__main__":
    main()
