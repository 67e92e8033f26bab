#!/usr/bin/env python3
"""Lemma tail campaign: empirical exceedance of the H-norm deviation thresholds at checkpoints."""

import argparse

from lspe_bound.experiment import lemma_campaign, ledger_for, load_config, prepare


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/two_state.json")
    ap.add_argument("-R", type=int, default=2000)
    ap.add_argument("--checkpoints", type=int, nargs="+", default=[100, 1000, 10000])
    ap.add_argument("--targets", type=float, nargs="+", default=[0.5, 0.1, 0.01])
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    cfg = load_config(args.config)
    problem = prepare(cfg)
    ledger = ledger_for(problem, cfg)
    rows = lemma_campaign(problem, ledger, args.R, args.checkpoints, args.targets,
                          master_seed=cfg.master_seed, x0=cfg.x0, threads=args.threads)
    print(f"{'n':>7} {'quantity':>9} {'theory':>8} {'empirical':>10}  verdict")
    for r in rows:
        print(f"{r['n']:7d} {r['quantity']:>9} {r['theoretical_failure']:8.3g} "
              f"{r['empirical_frequency']:10.4f}  {r['verdict']}")


if __name__ == "__main__":
    main()
