#!/usr/bin/env python3
"""Tabulate the delta / n0 trade-off: for each delta, the smallest admissible n0,
the resulting standing margin and the raw uniform failure probability."""

import argparse

import numpy as np

from lspe_bound.experiment import ledger_for, load_config, prepare
from lspe_bound.ledger import TheoremEnvelope, attach_schedule, smallest_n0


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/two_state.json")
    ap.add_argument("--points", type=int, default=8)
    ap.add_argument("--epsilon", type=float, default=None)
    args = ap.parse_args()
    cfg = load_config(args.config)
    problem = prepare(cfg)
    ledger = ledger_for(problem, cfg)
    eps = args.epsilon if args.epsilon is not None else cfg.epsilon
    gap = 1.0 - problem.model.beta
    print(f"{'delta':>10} {'n0':>10} {'margin':>12} {'K3':>12} {'failure_uniform':>16}")
    for frac in np.linspace(0.05, 0.95, args.points):
        delta = frac * gap
        n0 = smallest_n0(ledger, delta)
        fn = attach_schedule(ledger, problem.schedule, n0, cfg.m_sup)
        env = TheoremEnvelope(ledger, problem.schedule, n0, delta, eps, fn)
        total, _ = env.failure_uniform()
        print(f"{delta:10.4f} {n0:10d} {env.margin:12.4e} {env.K3:12.4e} {total:16.4e}")


if __name__ == "__main__":
    main()
