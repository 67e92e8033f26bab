#!/usr/bin/env python3
"""Run the full verification campaign for one or more configs and summarise the verdicts."""

import argparse
import sys
import time
from pathlib import Path

from lspe_bound.experiment import EXIT_CODES, emit_report, load_config, run_monte_carlo

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("configs", nargs="*", default=[str(ROOT / "configs" / "two_state.json"),
                                                   str(ROOT / "configs" / "five_state.json")])
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default=str(ROOT / "out"))
    args = ap.parse_args()
    worst = 0
    for path in args.configs:
        cfg = load_config(path)
        t0 = time.perf_counter()
        rep = run_monte_carlo(cfg, threads=args.threads)
        out = Path(args.out) / Path(path).stem
        emit_report(rep, out)
        v = rep.summary["verdict"]
        th, conv = rep.summary["theorem"], rep.summary["convergence"]
        print(f"{Path(path).stem}: {v['overall']} in {time.perf_counter() - t0:.1f} s -> {out}")
        print(f"  n0={th['n0']}  delta={th['delta']:.4f}  K3={th['K3']:.4g}  "
              f"uniform failure (raw)={th['failure_uniform_raw']:.3e}")
        print(f"  q95 final error {conv['q95_final_err_H']:.4g}  tolerance {conv['tolerance']:.4g}")
        for name, clause in v["clauses"].items():
            print(f"  {name:16s} {clause['status']}")
        worst = max(worst, EXIT_CODES[v["overall"]])
    return worst


if __name__ == "__main__":
    sys.exit(main())
