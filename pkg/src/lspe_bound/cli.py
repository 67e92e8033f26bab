"""Command line entry point: ``lspe-bound {solve,mixing,ledger,run,verify}``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .chain import mixing, trajectory_seed
from .errors import LSPEError
from .experiment import (EXIT_CODES, emit_report, ledger_for, load_config, prepare,
                         run_monte_carlo)
from .ledger import attach_schedule, smallest_n0
from .runner import run_trajectory


def _load(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, master_seed=args.seed)
    if getattr(args, "out", None):
        cfg = replace(cfg, out=args.out)
    return cfg


def _emit(doc, out: str | None, name: str):
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / name).write_text(text)
    sys.stdout.write(text)


def cmd_solve(args) -> int:
    cfg = _load(args)
    p = prepare(cfg)
    doc = p.model.to_dict()
    doc["stationary"] = p.pi.tolist()
    _emit(doc, args.out, "model.json")
    return 0


def cmd_mixing(args) -> int:
    cfg = _load(args)
    p = prepare(cfg)
    prof = mixing(p.chain, p.pi, args.t_max or cfg.t_max)
    _emit({"d": prof.d_values.tolist(), "t_max": prof.t_max_used, "tau_min": prof.tau_min},
          args.out, "mixing.json")
    return 0


def cmd_ledger(args) -> int:
    cfg = _load(args)
    p = prepare(cfg)
    led = ledger_for(p, cfg)
    delta = cfg.delta if cfg.delta is not None else (1.0 - p.model.beta) / 4.0
    n0 = cfg.n0 if cfg.n0 is not None else smallest_n0(led, delta)
    attach_schedule(led, p.schedule, n0, cfg.m_sup)
    led.notes["n0"] = n0
    led.notes["delta"] = delta
    _emit(led.to_dict(), args.out, "ledger.json")
    return 0


def cmd_run(args) -> int:
    cfg = _load(args)
    p = prepare(cfg)
    horizon = args.horizon or cfg.horizon
    seed = trajectory_seed(cfg.master_seed, 0)
    run = run_trajectory(p.chain, p.basis, p.model, p.schedule, p.rho, cfg.r0, horizon, seed,
                         diagnostics=cfg.diagnostics, x0=cfg.x0)
    out = Path(args.out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    run.write_csv(out / "trajectory.csv")
    print(json.dumps({"seed": seed, "horizon": horizon, "final_err_H": float(run.err_H[-1]),
                      "r_final": np.asarray(run.r[-1]).tolist(),
                      "r_star": p.model.r_star.tolist(),
                      "csv": str(out / "trajectory.csv")}, indent=2))
    return 0


def cmd_verify(args) -> int:
    cfg = _load(args)
    report = run_monte_carlo(cfg, threads=args.threads)
    paths = emit_report(report, args.out or cfg.out)
    verdict = report.summary["verdict"]
    for name, clause in verdict["clauses"].items():
        print(f"{name:16s} {clause['status']}")
    print(f"overall          {verdict['overall']}  ({paths['report']})")
    return EXIT_CODES[verdict["overall"]]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lspe-bound", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="experiment config (JSON)")
        p.add_argument("--seed", type=int, default=None, help="override master_seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads (affects speed only)")
        return p

    common(sub.add_parser("solve", help="print the exact limit model")).set_defaults(func=cmd_solve)
    mx = common(sub.add_parser("mixing", help="TV mixing profile and tau_min"))
    mx.add_argument("--t-max", type=int, default=None)
    mx.set_defaults(func=cmd_mixing)
    common(sub.add_parser("ledger", help="constants with provenance")).set_defaults(func=cmd_ledger)
    rn = common(sub.add_parser("run", help="single trajectory to CSV"))
    rn.add_argument("--horizon", type=int, default=None)
    rn.set_defaults(func=cmd_run)
    common(sub.add_parser("verify", help="full Monte Carlo campaign")).set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except LSPEError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
