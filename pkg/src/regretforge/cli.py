"""Command line entry point: ``regretforge <verb> [flags]``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import harness
from .efg.tree import GameError
from .npcfr.checkpoint import CheckpointError

VERBS = ("solve", "train", "eval", "table", "gradcheck", "oracle")


def _grid(text):
    try:
        lo, hi, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected a:b:step") from None
    if step <= 0 or hi < lo:
        raise argparse.ArgumentTypeError("expected a <= b and step > 0")
    count = int(round((hi - lo) / step)) + 1
    return [lo + k * step for k in range(count)]


def build_parser():
    parser = argparse.ArgumentParser(prog="regretforge", description=__doc__)
    parser.add_argument("verb", choices=VERBS)
    parser.add_argument("--config", help="JSON experiment config")
    parser.add_argument("--tier", choices=harness.TIERS)
    parser.add_argument("--seed", type=int, help="replace the config's seed list with this seed")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--checkpoint", help="predictor checkpoint to write (train) or read")
    parser.add_argument("--algorithm", help="algorithm tag for solve")
    parser.add_argument("--param", type=float, help="game parameter for solve")
    parser.add_argument("--eta-grid", type=_grid, default=_grid("0:0.5:0.01"),
                        help="oracle sweep grid a:b:step")
    return parser


def resolve_config(args):
    if args.config:
        cfg = harness.load_config(args.config, tier=args.tier)
    else:
        cfg = harness.preset(args.tier or "smoke")
    updates = {}
    if args.seed is not None:
        updates["seeds"] = (args.seed,)
        updates["train"] = replace(cfg.train, seed=args.seed)
    if args.out:
        updates["out"] = args.out
    if args.checkpoint:
        updates["checkpoint"] = args.checkpoint
    return replace(cfg, **updates) if updates else cfg


def _emit(obj):
    print(json.dumps(obj, indent=2, sort_keys=True))


def cmd_solve(args, cfg):
    rows = harness.run_solve(cfg, param=args.param, algorithm=args.algorithm)
    path = os.path.join(cfg.out, "trajectory.csv")
    harness._write(path, harness.results_csv(rows))
    last = rows[-1]
    _emit({"trajectory": path, "algorithm": last["algorithm"], "game_param": last["game_param"],
           "steps": last["step"], "nash_gap": last["nash_gap"], "cce_gap": last["cce_gap"],
           "efm": last["efm"], "best_nash_gap": min(r["nash_gap"] for r in rows)})
    return 0


def cmd_train(args, cfg):
    def progress(epoch, loss):
        print(f"epoch {epoch} loss {loss:.6e}", file=sys.stderr)

    _, log, path = harness.run_train(cfg, checkpoint=args.checkpoint, callback=progress)
    tail = [loss for _, loss in log[-32:]]
    _emit({"checkpoint": path, "epochs": len(log), "first_loss": log[0][1],
           "final_mean_loss": float(np.mean(tail))})
    return 0


def cmd_eval(args, cfg):
    rows, timings = harness.run_eval(cfg)
    tables = harness.write_eval(cfg, rows, timings)
    _emit(tables)
    return 0


def cmd_table(args, cfg):
    path = os.path.join(cfg.out, "results.csv")
    if not os.path.exists(path):
        raise FileNotFoundError(f"no results at {path}; run eval first")
    tables = harness.build_tables(harness.read_results(path), cfg)
    harness._write(os.path.join(cfg.out, "tables.json"), json.dumps(tables, indent=2, sort_keys=True) + "\n")
    _emit(tables)
    return 0


def cmd_gradcheck(args, cfg):
    results = harness.gradcheck_suite(seed=cfg.seeds[0])
    for r in results:
        print(f"{'ok  ' if r.ok else 'FAIL'} {r.name:<28} rel {r.max_rel_error:.2e} (tol {r.tolerance:.0e})")
    return 0 if all(r.ok for r in results) else 1


def cmd_oracle(args, cfg):
    records = harness.oracle_sweep(args.eta_grid)
    worst_nash = max(r["nash_gap"] for r in records)
    worst_cce = max(abs(r["cce_gap"] - r["cce_expected"]) for r in records)
    ok = worst_nash <= 1e-9 and worst_cce <= 1e-12
    _emit({"points": len(records), "max_nash_gap": worst_nash, "max_cce_error": worst_cce, "ok": ok})
    return 0 if ok else 1


COMMANDS = {"solve": cmd_solve, "train": cmd_train, "eval": cmd_eval, "table": cmd_table,
            "gradcheck": cmd_gradcheck, "oracle": cmd_oracle}


def _fail(record, code):
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.verb](args, cfg)
    except harness.ConfigError as exc:
        return _fail(exc.record(), 2)
    except FileNotFoundError as exc:
        return _fail({"error": "missing_file", "message": str(exc)}, 3)
    except CheckpointError as exc:
        return _fail({"error": "checkpoint", "message": str(exc)}, 3)
    except OSError as exc:
        return _fail({"error": "io", "message": str(exc)}, 4)
    except GameError as exc:
        return _fail({"error": "invalid_input", "message": str(exc)}, 2)


if __name__ == "__main__":
    sys.exit(main())
