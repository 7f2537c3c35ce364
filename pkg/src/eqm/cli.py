"""``eqm`` command line: solve, classify, graph and scan subcommands."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError
from .regime import SeedCache
from .scanner import (EXIT_CONFIG, load_config, run_classify, run_graph, run_scan,
                      run_solve)


def _parser():
    ap = argparse.ArgumentParser(prog="eqm", description=__doc__)
    ap.add_argument("command", choices=["solve", "classify", "graph", "scan"])
    ap.add_argument("--config", required=True, help="JSON job config")
    ap.add_argument("--out", help="output directory (overrides output.dir)")
    ap.add_argument("--q", help="number of cuts or 'auto'")
    ap.add_argument("--svg", action="store_true", help="also write an SVG figure")
    ap.add_argument("--mask", action="store_true", help="shade stable lands in graph SVG")
    ap.add_argument("--threads", type=int, help="scan workers (default: $EQM_THREADS or 1)")
    ap.add_argument("--cache", help="seed cache JSON, read and updated")
    ap.add_argument("--seed", help="'symmetric', 'cache' or a JSON endpoint object")
    ap.add_argument("--newton-tol", type=float)
    ap.add_argument("--quad-tol", type=float)
    ap.add_argument("--traj-tol", type=float)
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)

    def log(msg):
        print(msg, file=sys.stderr)

    over = {"newton_tol": args.newton_tol, "quad_tol": args.quad_tol,
            "traj_tol": args.traj_tol, "mode": args.command}
    try:
        if args.q is not None:
            over["q"] = "auto" if args.q == "auto" else int(args.q)
        if args.seed is not None:
            over["seed"] = (args.seed if args.seed in ("symmetric", "cache")
                            else json.loads(args.seed))
        cfg = load_config(args.config, over)
    except (ConfigError, ValueError) as exc:
        log(str(exc))
        return EXIT_CONFIG
    if args.out:
        cfg.out_dir = args.out
    cache = None
    if args.cache:
        cp = Path(args.cache)
        cache = SeedCache.from_json(cp.read_text()) if cp.exists() else SeedCache()
    if args.command == "solve":
        code = run_solve(cfg, cache, log=log)
    elif args.command == "classify":
        code = run_classify(cfg, cache, log=log)
    elif args.command == "graph":
        code = run_graph(cfg, cache, svg=args.svg, mask=args.mask, log=log)
    else:
        try:
            code, _ = run_scan(cfg, args.threads, cache, svg=args.svg, log=log)
        except ConfigError as exc:
            log(str(exc))
            return EXIT_CONFIG
    if cache is not None:
        Path(args.cache).write_text(cache.to_json())
    return code


if __name__ == "__main__":
    raise SystemExit(main())
