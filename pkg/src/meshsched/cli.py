"""Command-line entry point: ``meshsched run | experiment | gen-topology``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import SCHEDULERS, load_config, validate
from .engine import run
from .errors import ConfigError, ContractViolation, InvariantViolation
from .experiments import DEFAULT_SLOTS, PRESETS, run_experiment
from .topology import KINDS, generate

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 2, 3


def _cmd_run(args):
    cfg = load_config(args.config)
    if args.scheduler:
        cfg.scheduler = args.scheduler
    if args.seed is not None:
        cfg.seed = args.seed
    if args.slots is not None:
        cfg.slots = args.slots
    validate(cfg)
    m = run(cfg, args.out)
    print(json.dumps(m.summary(), indent=2, sort_keys=True))


def _cmd_experiment(args):
    seeds = range(args.seed0, args.seed0 + args.reps)
    rows = run_experiment(args.preset, seeds=seeds, out=args.out, slots=args.slots,
                          keep_runs=args.keep_runs)
    for r in rows:
        label = " ".join(f"{k}={v}" for k, v in r.items()
                         if not k.endswith(("_mean", "_se")) and k not in ("delay_cdf", "seeds"))
        thr, viol = r["steady_throughput_units_mean"], r["delay_violation_mean"]
        print(f"{label}: throughput {thr:.3f} units/slot, delay violation {viol:.3f}")


def _cmd_gen(args):
    doc = generate(args.kind, args.nodes)
    text = json.dumps(doc, indent=1)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def build_parser():
    p = argparse.ArgumentParser(prog="meshsched", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="one replication from a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--scheduler", choices=SCHEDULERS)
    r.add_argument("--seed", type=int)
    r.add_argument("--slots", type=int)
    r.add_argument("--out", help="directory for metrics.csv, packets.csv, summary.json")
    r.set_defaults(func=_cmd_run)

    e = sub.add_parser("experiment", help="run a named preset over several seeds")
    e.add_argument("--preset", required=True, choices=PRESETS)
    e.add_argument("--reps", type=int, default=10)
    e.add_argument("--seed0", type=int, default=0)
    e.add_argument("--slots", type=int, default=DEFAULT_SLOTS)
    e.add_argument("--out")
    e.add_argument("--keep-runs", action="store_true", help="also write per-seed run outputs")
    e.set_defaults(func=_cmd_experiment)

    g = sub.add_parser("gen-topology", help="emit a topology JSON document")
    g.add_argument("--kind", required=True, choices=KINDS)
    g.add_argument("--nodes", type=int, required=True)
    g.add_argument("--out")
    g.set_defaults(func=_cmd_gen)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error at {exc.path}: {exc.message}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvariantViolation, ContractViolation) as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
