"""Command-line entry point: ``oram3 {verify,audit,bench,trace}``.

The seed comes from ``--seed``, else the ``ORAM3_SEED`` environment
variable, else 0.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time

from . import harness
from .harness import AuditReport, ExperimentConfig
from .recursive import OramSystem
from .rng import RandomSource
from .simnet import Network, Trace

ENV_SEED = "ORAM3_SEED"


def resolve_seed(flag) -> int:
    if flag is not None:
        return flag
    env = os.environ.get(ENV_SEED)
    if env not in (None, ""):
        return int(env)
    return 0


def _sizes(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from None


def cmd_verify(args) -> int:
    cfg = ExperimentConfig(N=args.n, ops=args.ops, seed=resolve_seed(args.seed),
                           workload=args.workload, check=args.check)
    t0 = time.perf_counter()
    rep = harness.run_oracle_replay(cfg)
    rep.stats["seconds"] = round(time.perf_counter() - t0, 3)
    print(rep.to_json())
    return 0 if rep.ok else 1


def cmd_audit(args) -> int:
    seed = resolve_seed(args.seed)
    cfg = ExperimentConfig(N=args.n, ops=args.ops, seed=seed)
    seq_a = harness.make_workload(ExperimentConfig(N=args.n, ops=args.ops, seed=seed))
    seq_b = harness.make_workload(ExperimentConfig(N=args.n, ops=args.ops, seed=seed,
                                                   workload="repeat"))
    rep = harness.run_pattern_audit(cfg, seq_a, seq_b, seeds=args.seeds)
    for proto, params in (("otm", {"n": 4, "ell": 4}), ("compact", {"n": 8}),
                          ("merge", {"n": 8})):
        for b, p in harness.run_index_uniformity(proto, params, args.trials).items():
            rep.chi_square_p[f"{proto}/S{b}"] = p
    harness.flag_p_values(rep)
    print(rep.to_json())
    return 0 if rep.ok else 1


def cmd_bench(args) -> int:
    seed = resolve_seed(args.seed)
    if args.protocol == "oram":
        rep = harness.run_bandwidth_suite(args.sizes, big_blocks=args.big_blocks, seed=seed,
                                          progress=lambda s: print(s, file=sys.stderr))
    else:
        rep = harness.run_block_suite(args.protocol, args.sizes, seed=seed)
    print(rep.to_json())
    return 0


def cmd_trace(args) -> int:
    seed = resolve_seed(args.seed)
    cfg = ExperimentConfig(N=args.n, ops=args.ops, seed=seed)
    with open(args.out, "w") as fh:
        tr = Trace(keep=False, sink=fh, strip_index=args.strip_index)
        oram = OramSystem(cfg.N, Network(trace=tr), RandomSource(seed), cfg.payload_bits)
        for req in harness.make_workload(cfg):
            oram.access(req)
    print(json.dumps({"events": len(tr), "out": args.out}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="oram3", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("verify", help="replay a workload against a plain array")
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--ops", type=int, default=10000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workload", choices=harness.WORKLOADS, default="uniform")
    p.add_argument("--check", action="store_true", help="enable internal assertions")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("audit", help="pattern and index-uniformity audits")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--ops", type=int, default=32)
    p.add_argument("--trials", type=int, default=4000)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("bench", help="bandwidth sweep and fitted exponents")
    p.add_argument("--sizes", type=_sizes, default=[256, 1024, 4096, 16384])
    p.add_argument("--big-blocks", action="store_true")
    p.add_argument("--protocol", choices=("oram", "compact", "merge"), default="oram")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("trace", help="dump a JSONL transcript")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--ops", type=int, default=8)
    p.add_argument("--out", required=True)
    p.add_argument("--strip-index", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_trace)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
