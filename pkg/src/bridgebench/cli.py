"""bridge-bench: command-line harness for the bridge-sampling experiments.

    bridge-bench bias   --model langevin-t --dof 3 --x0 2 --xT 3.3 --T 4 \
        --bridges 20000 --mcmc-steps 50 --sdb-delta 0.4,0.005 --out bias.csv
    bridge-bench timing --dof 100 --x0 7 --xT 7 --T 1,2,4,6,20,50,100 \
        --bridges 100 --mcmc-steps 200 --psrs-cutoff 6 --out timing.csv
    bridge-bench paths  --dof 100 --x0 7 --xT 7 --T 1,4,20,100 --bridges 30 \
        --out paths.json --format json

Exit code 0 on success; any sampler diagnostic prints one line to stderr
and exits nonzero.
"""

from __future__ import annotations

import argparse
import sys

from .cdb import DEFAULT_GAMMA
from .errors import BridgeBenchError
from .experiments import (ExperimentConfig, dumps_result, run_experiment,
                          write_result)
from .rng import DEFAULT_COIN_CEILING

_TIMING_T = "1,2,3,4,5,6,7,8,9,10,20,30,50,100"


def _float_list(text: str):
    return tuple(float(s) for s in text.split(",") if s.strip())


def _add_common(p: argparse.ArgumentParser, *, x0: float, xT: float, T: str,
                bridges: int, mcmc: int) -> None:
    p.add_argument("--model", default="langevin-t", choices=["langevin-t", "brownian"])
    p.add_argument("--dof", type=float, default=3.0,
                   help="degrees of freedom v of the t-model")
    p.add_argument("--x0", type=float, default=x0)
    p.add_argument("--xT", type=float, default=xT)
    p.add_argument("--T", type=_float_list, default=_float_list(T),
                   help="comma-separated bridge horizons")
    p.add_argument("--bridges", type=int, default=bridges,
                   help="independent replicates per method and horizon")
    p.add_argument("--mcmc-steps", type=int, default=mcmc)
    p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA,
                   help="threshold multiplier of the coin fallback protocol")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--streams", type=int, default=1,
                   help="worker processes (one random stream per replicate either way)")
    p.add_argument("--delta-max", type=float, default=None,
                   help="override the per-segment horizon of the path sampler")
    p.add_argument("--coin-ceiling", type=int, default=DEFAULT_COIN_CEILING)
    p.add_argument("--format", dest="fmt", default="csv", choices=["csv", "json"])
    p.add_argument("--out", default=None, help="output path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bridge-bench",
                                 description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="experiment", required=True)

    p = sub.add_parser("bias", help="midpoint bias of discretised vs exact bridges")
    _add_common(p, x0=2.0, xT=3.3, T="4", bridges=100, mcmc=50)
    p.add_argument("--sdb-delta", type=_float_list, default=(0.4, 0.2, 5e-3),
                   help="comma-separated Euler step sizes for the baseline")

    p = sub.add_parser("timing", help="wall-clock scaling over the horizon")
    _add_common(p, x0=7.0, xT=7.0, T=_TIMING_T, bridges=100, mcmc=200)
    p.add_argument("--dof-override", dest="_unused", help=argparse.SUPPRESS)
    p.add_argument("--psrs-cutoff", type=float, default=6.0,
                   help="longest horizon at which the reference bridge sampler runs")
    p.set_defaults(dof=100.0)

    p = sub.add_parser("paths", help="dump revealed skeleton points of sampled bridges")
    _add_common(p, x0=7.0, xT=7.0, T="1,4,20,100", bridges=30, mcmc=50)
    p.set_defaults(dof=100.0)
    return ap


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    return ExperimentConfig(
        experiment=args.experiment,
        model=args.model,
        dof=args.dof,
        x0=args.x0,
        xT=args.xT,
        T_list=tuple(args.T),
        n_bridges=args.bridges,
        n_mcmc=args.mcmc_steps,
        seed=args.seed,
        sdb_deltas=tuple(getattr(args, "sdb_delta", ()) or ()),
        gamma=args.gamma,
        psrs_cutoff=getattr(args, "psrs_cutoff", 6.0),
        delta_max=args.delta_max,
        coin_ceiling=args.coin_ceiling,
        streams=args.streams,
        out=args.out,
        fmt=args.fmt,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        data = run_experiment(cfg)
        if cfg.out:
            write_result(data, cfg.out, cfg.fmt)
        else:
            sys.stdout.write(dumps_result(data, cfg.fmt))
    except (BridgeBenchError, ValueError, OSError) as exc:
        print(f"bridge-bench: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
