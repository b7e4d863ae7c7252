"""Command line entry point: ``fcid simulate|identify|compare|sweep|mse``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import data as fdata
from .errors import (ConfigError, DimensionError, DomainError, EmptyDataError, NotPositiveError,
                     NumericalError, OrderError, ParseError, RangeError)
from .harness import ExperimentConfig, build_dataset, build_model, mse, resolve_cut, run_experiment, sweep_lambda

EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON or key = value config file")
    p.add_argument("--model", choices=["squadrito", "kim"])
    p.add_argument("--data", help="samples CSV (t,i,v); synthetic data when omitted")
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int, help="synthetic sample count")
    p.add_argument("--sigma", type=float, help="synthetic noise standard deviation [V]")
    p.add_argument("--static", action="store_true", help="synthetic truth without parameter drift")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("-v", "--verbose", action="store_true")


def _filter_opts(p: argparse.ArgumentParser, with_lambda: bool = True) -> None:
    p.add_argument("--r0", type=float, help="initial (or constant) measurement-noise variance [V^2]")
    if with_lambda:
        p.add_argument("--lambda", dest="lam", type=float, help="learning factor in (0, 1)")
    p.add_argument("--gamma", type=float, help="innovation-moment smoothing weight")
    p.add_argument("--transient-cut", dest="transient_cut", type=float,
                   help="fraction in [0, 1) or absolute sample index")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fcid", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset and its manifest")
    _common(p)

    p = sub.add_parser("identify", help="run one identification arm")
    _common(p)
    _filter_opts(p)
    p.add_argument("--adaptive", action="store_true", help="estimate R online instead of holding it")

    p = sub.add_parser("compare", help="constant-R and adaptive-R arms on the same data")
    _common(p)
    _filter_opts(p)

    p = sub.add_parser("sweep", help="adaptive arm over several learning factors")
    _common(p)
    _filter_opts(p, with_lambda=False)
    p.add_argument("--lambda", dest="lambdas", type=float, nargs="+", required=True)

    p = sub.add_parser("mse", help="recompute the MSE metrics from a trace CSV")
    p.add_argument("trace")
    p.add_argument("--transient-cut", dest="transient_cut", type=float, default=0.1)
    return parser


def config_from_args(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    overrides = {}
    for key in ("model", "data", "seed", "n", "sigma", "out_dir", "r0", "lam", "gamma",
                "transient_cut"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "adaptive", False):
        overrides["adaptive"] = True
    if args.static:
        overrides["drift"] = None
    tc = overrides.get("transient_cut", 0)
    if tc >= 1 and float(tc).is_integer():
        overrides["transient_cut"] = int(overrides["transient_cut"])
    if "model" in overrides and overrides["model"] != cfg.model:
        # per-model vectors from a config file no longer fit
        for key in ("truth", "theta0", "drift"):
            if isinstance(getattr(cfg, key), list):
                raise ConfigError(f"--model {overrides['model']} conflicts with {key} in the config file")
    return cfg.replace(**overrides)


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_simulate(cfg: ExperimentConfig) -> None:
    ds = build_dataset(cfg, build_model(cfg))
    out = Path(cfg.out_dir or ".")
    csv_path, man_path = fdata.write_dataset(out, ds, stem=f"samples_{cfg.model}")
    _emit({"samples": str(csv_path), "manifest": str(man_path), "n": len(ds),
           "sha256": ds.digest()})


def cmd_identify(cfg: ExperimentConfig) -> None:
    rep = run_experiment(cfg)
    _emit(rep.to_dict()["arms"])


def cmd_compare(cfg: ExperimentConfig) -> None:
    rep = run_experiment(cfg, arms=("constant", "adaptive"))
    sys.stdout.write(rep.table())


def cmd_sweep(cfg: ExperimentConfig, lambdas) -> None:
    rows = sweep_lambda(cfg, lambdas)
    print(f"{'lambda':>8s} {'MSE (1)':>13s} {'MSE (2)':>13s} {'final R':>13s}")
    for r in rows:
        print(f"{r['lambda']:8.4f} {r['mse_all']:13.4e} {r['mse_post']:13.4e} {r['final_R']:13.4e}")


def cmd_mse(path, transient_cut) -> None:
    tr = fdata.read_trace(path)
    cut = resolve_cut(transient_cut if transient_cut < 1 else int(transient_cut), len(tr))
    m_all, m_post = mse(tr, cut)
    _emit({"trace": str(path), "n": len(tr), "cut_index": cut, "mse_all": m_all,
           "mse_post": m_post, "skipped": int(tr.skipped.sum())})


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "mse":
            cmd_mse(args.trace, args.transient_cut)
            return 0
        cfg = config_from_args(args)
        if args.command == "simulate":
            cmd_simulate(cfg)
        elif args.command == "identify":
            cmd_identify(cfg)
        elif args.command == "compare":
            cmd_compare(cfg)
        elif args.command == "sweep":
            cmd_sweep(cfg, args.lambdas)
    except NumericalError as exc:
        idx = getattr(exc, "sample_index", exc.step)
        arm = getattr(exc, "arm", None)
        print(f"fcid: numerical failure at step {idx}"
              + (f" ({arm} arm)" if arm else "") + f": {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, RangeError, DimensionError, NotPositiveError) as exc:
        print(f"fcid: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, OrderError, EmptyDataError, DomainError, OverflowError, OSError) as exc:
        where = getattr(exc, "sample_index", None)
        print(f"fcid: data error" + (f" at sample {where}" if where is not None else "")
              + f": {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
