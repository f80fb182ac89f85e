"""Command-line entry point: ``mlsmc <verb> [config]``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path

from . import experiments as ex
from .config import ConfigError, load_config


def _load(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.study.seed = args.seed
    if args.out is not None:
        cfg.output.dir = args.out
    return cfg


def _out_dir(cfg):
    out = Path(cfg.output.dir)
    return out if out.is_absolute() else Path(cfg.base_dir) / out


def load_truth(path, cfg):
    """Frozen reference truth, accepted only if it was made for this config."""
    data = json.loads(Path(path).read_text())
    if data.get("config_sha256") != cfg.digest():
        raise ConfigError(f"{path} was computed for a different configuration")
    return ex.TruthResult(data["value"], data["se"], data["level"],
                          data["replicates"], data["source"])


def truth_payload(truth, cfg):
    return {**dataclasses.asdict(truth), "config_sha256": cfg.digest()}


def cmd_reference_truth(args):
    cfg = _load(args)
    truth = ex.compute_reference_truth(cfg, args.workers)
    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / "truth.json").write_text(json.dumps(truth_payload(truth, cfg), indent=2, sort_keys=True))
    print(f"truth = {truth.value:.10g} (SE {truth.se:.3g}, level {truth.level}, "
          f"{truth.replicates} replicates, {truth.source})")


def cmd_run_study(args):
    cfg = _load(args)
    truth = load_truth(args.truth, cfg) if args.truth else None
    t0 = time.perf_counter()
    res = ex.cost_mse_study(cfg, args.workers, truth=truth)
    timing = {"total_s": time.perf_counter() - t0, "workers": args.workers}
    path = ex.write_study(res, cfg, _out_dir(cfg), timing=timing)
    print(f"wrote {path} ({len(res.rows)} rows, {res.flagged} flagged)")
    for method, fit in res.slopes.items():
        if fit is None:
            print(f"  {method:18s} slope: n/a (MSE at machine zero)")
        else:
            print(f"  {method:18s} slope {fit['slope']:+.3f}  r2 {fit['r2']:.3f}")
    print(f"  multilevel cheaper at matched MSE: {ex.multilevel_cheaper(res)}")


def cmd_variance_rate(args):
    cfg = _load(args)
    res = ex.estimate_variance_rate(cfg, args.workers)
    path = ex.write_variance_rate(res, cfg, _out_dir(cfg))
    for l, h, v in zip(res.levels, res.h, res.proxy):
        print(f"  level {l}: h = {h:.3g}  N*Var = {v:.4g}")
    if res.degenerate:
        print("beta_hat: degenerate (zero variance at every level)")
    else:
        print(f"beta_hat = {res.beta:.3f} (r2 {res.r2:.3f}); wrote {path}")


def cmd_check_oracle(args):
    import numpy as np

    from . import oracle

    rng = np.random.default_rng(args.seed or 0)
    worst = 0.0
    for _ in range(20):
        worst = max(worst, oracle.telescoping_identity_check(
            oracle.random_model(5, 6, rng), 5))
    bad = oracle.telescoping_identity_check(oracle.random_model(5, 6, rng, invariant=False), 5)
    ok = worst <= 1e-12 and bad > 1e-3
    print(f"telescoping identity: worst invariant residual {worst:.2e}, "
          f"non-invariant residual {bad:.2e} -> {'ok' if ok else 'FAIL'}")
    return 0 if ok else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="mlsmc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("config", help="TOML experiment configuration")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="base seed (u64)")

    p = sub.add_parser("run-study", help="cost vs MSE study")
    common(p)
    p.add_argument("--truth", default=None, help="frozen truth.json to reuse")
    p.set_defaults(func=cmd_run_study)
    p = sub.add_parser("variance-rate", help="empirical variance rate beta")
    common(p)
    p.set_defaults(func=cmd_variance_rate)
    p = sub.add_parser("reference-truth", help="reference value of Z_L/Z_0")
    common(p)
    p.set_defaults(func=cmd_reference_truth)
    p = sub.add_parser("check-oracle", help="exact telescoping-identity check")
    common(p, config=False)
    p.set_defaults(func=cmd_check_oracle)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("--seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    try:
        rc = args.func(args)
    except (ConfigError, ex.StudyError, ex.TruthError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return rc or 0


if __name__ == "__main__":
    sys.exit(main())
