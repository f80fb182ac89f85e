"""Empirical variance rate of the level potentials.

    python scripts/variance_rate.py [configs/desk_study.toml] [--workers 4]
"""
import argparse
from pathlib import Path

from mlsmc import experiments as ex
from mlsmc.config import load_config

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("config", nargs="?", default=ROOT / "configs" / "desk_study.toml")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default=ROOT / "results" / "variance_rate")
    args = ap.parse_args()

    cfg = load_config(args.config)
    res = ex.estimate_variance_rate(cfg, args.workers)
    ex.write_variance_rate(res, cfg, args.out)
    for l, h, v in zip(res.levels, res.h, res.proxy):
        print(f"level {l}  h {h:.3e}  N*Var(eta^N(G)) {v:.4e}")
    print("degenerate" if res.degenerate else f"beta_hat {res.beta:.3f}  r2 {res.r2:.4f}")


if __name__ == "__main__":
    main()
