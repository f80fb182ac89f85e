"""Cost vs MSE desk study on the elliptic inverse problem.

Uses the frozen reference value when it matches the config, otherwise
computes it (slow).  Writes study.csv / study.json and prints a summary.

    python scripts/desk_study.py [--workers 4] [--out results/desk_study]
"""
import argparse
from pathlib import Path

from mlsmc import experiments as ex
from mlsmc.cli import load_truth
from mlsmc.config import ConfigError, load_config

ROOT = Path(__file__).resolve().parent.parent
FROZEN = ROOT / "tests" / "fixtures" / "desk_study_truth.json"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("config", nargs="?", default=ROOT / "configs" / "desk_study.toml")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default=ROOT / "results" / "desk_study")
    args = ap.parse_args()

    cfg = load_config(args.config)
    truth = None
    if FROZEN.exists():
        try:
            truth = load_truth(FROZEN, cfg)
        except ConfigError:
            pass   # frozen value belongs to another config
    res = ex.cost_mse_study(cfg, args.workers, truth=truth)
    ex.write_study(res, cfg, args.out)

    print(f"truth {res.truth.value:.6f} (SE {res.truth.se:.2g}, level {res.truth.level})")
    print(f"{'method':18s} {'eps':>9s} {'L':>2s} {'MSE':>10s} {'median cost':>12s}")
    for s in res.summary:
        print(f"{s['method']:18s} {s['epsilon']:9.5f} {s['L']:2d} {s['mse']:10.3e} {s['median_cost']:12.0f}")
    for m, fit in res.slopes.items():
        print(f"slope {m}: {fit['slope']:+.3f}" if fit else f"slope {m}: n/a")
    print("multilevel cheaper at matched MSE:", ex.multilevel_cheaper(res))
    for e in res.extra_level:
        print(f"telescoped gamma_{e['level']}(1) from the eps={e['epsilon']:g} runs: mean {e['mean']:.6f}")


if __name__ == "__main__":
    main()
