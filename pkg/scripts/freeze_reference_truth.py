"""Compute the desk-study reference value once and freeze it for the tests.

    python scripts/freeze_reference_truth.py [--workers 4]
"""
import argparse
import json
import time
from pathlib import Path

from mlsmc import experiments as ex
from mlsmc.cli import truth_payload
from mlsmc.config import load_config

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=ROOT / "configs" / "desk_study.toml")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--dest", default=ROOT / "tests" / "fixtures" / "desk_study_truth.json")
    args = ap.parse_args()

    cfg = load_config(args.config)
    t0 = time.perf_counter()
    truth = ex.compute_reference_truth(cfg, args.workers)
    payload = truth_payload(truth, cfg)
    payload["seconds"] = round(time.perf_counter() - t0, 1)
    Path(args.dest).parent.mkdir(parents=True, exist_ok=True)
    Path(args.dest).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"{truth.value:.10g} +- {truth.se:.3g} at level {truth.level} -> {args.dest}")


if __name__ == "__main__":
    main()
