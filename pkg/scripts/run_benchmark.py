"""Run the full selection + classifier benchmark on a CSV and print the table.

Selections are compared against the reference subsets reported for the CDC
diabetes survey, so the overlap column is only meaningful on that file.

    python3 scripts/run_benchmark.py --input diabetes_012_health_indicators_BRFSS2015.csv --out-dir results/
"""

import argparse
import json
import logging
import time
from pathlib import Path

from tailsel.dataprep import binarize_target, load_csv
from tailsel.evaluation import run_benchmark

REFERENCE = {
    "a2": ["GenHlth", "HighBP", "BMI", "DiffWalk", "HighChol"],
    "mi": ["HighBP", "GenHlth", "AnyHealthcare", "PhysActivity", "CholCheck"],
    "ga": ["HighBP", "HighChol", "BMI", "NoDocbcCost", "GenHlth"],
}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--input", required=True)
    ap.add_argument("--target", default=None)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--k", type=int, default=5)
    ap.add_argument("--estimator", choices=["tau", "mle"], default="tau")
    ap.add_argument("--repeats", type=int, default=20)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out-dir", default=None)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    t0 = time.perf_counter()
    data = binarize_target(load_csv(args.input, args.target))
    report = run_benchmark(data, seed=args.seed, k=args.k, estimator=args.estimator,
                           repeats=args.repeats, threads=args.threads)
    elapsed = time.perf_counter() - t0

    print(report.to_text())
    print()
    for name, ref in REFERENCE.items():
        got = report.selections[name]["selected"]
        print(f"{name:>3}: {got}  overlap with reference {len(set(got) & set(ref))}/{len(ref)}")
    print(f"wall time {elapsed:.1f} s")

    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        doc = report.to_dict()
        doc["wall_seconds"] = elapsed
        (out / "benchmark.json").write_text(json.dumps(doc, indent=2, default=float))
        (out / "benchmark.txt").write_text(report.to_text())
        (out / "importance.csv").write_text(report.importance_csv())


if __name__ == "__main__":
    main()
