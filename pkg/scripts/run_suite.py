#!/usr/bin/env python3
"""Train and evaluate the full model roster and write the report files.

Equivalent to `tinyconv report` with explicit knobs; useful as a starting
point for experiment variations.

    python scripts/run_suite.py --out out/ --seed 0
    python scripts/run_suite.py --quantity temperature --include-sequence
"""

import argparse
import sys
import time
from pathlib import Path

from tinyconv import evaluation, oracle
from tinyconv.evaluation import EvalConfig


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quantity", action="append", choices=oracle.QUANTITIES)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--datasets", type=int, default=10)
    ap.add_argument("--length", type=int, default=1000)
    ap.add_argument("--model-seeds", type=int, default=5)
    ap.add_argument("--include-sequence", action="store_true")
    ap.add_argument("--out", default="out")
    args = ap.parse_args()

    calib = oracle.default_calibration()
    cfg = EvalConfig(sequence_length=args.length, dataset_count=args.datasets,
                     seeds=args.model_seeds, master_seed=args.seed)
    quantities = args.quantity or list(oracle.QUANTITIES)
    include = True if args.include_sequence else None

    t0 = time.time()
    report = evaluation.run_suite(quantities, cfg, calib, include_sequence=include)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    evaluation.write_report_csv(report.records, out / "report.csv")
    evaluation.write_report_json(report, out / "report.json")
    evaluation.write_plot_data(report.records, out / "plot_data.csv")

    for rec in report.records:
        marker = " [frontier]" if rec.pareto else ""
        print(f"{rec.quantity:11s} {rec.model:24s} nRMSE={rec.norm_rmse:10.4g} "
              f"cost={rec.cost:7.1f} flash={rec.flash_bytes:5d}B "
              f"ram={rec.ram_bytes:5d}B{marker}")
    for f in report.failures:
        print(f"FAILED {f['quantity']}/{f['model']}: {f['error']}", file=sys.stderr)
    print(f"\n{len(report.records)} records in {time.time() - t0:.0f}s "
          f"-> {out / 'report.csv'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
