"""Run the default 500-seed sweep and print the envelope of the bound
against the squared Frobenius norm of R^T R.

    python3 scripts/run_sweep.py --out runs/default [--seeds 500]
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from hessbound.experiment import ExperimentConfig, _norm_columns, run_experiment, write_report


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", type=Path, required=True)
    ap.add_argument("--seeds", type=int, default=500)
    ap.add_argument("--lr", type=float, default=ExperimentConfig.learning_rate)
    args = ap.parse_args(argv)

    cfg = ExperimentConfig(seeds=args.seeds, learning_rate=args.lr, trajectory_seeds=5)

    def progress(seed, result):
        if seed % 50 == 0:
            print(f"seed {seed}: {type(result).__name__}", file=sys.stderr)

    report = run_experiment(cfg, progress)
    write_report(report, args.out)
    summary = report.summary()
    summary.pop("unique_seeds")
    print(json.dumps(summary, indent=2))

    lam = np.array([p.spectrum.lambda_sup for p in report.survivors])
    _, _, rtr = _norm_columns(report)
    if lam.size >= 8:
        edges = np.quantile(rtr, np.linspace(0, 1, 9))
        bins = np.clip(np.searchsorted(edges, rtr, side="right") - 1, 0, 7)
        print("lower envelope by octile of ||R^T R||_F^2:",
              " ".join(f"{lam[bins == b].min():.2f}" for b in range(8)))


if __name__ == "__main__":
    main()
