"""Loss ablations: AUROC and cross-domain cosine per variant and seed.

Writes ablation_report.csv and one pca_2d_<variant>.csv per variant (last seed).

    python scripts/ablation_study.py --out runs/ablation
"""
import argparse
from pathlib import Path

import numpy as np

from irad.data import BenchSpec
from irad.pipeline import run_ablation, write_ablation_reports
from irad.trainer import VARIANTS, TrainConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--variants", nargs="+", default=list(VARIANTS))
    ap.add_argument("--out", default="runs/ablation")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    print("variant   seed  auroc  cosine")
    for v in args.variants:
        for seed in args.seeds:
            r = run_ablation(v, BenchSpec(), TrainConfig(seed=seed))
            reports.append(r)
            print(f"{v:9s} {seed:4d}  {r.auroc:.3f}  {r.cross_cosine:.4f}", flush=True)
        mine = [r for r in reports if r.variant == v]
        print(f"{v:9s} mean  {np.mean([r.auroc for r in mine]):.3f}  {np.mean([r.cross_cosine for r in mine]):.4f}")
    write_ablation_reports(out, reports)


if __name__ == "__main__":
    main()
