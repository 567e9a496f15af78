"""Target AUROC as the number of target training normals grows.

    python scripts/nt_sweep.py --nt 10 20 50 100 --out runs/nt_sweep.csv
"""
import argparse
from pathlib import Path

from irad.data import BenchSpec
from irad.pipeline import nt_sweep, write_nt_sweep
from irad.trainer import TrainConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--nt", type=int, nargs="+", default=[10, 20, 50, 100])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--out", default="runs/nt_sweep.csv")
    args = ap.parse_args()

    rows = nt_sweep(args.nt, BenchSpec(), TrainConfig(), seeds=args.seeds)
    for nt, mu, sd, _ in rows:
        print(f"n_t={nt:4d}  auroc {mu:.3f} +/- {sd:.3f}")
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_nt_sweep(args.out, rows)


if __name__ == "__main__":
    main()
