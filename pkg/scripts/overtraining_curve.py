"""Target AUROC against training epoch, long schedule, several seeds.

    python scripts/overtraining_curve.py --epochs 200 --seeds 0 1 2 3 4 --out runs/curve
"""
import argparse
import time
from dataclasses import replace
from pathlib import Path

from irad.data import BenchSpec
from irad.pipeline import overtraining_curve, write_curve
from irad.trainer import TrainConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--epochs", type=int, default=200)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--every", type=int, default=1, help="evaluate AUROC every N epochs")
    ap.add_argument("--out", default="runs/curve")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    print("seed  peak_epoch  peak_auroc  selected_epoch  selected_auroc  final_auroc  seconds")
    for seed in args.seeds:
        t0 = time.perf_counter()
        c = overtraining_curve(BenchSpec(), replace(TrainConfig(), epochs=args.epochs, seed=seed), every=args.every)
        write_curve(out / f"curve_seed{seed}.csv", c)
        print(
            f"{seed:4d}  {c.peak_epoch:10d}  {max(c.auroc):10.4f}  {c.selected_epoch:14d}"
            f"  {c.selected_auroc:14.4f}  {c.final_auroc:11.4f}  {time.perf_counter() - t0:7.1f}",
            flush=True,
        )


if __name__ == "__main__":
    main()
