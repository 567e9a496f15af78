"""IRAD against raw Isolation Forest baselines on the default benchmark.

    python scripts/benchmark_table.py --seeds 0 1 2 3 4
"""
import argparse
import time

import numpy as np

from irad.data import BenchSpec
from irad.pipeline import run_once
from irad.trainer import TrainConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    args = ap.parse_args()

    rows = []
    t0 = time.perf_counter()
    print("seed   irad  if_raw_t  if_raw_st")
    for seed in args.seeds:
        r = run_once(BenchSpec(), TrainConfig(seed=seed, epochs=args.epochs), baselines=True)
        rows.append((r.auroc, r.baselines["if_raw_t"], r.baselines["if_raw_st"]))
        print(f"{seed:4d}  {rows[-1][0]:.3f}  {rows[-1][1]:8.3f}  {rows[-1][2]:9.3f}", flush=True)
    a = np.array(rows)
    print(f"mean  {a[:, 0].mean():.3f}  {a[:, 1].mean():8.3f}  {a[:, 2].mean():9.3f}")
    print(f"sd    {a[:, 0].std():.3f}  {a[:, 1].std():8.3f}  {a[:, 2].std():9.3f}")
    print(f"{time.perf_counter() - t0:.0f}s total")


if __name__ == "__main__":
    main()
