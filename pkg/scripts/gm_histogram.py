#!/usr/bin/env python3
"""Random-state GM binning runs at increasing sample counts, then the
pairwise convergence comparison of the resulting peak-QFI histograms."""
import argparse
from pathlib import Path

from qmetrix.cli import main as qmetrix


def run(out_dir: str, seed: int, exponents: list[int]) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for e in exponents:
        csv = out / f"sample_gm_1e{e}.csv"
        qmetrix(["sample-gm", "--nu", str(10**e), "-N", "3",
                 "--seed", str(seed + e), "--out", str(csv),
                 "--svg", str(out / f"sample_gm_1e{e}.svg")])
        files.append(csv)
    for a, b in zip(files, files[1:]):
        print(f"== convergence {a.name} vs {b.name} ==")
        qmetrix(["sample-gm", "--compare", str(a), str(b)])


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="out/gm_histogram")
    ap.add_argument("--seed", type=int, default=900)
    ap.add_argument("--exponents", type=int, nargs="+", default=[5, 6],
                    help="sample counts as powers of ten (7 is optional, slower)")
    args = ap.parse_args()
    run(args.out_dir, args.seed, args.exponents)
