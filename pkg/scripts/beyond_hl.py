#!/usr/bin/env python3
"""Entropy sweeps past one e-bit for d = 3, 4, 5 with quadratic fits.

The quadratic fit uses the direct stddev ordinate; pass --ordinate
inv_square to fit stddev**(-2) instead.
"""
import argparse
import math
from pathlib import Path

from qmetrix.cli import main as qmetrix


def run(out_dir: str, seed: int, ordinate: str) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for d in (3, 4, 5):
        top = math.log2(d)
        csv = out / f"sweep_entropy_d{d}.csv"
        qmetrix(["sweep", "-N", "2", "--d", str(d), "--spectrum", "spin",
                 "--measure", "entropy", "--grid", f"1.0:0.1:{top:.10f}",
                 "--seed", str(seed + d), "--restarts", "3", "--out", str(csv)])
        qmetrix(["fit", "--family", "quadratic", "--ordinate", ordinate,
                 "--in", str(csv), "--out", str(out / f"fit_quadratic_d{d}.json")])


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="out/beyond_hl")
    ap.add_argument("--seed", type=int, default=77)
    ap.add_argument("--ordinate", default="direct", choices=["direct", "inv_square"])
    args = ap.parse_args()
    run(args.out_dir, args.seed, args.ordinate)
