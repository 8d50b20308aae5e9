#!/usr/bin/env python3
"""Analytic ceiling curves and optimizer cross-checks for two-qudit probes.

Writes one CSV per measure with the closed-form curve, and one CSV per
local dimension with the optimizer's sweep over the same grid, for
side-by-side plotting.
"""
import argparse
from pathlib import Path

from qmetrix.cli import main as qmetrix


def run(out_dir: str, seed: int) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    qmetrix(["law", "--measure", "ggm", "--grid", "0:0.05:0.5",
             "--out", str(out / "law_ggm.csv"), "--svg", str(out / "law_ggm.svg")])
    qmetrix(["law", "--measure", "entropy", "--grid", "0:0.1:1.0",
             "--out", str(out / "law_entropy.csv")])
    for d in (2, 3, 4, 5):
        spectrum = "pauliz" if d == 2 else "spin"
        qmetrix(["sweep", "-N", "2", "--d", str(d), "--spectrum", spectrum,
                 "--measure", "ggm", "--grid", "0:0.05:0.5",
                 "--seed", str(seed + d), "--restarts", "2",
                 "--out", str(out / f"optimized_ggm_d{d}.csv")])


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="out/bipartite")
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()
    run(args.out_dir, args.seed)
