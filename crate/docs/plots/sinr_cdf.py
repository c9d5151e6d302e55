"""SINR CDFs of GUEs and UAVs, baseline against an optimized decision.

    python docs/plots/sinr_cdf.py runs/baseline runs/turbo -o sinr.png

The first directory is read as an evaluate run (sinr_cdf_*.csv), the
second as an optimize run (best_sinr_cdf_*.csv).
"""

import argparse
from pathlib import Path

import matplotlib.pyplot as plt
import pandas as pd

ap = argparse.ArgumentParser()
ap.add_argument("baseline", type=Path)
ap.add_argument("optimized", type=Path)
ap.add_argument("-o", "--out", default="sinr_cdf.png")
args = ap.parse_args()

fig, ax = plt.subplots(figsize=(6, 4))
for kind, color in [("GUE", "tab:blue"), ("UAV", "tab:red")]:
    for path, ls, tag in [
        (args.baseline / f"sinr_cdf_{kind}.csv", "--", "baseline"),
        (args.optimized / f"best_sinr_cdf_{kind}.csv", "-", "optimized"),
    ]:
        if path.exists():
            df = pd.read_csv(path, comment="#")
            ax.step(df["sinr_db"], df["cdf"], where="post", color=color, ls=ls, label=f"{kind} {tag}")
ax.axvline(-5, color="gray", lw=0.8)
ax.set_xlabel("SINR (dB)")
ax.set_ylabel("CDF")
ax.legend()
fig.tight_layout()
fig.savefig(args.out, dpi=150)
