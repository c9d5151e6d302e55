"""Overlay of the Pareto fronts written by a pareto run.

    python docs/plots/pareto.py runs/pareto -o fronts.png
"""

import argparse
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

ap = argparse.ArgumentParser()
ap.add_argument("run", type=Path)
ap.add_argument("-o", "--out", default="pareto.png")
args = ap.parse_args()

fig, ax = plt.subplots(figsize=(6, 4))
for path in sorted(args.run.glob("archive_*.csv")):
    df = pd.read_csv(path, comment="#").sort_values("uav_coverage")
    # plot 1 - coverage on a log axis so the nines separate
    miss = np.clip(1.0 - df["uav_coverage"], 1e-4, None)
    ax.step(miss, df["gue_geo_mean_mbps"], where="pre", marker="o", label=path.stem.removeprefix("archive_"))
ax.set_xscale("log")
ax.invert_xaxis()
ax.set_xlabel("UAV outage (1 - coverage)")
ax.set_ylabel("GUE geometric-mean rate (Mbps)")
ax.legend()
fig.tight_layout()
fig.savefig(args.out, dpi=150)
