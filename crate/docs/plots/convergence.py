"""Best-so-far geo-mean rate of one or more optimize runs.

    python docs/plots/convergence.py runs/iterative runs/turbo --baseline 0.49 -o convergence.png
"""

import argparse
from pathlib import Path

import matplotlib.pyplot as plt
import pandas as pd

ap = argparse.ArgumentParser()
ap.add_argument("runs", nargs="+", type=Path)
ap.add_argument("--baseline", type=float, help="baseline geo-mean in Mbps")
ap.add_argument("-o", "--out", default="convergence.png")
args = ap.parse_args()

fig, ax = plt.subplots(figsize=(6, 4))
for run in args.runs:
    df = pd.read_csv(run / "convergence.csv", comment="#")
    ax.plot(df["eval_index"], df["best_kpi"], label=run.name)
if args.baseline:
    ax.axhline(args.baseline, color="k", ls="--", lw=1, label="baseline")
ax.set_xlabel("evaluation")
ax.set_ylabel("best geometric-mean rate (Mbps)")
ax.legend()
fig.tight_layout()
fig.savefig(args.out, dpi=150)
