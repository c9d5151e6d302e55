"""Best-observed curves of the transfer arms.

    python docs/plots/transfer.py runs/transfer -o transfer.png
"""

import argparse
from pathlib import Path

import matplotlib.pyplot as plt
import pandas as pd

ap = argparse.ArgumentParser()
ap.add_argument("run", type=Path)
ap.add_argument("-o", "--out", default="transfer.png")
args = ap.parse_args()

df = pd.read_csv(args.run / "comparison.csv", comment="#")
fig, ax = plt.subplots(figsize=(6, 4))
for col in df.columns[1:]:
    pct = col.removeprefix("best_mix")
    ax.plot(df["iteration"], df[col], label=f"{pct}% fresh")
ax.set_xlabel("search evaluation")
ax.set_ylabel("best geometric-mean rate (Mbps)")
ax.legend()
fig.tight_layout()
fig.savefig(args.out, dpi=150)
