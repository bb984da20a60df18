"""Draw identified-set bands from `rdx sweep` CSV files.

    rdx sweep --data d.csv --restriction brm --x-star 50 --grid 0:3:0.25 --out brm.csv
    python docs/plot_sweep.py brm.csv bam.csv --out bands.png
"""
import argparse

import matplotlib.pyplot as plt
import pandas as pd


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("csv", nargs="+")
    ap.add_argument("--out", default="sweep.png")
    args = ap.parse_args()

    fig, axes = plt.subplots(1, len(args.csv), figsize=(4 * len(args.csv), 3.5), squeeze=False)
    for ax, path in zip(axes[0], args.csv):
        df = pd.read_csv(path)
        ok = df[df["empty"] == 0]
        ax.vlines(ok["kappa"], ok["lower"], ok["upper"], lw=3)
        ax.axhline(0.0, color="grey", lw=0.8, ls="--")
        ax.set_xlabel("kappa")
        ax.set_title(path)
    axes[0][0].set_ylabel("identified set")
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)


if __name__ == "__main__":
    main()
