#!/usr/bin/env python3
"""Plot CSV output from `scalegraph shard-size` or `scalegraph failure-prob`.

    python3 tools/plot.py failure_prob.csv -o failure_prob.png
    python3 tools/plot.py shard_size.csv --x N

The file type is recognised from its header.
"""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402


def plot_shard_size(df, ax):
    ok = df[df["status"] == "ok"]
    for (F, f), group in ok.groupby(["F", "f"]):
        ax.plot(group["N"], group["r"], marker="o", label=f"F={F:g}, f<{f}")
    ax.set_xlabel("network size N")
    ax.set_ylabel("required shard size r")


def plot_failure_prob(df, ax, x):
    other = "m" if x == "r" else "r"
    for value, group in df.groupby(other):
        group = group.sort_values(x)
        line = ax.errorbar(group[x], group["probability"], yerr=group["stderr"], marker="o",
                           label=f"observed, {other}={value}")
        ax.plot(group[x], group["analytic_N_over_r"], linestyle="--", color=line[0].get_color(),
                label=f"analytic m=N/r, {other}={value}")
    ax.set_yscale("log")
    ax.set_xlabel("shard size r" if x == "r" else "shard count m")
    ax.set_ylabel("failure probability")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("csv")
    parser.add_argument("-o", "--out", help="image file (default: CSV name with .png)")
    parser.add_argument("--x", default=None, help="x axis for failure-prob files: r or m")
    args = parser.parse_args()

    df = pd.read_csv(args.csv)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    if "status" in df.columns:
        plot_shard_size(df, ax)
    else:
        x = args.x or ("r" if df["r"].nunique() > 1 else "m")
        plot_failure_prob(df, ax, x)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize="small")
    fig.tight_layout()
    out = args.out or args.csv.rsplit(".", 1)[0] + ".png"
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
