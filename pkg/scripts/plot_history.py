"""Plot the augmented Lagrangian and volume error against outer iterations.

Reads one or more ``*_history.csv`` files written by the runners and saves a PNG.
"""
import argparse
import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def load(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [float(r["lagrangian"]) for r in rows], [abs(float(r["W"])) for r in rows]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("csv", nargs="+")
    ap.add_argument("--out", default="history.png")
    args = ap.parse_args()
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    for path in args.csv:
        L, W = load(path)
        label = path.rsplit("/", 1)[-1].replace("_history.csv", "")
        ax1.plot(L, label=label)
        ax2.semilogy(W, label=label)
    ax1.set(xlabel="outer iteration", ylabel="augmented Lagrangian")
    ax2.set(xlabel="outer iteration", ylabel="|W|")
    ax1.legend()
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
