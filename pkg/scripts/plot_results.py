"""Plot a sweep directory written by ``trmoa sweep``.

Usage: python scripts/plot_results.py SWEEP_DIR [--x alpha] [--out plots/]

Draws, per algorithm, mean excessive and unsatisfied regret stacked against
the swept parameter, and mean wall time when timings.csv is present. Needs
matplotlib, which the package itself does not depend on.
"""

import argparse
import csv
import statistics
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("sweep", type=Path)
    p.add_argument("--x", default="alpha", help="results.csv column on the x axis")
    p.add_argument("--out", type=Path, default=Path("plots"))
    args = p.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)

    rows = [r for r in read(args.sweep / "results.csv") if r["status"] == "ok"]
    algos = list(dict.fromkeys(r["algorithm"] for r in rows))
    xs = sorted({float(r[args.x]) for r in rows})
    stats = defaultdict(list)
    for r in rows:
        stats[(r["algorithm"], float(r[args.x]))].append((float(r["excessive"]), float(r["unsatisfied"])))

    fig, axes = plt.subplots(1, len(algos), figsize=(3.2 * len(algos), 3.2), sharey=True, squeeze=False)
    for ax, a in zip(axes[0], algos):
        exc = [statistics.fmean(e for e, _ in stats[(a, x)]) for x in xs]
        uns = [statistics.fmean(u for _, u in stats[(a, x)]) for x in xs]
        labels = [f"{x:g}" for x in xs]
        ax.bar(labels, exc, label="excessive")
        ax.bar(labels, uns, bottom=exc, label="unsatisfied")
        ax.set_title(a)
        ax.set_xlabel(args.x)
    axes[0][0].set_ylabel("mean regret")
    axes[0][0].legend()
    fig.tight_layout()
    fig.savefig(args.out / f"regret_by_{args.x}.png", dpi=120)

    timings = args.sweep / "timings.csv"
    if timings.exists():
        x_of = {(r["cell"], r["rep"], r["algorithm"]): float(r[args.x]) for r in rows}
        wall = defaultdict(list)
        for t in read(timings):
            key = (t["cell"], t["rep"], t["algorithm"])
            if key in x_of:
                wall[(t["algorithm"], x_of[key])].append(float(t["wall_ms"]))
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        for a in algos:
            ax.plot(xs, [statistics.fmean(wall[(a, x)]) for x in xs], marker="o", label=a)
        ax.set_xlabel(args.x)
        ax.set_ylabel("mean wall time (ms)")
        ax.legend()
        fig.tight_layout()
        fig.savefig(args.out / f"runtime_by_{args.x}.png", dpi=120)
    print(f"wrote plots to {args.out}")


if __name__ == "__main__":
    main()
