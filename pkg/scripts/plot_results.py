"""Plot the step CSVs written by ``gridcollab run --compare``.

    gridcollab run --scenario bundled --compare --out results
    python scripts/plot_results.py results

Writes voltage.png (PCC voltage per method), alpha.png (utilization ratio per
method) and summary.png (F_v^2 and curtailment bars) next to the CSVs.
Needs matplotlib (``pip install -e .[plot]``).
"""

import argparse
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from gridcollab.coordination import ControlMethod
from gridcollab.output import read_steps_csv


def load(out_dir):
    runs = {}
    for m in ControlMethod:
        path = out_dir / f"steps_{m.value}.csv"
        if path.exists():
            runs[m] = read_steps_csv(path.read_text())
    return runs


def per_agent(runs, field, ylabel, path):
    agents = next(iter(runs.values()))[0]
    fig, axes = plt.subplots(len(agents), 1, figsize=(9, 3 * len(agents)), sharex=True, squeeze=False)
    for j, aid in enumerate(agents):
        ax = axes[j, 0]
        for m, (_, rec) in runs.items():
            hours = np.array([r.time for r in rec]) / 3600
            ax.plot(hours, [getattr(r, field)[j] for r in rec], label=m.label, lw=1)
        ax.set_title(aid)
        ax.set_ylabel(ylabel)
        ax.grid(alpha=0.3)
    axes[0, 0].legend(ncol=5, fontsize=8)
    axes[-1, 0].set_xlabel("hour of day")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def summary(out_dir, path):
    cmp = json.loads((out_dir / "comparison.json").read_text())["methods"]
    names = list(cmp)
    labels = [cmp[n]["label"] for n in names]
    agents = list(cmp[names[0]]["agents"])
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(11, 4))
    a1.bar(labels, [cmp[n]["fv_sum_then_square"] for n in names])
    a1.set_ylabel("F_v^2")
    width = 0.8 / len(agents)
    x = np.arange(len(names))
    for j, aid in enumerate(agents):
        pct = [cmp[n]["agents"][aid].get("curtailment_pct") or 0.0 for n in names]
        a2.bar(x + j * width, pct, width, label=aid)
    a2.set_xticks(x + width * (len(agents) - 1) / 2, labels)
    a2.set_ylabel("active power curtailed (%)")
    a2.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out_dir", type=Path)
    args = ap.parse_args()
    runs = load(args.out_dir)
    if not runs:
        raise SystemExit(f"no step CSVs in {args.out_dir}")
    per_agent(runs, "v", "voltage (p.u.)", args.out_dir / "voltage.png")
    per_agent(runs, "alpha", "alpha = Q/S", args.out_dir / "alpha.png")
    if (args.out_dir / "comparison.json").exists():
        summary(args.out_dir, args.out_dir / "summary.png")


if __name__ == "__main__":
    main()
