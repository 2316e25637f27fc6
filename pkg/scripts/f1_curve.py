"""Macro-F1 versus action budget for each agent, plus the label-permutation null.

    python scripts/f1_curve.py --config configs/default.json [--plot curve.png]

Prints a text table; ``--plot`` needs matplotlib (not a package dependency).
"""

import argparse
import dataclasses

import numpy as np

from bmc_ama.config import load_config
from bmc_ama.evaluation import build_corpus, sweep_action_budget


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default="configs/default.json")
    p.add_argument("--plot", default=None)
    p.add_argument("--no-null", action="store_true", help="skip the shuffled-label baseline")
    args = p.parse_args()

    cfg = load_config(args.config)
    corpus = build_corpus(cfg.corpus, cfg.world, cfg.seed)
    curves = {a.name: sweep_action_budget(corpus, a, cfg.analyzer, cfg.sweep) for a in cfg.agents}
    if not args.no_null:
        null_sweep = dataclasses.replace(cfg.sweep, shuffle_labels=True)
        curves["null (shuffled labels)"] = sweep_action_budget(corpus, cfg.agents[0], cfg.analyzer, null_sweep)

    names = list(curves)
    print("budget  " + "  ".join(f"{n[:18]:>18s}" for n in names))
    for j in range(cfg.sweep.n_max):
        cells = [f"{curves[n].mean[j]:.3f} ± {curves[n].std[j]:.3f}" for n in names]
        print(f"{j + 1:>6d}  " + "  ".join(f"{c:>18s}" for c in cells))
    print(f"chance level 1/F = {1.0 / corpus.n_families:.3f}")

    if args.plot:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        fig, ax = plt.subplots(figsize=(6, 4))
        for n in names:
            sr = curves[n]
            ax.errorbar(sr.budgets, sr.mean, yerr=sr.std, label=n, capsize=2)
        ax.axhline(1.0 / corpus.n_families, ls=":", c="grey")
        ax.set_xlabel("analyzer actions")
        ax.set_ylabel("macro-F1 (linear SVM)")
        ax.set_ylim(0, 1.02)
        ax.legend()
        fig.tight_layout()
        fig.savefig(args.plot, dpi=120)
        print(f"saved {args.plot}")


if __name__ == "__main__":
    main()
