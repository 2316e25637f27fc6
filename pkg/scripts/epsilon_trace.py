"""Per-step epsilon of each controller on one sample, averaged over analysis seeds."""

import argparse
import dataclasses

import numpy as np

from bmc_ama.analyzer import analyze_sample
from bmc_ama.config import load_config
from bmc_ama.evaluation import build_corpus


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--config", default="configs/default.json")
    p.add_argument("--sample", type=int, default=0)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--seeds", type=int, default=20)
    args = p.parse_args()

    cfg = load_config(args.config)
    m = build_corpus(cfg.corpus, cfg.world, cfg.seed).samples[args.sample]
    print(f"sample {m.sample_id} (family {m.family_id}), {len(m.manifest)} intents")
    for agent in cfg.agents:
        an = dataclasses.replace(cfg.analyzer, max_actions=args.steps, controller=agent.controller)
        eps = np.array([[s.epsilon for s in analyze_sample(m, dataclasses.replace(an, seed=k)).steps]
                        for k in range(args.seeds)])
        marks = [0, 4, 9, 19, args.steps - 1]
        shown = "  ".join(f"t={t + 1}:{eps[:, t].mean():.3f}" for t in marks if t < args.steps)
        print(f"{agent.name:<20s} {shown}")


if __name__ == "__main__":
    main()
