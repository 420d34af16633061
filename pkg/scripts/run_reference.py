"""Run the learner and the uniform baseline on the pinned reference instance.

Writes both regret traces to --out and prints sublinearity ratios plus the
final-half growth of the baseline relative to the learner.
"""

import argparse
from pathlib import Path

import numpy as np

from stackrl import config as cfgmod
from stackrl.harness import run_experiment, summarize, write_csv

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--episodes", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", type=Path, default=Path("runs/reference"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    overrides = [f"experiment.episodes={args.episodes}", f"experiment.seed={args.seed}"]
    curves = {}
    for name, cfg_file in (("softmax", "reference.cfg"), ("uniform", "reference_uniform.cfg")):
        cfg = cfgmod.load(CONFIGS / cfg_file, overrides).experiment()
        records = run_experiment(cfg)
        write_csv(records, args.out / f"{name}.csv")
        curves[name] = {
            "k": np.array([r.k for r in records]),
            "leader_cum": np.array([r.leader_cum for r in records]),
            "follower_cum": np.array([r.follower_cum for r in records]),
        }
        s = summarize(curves[name])
        print(f"{name:8s} leader cum {s['leader_cum']:9.3f} ratio {s['leader_ratio']:.3f}   "
              f"follower cum {s['follower_cum']:9.3f} ratio {s['follower_ratio']:.3f}")

    half = args.episodes // 2
    for who in ("leader", "follower"):
        grow = {n: c[f"{who}_cum"][-1] - c[f"{who}_cum"][half - 1] for n, c in curves.items()}
        print(f"{who}: baseline grows {grow['uniform'] / grow['softmax']:.2f}x faster over the final half")


if __name__ == "__main__":
    main()
