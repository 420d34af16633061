"""Regenerate the pinned reference model file and its golden regret curve.

Only needed if the generator changes; both files are checked in.
"""

import argparse
from pathlib import Path

from stackrl import config as cfgmod
from stackrl.env import random_tabular_mdp, save_model
from stackrl.harness import run_experiment, write_csv

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--model-only", action="store_true")
    args = ap.parse_args()
    save_model(random_tabular_mdp(2, 2, 2, 3, seed=0, reward_low=-1.0), ROOT / "configs" / "reference.model")
    if not args.model_only:
        cfg = cfgmod.load(ROOT / "configs" / "reference.cfg").experiment()
        write_csv(run_experiment(cfg), ROOT / "tests" / "golden" / "reference_regret.csv")


if __name__ == "__main__":
    main()
