"""Temperature sweep on the reference instance (alpha_f includes the greedy limit)."""

import argparse
from collections import defaultdict
from pathlib import Path

from stackrl import config as cfgmod
from stackrl.harness import run_sweep, sweep_to_csv

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", type=Path, default=CONFIGS / "temperature_sweep.cfg")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("runs/temperature_sweep.csv"))
    ap.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
    args = ap.parse_args()

    spec = cfgmod.load(args.config, args.set)
    cells = run_sweep(spec.experiment(), spec.sweep, workers=args.workers)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(sweep_to_csv(cells), encoding="utf-8", newline="\n")

    table = defaultdict(dict)
    for c in cells:
        if c.error:
            print(f"cell {c.index} {c.coords}: {c.error}")
            continue
        last = c.records[-1]
        table[c.coords.get("alpha_l")][c.coords.get("alpha_f")] = (last.leader_cum, last.follower_cum)
    for a_l, row in sorted(table.items()):
        for a_f, (lc, fc) in sorted(row.items()):
            print(f"alpha_l={a_l:<6g} alpha_f={a_f:<6g} leader {lc:8.3f}  follower {fc:8.3f}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
