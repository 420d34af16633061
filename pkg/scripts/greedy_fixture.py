"""Marginal-q discrepancy of a greedy vs soft-max follower on two nearby Q tables, over a grid of alpha_f."""

import argparse

from stackrl.harness import greedy_failure_fixture


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--M", type=float, default=10.0)
    ap.add_argument("--eps", type=float, default=0.01)
    args = ap.parse_args()

    print(f"greedy discrepancy: {greedy_failure_fixture(args.M, args.eps).greedy_discrepancy:.6g}")
    print(f"{'alpha_f':>8} {'soft-max':>10} {'eps(1+2aH)':>11} {'eps(1+2a|Q_l|)':>15}")
    for alpha in (0.1, 0.5, 1.0, 2.0, 5.0, 20.0, 100.0):
        r = greedy_failure_fixture(args.M, args.eps, alpha, 1)
        print(f"{alpha:8g} {r.softmax_discrepancy:10.5f} {r.lemma_bound:11.5f} {r.scaled_bound:15.5f}")


if __name__ == "__main__":
    main()
