#!/usr/bin/env python3
"""Regret-growth experiment for the GP-LCB outer loop on a known objective.

Minimizes (f - 0.3)^2 on [0, 1] with a known optimum across several seeds
and fits the growth exponent of cumulative regret over the second half of
each run. Sublinear growth (exponent well below 1) is the desk-scale face
of the sqrt(T) cumulative-regret bound.
"""

import argparse

import numpy as np

from safeval.bo import gp_ucb_minimize, regret_growth_fit


def parse_args():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--target", type=float, default=0.3)
    return p.parse_args()


def main():
    args = parse_args()
    objective = lambda x, t: float((x[0] - args.target) ** 2)
    print(f"{'seed':>4} {'best f':>10} {'best loss':>12} {'R_T':>10} {'exponent':>9}")
    exponents = []
    for seed in range(args.seeds):
        res = gp_ucb_minimize(
            objective,
            dimension=1,
            iterations=args.iters,
            seed=seed,
            reference_optimum=0.0,
        )
        exponent = regret_growth_fit(res.regret)
        exponents.append(exponent)
        print(
            f"{seed:>4} {res.best_fidelity.values[0]:>10.5f} {res.best_loss:>12.3e} "
            f"{res.regret.cumulative[-1]:>10.4f} {exponent:>9.3f}"
        )
    print(
        f"\nexponent: median {np.median(exponents):.3f}, max {max(exponents):.3f} "
        f"(linear growth would be 1.0)"
    )
    print(f"sublinear (<= 0.8) in {sum(e <= 0.8 for e in exponents)}/{args.seeds} seeds")


if __name__ == "__main__":
    main()
