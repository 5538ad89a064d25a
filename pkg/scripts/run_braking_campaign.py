#!/usr/bin/env python3
"""Run a joint falsification + fidelity-tuning campaign on the braking benchmark.

Writes result.json, events.jsonl, a markdown report, and the CSV bundles
into the output directory. Rerunning with the same seed reproduces
result.json byte for byte.
"""

import argparse
from pathlib import Path

from safeval.bo import BetaSchedule
from safeval.campaign import (
    AdaptiveBudgetPolicy,
    CampaignConfig,
    report,
    run_joint,
)
from safeval.falsify import FalsifyBudget


def parse_args():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="out/braking-campaign", help="output directory")
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--iters", type=int, default=20, help="outer iterations")
    p.add_argument("--tasks", type=int, default=2)
    p.add_argument("--per-task", type=int, default=3)
    p.add_argument("--inner-budget", type=int, default=256)
    p.add_argument("--adaptive-scale", type=float, default=1.0,
                   help="GP-uncertainty scaling of the inner budget (0 disables)")
    return p.parse_args()


def main():
    args = parse_args()
    config = CampaignConfig(
        simulator="braking",
        task_count=args.tasks,
        params_per_task=args.per_task,
        outer_iterations=args.iters,
        master_seed=args.seed,
        falsify_budget=FalsifyBudget(max_evaluations=args.inner_budget, population=64),
        beta_schedule=BetaSchedule(delta=0.1, grid_size=512),
        budget_policy=AdaptiveBudgetPolicy(
            base_budget=args.inner_budget, scale=args.adaptive_scale
        ),
        analysis_pairs=60,
    )
    out = Path(args.out)
    result = run_joint(config, output_dir=out)

    (out / "report.md").write_text(report(result, "markdown"))
    for name, text in report(result, "csv").items():
        (out / name).write_text(text)

    print(f"best fidelity : {[round(v, 4) for v in result.best_fidelity]}")
    print(f"best loss     : {result.best_loss:.6g}")
    print(f"counterexamples: {len(result.counterexamples)}")
    for c in result.counterexamples:
        print(f"  t={c.found_at:2d} rho={c.robustness:9.4f} e={[round(v, 3) for v in c.values]}")
    print(f"simulator calls: {result.totals['high_calls']} high / {result.totals['low_calls']} low")
    print(f"outputs in {out}/")


if __name__ == "__main__":
    main()
