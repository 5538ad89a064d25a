"""Trajectory discrepancy and the aggregate outer-loop objective.

The pairwise discrepancy is the time-averaged squared error

    mse(high, low) = (1/D) * integral_0^D |high(t) - low(t)|^2 dt

with |.| the Euclidean norm across channels, D the common duration, and the
integral discretized by the trapezoidal rule on the high-fidelity grid (the
low trajectory is first linearly resampled onto that grid). The aggregate
objective sums the pairwise discrepancy over every (task, parameter)
simulation pair plus any extra environment configurations (e.g. inner-loop
counterexamples) supplied by the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import (
    EnvironmentConfig,
    FidelitySetting,
    InvalidArgumentError,
    Seed,
    SimulationDivergedError,
    Task,
    Trajectory,
    split_seed,
)
from .sim import SimulatorSpec, simulate_high, simulate_low

__all__ = ["LossValue", "AggregateLossResult", "mse_loss", "aggregate_loss"]

# Mean squared trajectory discrepancy; finite and nonnegative.
LossValue = float


def mse_loss(high: Trajectory, low: Trajectory) -> LossValue:
    """Time-averaged squared Euclidean distance between two trajectories."""
    if set(high.channels) != set(low.channels):
        raise InvalidArgumentError(
            f"channel sets differ: {sorted(high.channels)} vs {sorted(low.channels)}"
        )
    t0 = max(high.start_time, low.start_time)
    t1 = min(high.end_time, low.end_time)
    if not t1 > t0:
        raise InvalidArgumentError(
            f"trajectories do not overlap in time ([{high.start_time}, {high.end_time}] "
            f"vs [{low.start_time}, {low.end_time}])"
        )
    times = high.times()
    mask = (times >= t0 - 1e-12) & (times <= t1 + 1e-12)
    grid = times[mask]
    if len(grid) < 2:
        raise InvalidArgumentError("overlap contains fewer than 2 high-fidelity samples")
    low_times = low.times()
    sq = np.zeros(len(grid))
    for name in high.channels:
        h = high.channel(name)[mask]
        l = np.interp(grid, low_times, low.channel(name))
        sq += (h - l) ** 2
    duration = float(grid[-1] - grid[0])
    value = float(np.trapezoid(sq, grid) / duration)
    return value


@dataclass(frozen=True)
class AggregateLossResult:
    """Sum and per-evaluation mean of the pairwise trajectory losses."""

    total: LossValue
    pair_count: int
    per_task: tuple[tuple[str, float], ...]

    @property
    def mean(self) -> float:
        return self.total / self.pair_count if self.pair_count else 0.0


def aggregate_loss(
    spec: SimulatorSpec,
    f: FidelitySetting,
    tasks: Sequence[Task],
    extra_configs: Sequence[EnvironmentConfig] = (),
    seed: Seed = 0,
    weights: Mapping[str, float] | None = None,
    high_cache: dict[tuple[str, int], Trajectory] | None = None,
) -> AggregateLossResult:
    """Summed high/low discrepancy over all task parameters plus extras.

    Each (task i, parameter j) pair contributes
    ``w_i * mse_loss(high(p_ij), low(p_ij, f))``; ``extra_configs`` contribute
    the same summand with weight 1 under the pseudo-task id ``"extra"``.
    Per-(i, j) seeds are derived from ``seed`` so results are reproducible,
    and ``high_cache`` (keyed by (task id, j), with ("extra", k) for extras)
    lets a driver reuse the fidelity-independent high-fidelity runs.

    Simulation failures are re-raised with the offending pair identified.
    """
    if not tasks and not extra_configs:
        raise InvalidArgumentError("aggregate_loss needs at least one task or extra config")
    weights = dict(weights or {})
    per_task: list[tuple[str, float]] = []
    pair_losses: list[float] = []

    def one_pair(task_id: str, j: int, cfg: EnvironmentConfig, w: float) -> float:
        pair_seed = split_seed(seed, task_id, j)
        key = (task_id, j)
        try:
            if high_cache is not None and key in high_cache:
                high = high_cache[key]
            else:
                high = simulate_high(spec, cfg, pair_seed)
                if high_cache is not None:
                    high_cache[key] = high
            low = simulate_low(spec, cfg, f, pair_seed)
        except SimulationDivergedError as exc:
            raise SimulationDivergedError(
                f"simulation failed for task {task_id!r}, parameter index {j}: {exc}"
            ) from exc
        return w * mse_loss(high, low)

    for task in tasks:
        w = float(weights.get(task.id, 1.0))
        subtotal = math.fsum(
            one_pair(task.id, j, cfg, w) for j, cfg in enumerate(task.sampled_params)
        )
        per_task.append((task.id, subtotal))
        pair_losses.append(subtotal)
    if extra_configs:
        subtotal = math.fsum(
            one_pair("extra", k, cfg, 1.0) for k, cfg in enumerate(extra_configs)
        )
        per_task.append(("extra", subtotal))
        pair_losses.append(subtotal)

    n_pairs = sum(len(t.sampled_params) for t in tasks) + len(extra_configs)
    return AggregateLossResult(
        total=math.fsum(pair_losses), pair_count=n_pairs, per_task=tuple(per_task)
    )
