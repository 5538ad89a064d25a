"""Empirical estimators and planners for the framework's guarantees.

This module turns the framework's smoothness, sensitivity, sample-complexity
and convergence statements into things that run:

* Lipschitz constants of the robustness landscape (in the environment and in
  the fidelity directions) and of the trajectory-discrepancy loss, estimated
  as the maximum observed slope over sampled pairs plus tight near-pairs.
* A finite-difference sensitivity operator for the optimal counterexample's
  robustness with respect to fidelity knobs, and the finite-difference
  gradient of the aggregate outer loss.
* The Hoeffding per-iteration sample bound n >= (2 L^2 / eps^2) * ln(2/delta)
  and the total-sample accounting product N = n * K1 * K2.
* A best-so-far stationarity check used as the convergence diagnostic for
  both optimization loops.

All estimators refuse to run with the observation-noise knob active unless
an averaging repeat count is supplied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    EnvironmentConfig,
    FidelitySetting,
    InvalidArgumentError,
    Seed,
    Task,
    Trajectory,
    latin_hypercube_unit,
    rng_from_seed,
    split_seed,
)
from .falsify import FalsifyBudget, falsify
from .loss import aggregate_loss, mse_loss
from .sim import SimulatorSpec, simulate_batch, simulate_batch_multi_f
from .stl import SafetySpec, robustness

__all__ = [
    "LipschitzEstimate",
    "SensitivityReport",
    "SampleComplexityPlan",
    "ConvergenceReport",
    "estimate_lipschitz_env",
    "estimate_lipschitz_fidelity",
    "estimate_lipschitz_loss",
    "sensitivity",
    "outer_loss_gradient",
    "hoeffding_n",
    "total_samples",
    "sample_complexity_plan",
    "convergence_report",
]

_NEAR_PAIR_DISTANCE = 1e-3


@dataclass(frozen=True)
class LipschitzEstimate:
    """Maximum observed slope over sampled pairs."""

    constant: float
    pairs_used: int
    max_pair: tuple[tuple[float, ...], tuple[float, ...]]

    def __post_init__(self) -> None:
        if not (self.constant >= 0 and math.isfinite(self.constant)):
            raise InvalidArgumentError("Lipschitz constant must be finite and >= 0")


@dataclass(frozen=True)
class SensitivityReport:
    """Finite-difference sensitivity of the best counterexample to fidelity knobs.

    The counterexample is frozen at the stencil center; ``total_derivative``
    additionally re-falsifies at the stencil points when requested, exposing
    the difference between the frozen-point and total variations.
    """

    fidelity: tuple[float, ...]
    gradient: tuple[float, ...]
    step: float
    method: str
    boundary_clipped: tuple[bool, ...]
    base_config: tuple[float, ...]
    base_robustness: float
    total_derivative: tuple[float, ...] | None = None


@dataclass(frozen=True)
class SampleComplexityPlan:
    """Hoeffding-derived per-iteration sample count and total budget."""

    epsilon: float
    delta: float
    lipschitz: float
    n_per_iteration: int
    K1: int
    K2: int
    total_samples: int

    def __post_init__(self) -> None:
        if self.total_samples != self.n_per_iteration * self.K1 * self.K2:
            raise InvalidArgumentError("total_samples must equal n * K1 * K2")


@dataclass(frozen=True)
class ConvergenceReport:
    """Best-so-far stationarity over a trailing window."""

    converged: bool
    gap: float
    window: int


# ---------------------------------------------------------------------------
# Robustness evaluation helpers
# ---------------------------------------------------------------------------


def _repeat_seeds(seed: Seed, repeats: int | None) -> list[Seed]:
    return [split_seed(seed, "rep", k) for k in range(repeats or 1)]


def _noise_active(spec: SimulatorSpec, f_rows: np.ndarray) -> bool:
    mapping = spec.fidelity_mapping
    if mapping.noise_knob is None:
        return False
    return any(mapping.noise_scale(row) > 1e-15 for row in f_rows)


def _force_noise_off(spec: SimulatorSpec, f_rows: np.ndarray) -> np.ndarray:
    if spec.fidelity_mapping.noise_knob is None:
        return f_rows
    rows = f_rows.copy()
    rows[:, spec.fidelity_mapping.noise_knob] = 1.0
    return rows


def _rho_rows(
    spec: SimulatorSpec,
    phi: SafetySpec,
    e_values: np.ndarray,
    f_rows: np.ndarray,
    seed: Seed,
    repeats: int | None,
) -> np.ndarray:
    """Mean robustness for each (e, f) row; errors out on diverged items."""
    if _noise_active(spec, f_rows) and repeats is None:
        raise InvalidArgumentError(
            "the noise knob is active; supply a repeats count for averaging"
        )
    n = e_values.shape[0]
    total = np.zeros(n)
    seeds = _repeat_seeds(seed, repeats)
    single_f = np.all(f_rows == f_rows[0])
    for rep in seeds:
        if single_f:
            f = spec.fidelity_space.setting(f_rows[0])
            samples, ok = simulate_batch(spec, e_values, f, [rep] * n)
        else:
            samples, ok = simulate_batch_multi_f(spec, e_values, f_rows, [rep] * n)
        if not ok.all():
            bad = int(np.flatnonzero(~ok)[0])
            raise InvalidArgumentError(
                f"simulation diverged during estimation at e={e_values[bad].tolist()}"
            )
        for i in range(n):
            traj = Trajectory(0.0, spec.base_dt, spec.channels, samples[i])
            total[i] += robustness(phi, traj)
    return total / len(seeds)


def _paired_points(
    lower: np.ndarray, upper: np.ndarray, pairs: int, seed: Seed
) -> tuple[np.ndarray, np.ndarray]:
    """``pairs`` point pairs: half far apart (space-filling), half tight near-pairs."""
    dim = len(lower)
    width = upper - lower
    n_far = pairs // 2
    n_near = pairs - n_far
    a_rows: list[np.ndarray] = []
    b_rows: list[np.ndarray] = []
    if n_far:
        far = lower + latin_hypercube_unit(dim, 2 * n_far, split_seed(seed, "far")) * width
        a_rows.append(far[0::2])
        b_rows.append(far[1::2])
    if n_near:
        base = lower + latin_hypercube_unit(dim, n_near, split_seed(seed, "near")) * width
        rng = rng_from_seed(split_seed(seed, "near-dir"))
        direction = rng.standard_normal((n_near, dim))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        partner = base + _NEAR_PAIR_DISTANCE * direction
        flip = (partner < lower) | (partner > upper)
        partner = np.where(flip, base - _NEAR_PAIR_DISTANCE * direction, partner)
        partner = np.clip(partner, lower, upper)
        a_rows.append(base)
        b_rows.append(partner)
    return np.vstack(a_rows), np.vstack(b_rows)


def _max_slope(
    a: np.ndarray, b: np.ndarray, va: np.ndarray, vb: np.ndarray
) -> LipschitzEstimate:
    dist = np.linalg.norm(a - b, axis=1)
    usable = dist > 1e-15
    if not usable.any():
        raise InvalidArgumentError("all sampled pairs are degenerate (zero distance)")
    ratios = np.abs(va[usable] - vb[usable]) / dist[usable]
    idx_usable = np.flatnonzero(usable)
    best = int(idx_usable[np.argmax(ratios)])
    return LipschitzEstimate(
        constant=float(np.max(ratios)),
        pairs_used=int(usable.sum()),
        max_pair=(tuple(float(v) for v in a[best]), tuple(float(v) for v in b[best])),
    )


def estimate_lipschitz_env(
    spec: SimulatorSpec,
    phi: SafetySpec,
    f: FidelitySetting,
    pairs: int,
    seed: Seed,
    repeats: int | None = None,
) -> LipschitzEstimate:
    """Max slope of robustness between environment points at fixed fidelity."""
    if pairs < 10:
        raise InvalidArgumentError("pairs must be >= 10")
    space = spec.environment_space
    a, b = _paired_points(space.lower_array(), space.upper_array(), pairs, seed)
    f_rows = np.tile(f.as_array(), (len(a), 1))
    va = _rho_rows(spec, phi, a, f_rows, split_seed(seed, "eval"), repeats)
    vb = _rho_rows(spec, phi, b, f_rows, split_seed(seed, "eval"), repeats)
    return _max_slope(a, b, va, vb)


def estimate_lipschitz_fidelity(
    spec: SimulatorSpec,
    phi: SafetySpec,
    e: EnvironmentConfig,
    pairs: int,
    seed: Seed,
    repeats: int | None = None,
) -> LipschitzEstimate:
    """Max slope of robustness between fidelity settings at a fixed environment.

    The observation-noise knob (when the simulator has one) is forced to its
    off position in every sampled setting, so the slope reflects the
    deterministic fidelity mechanisms.
    """
    if pairs < 10:
        raise InvalidArgumentError("pairs must be >= 10")
    dim = spec.fidelity_space.dimension
    a, b = _paired_points(np.zeros(dim), np.ones(dim), pairs, seed)
    a = _force_noise_off(spec, a)
    b = _force_noise_off(spec, b)
    e_rows = np.tile(e.as_array(), (len(a), 1))
    va = _rho_rows(spec, phi, e_rows, a, split_seed(seed, "eval"), repeats)
    vb = _rho_rows(spec, phi, e_rows, b, split_seed(seed, "eval"), repeats)
    return _max_slope(a, b, va, vb)


def _sup_norm(x: np.ndarray) -> float:
    return float(np.max(np.abs(x)))


def _smooth_offset(shape: tuple[int, int], times: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Random constant-plus-sinusoid perturbation per channel."""
    channels, _ = shape
    const = rng.normal(0.0, 0.25, size=(channels, 1))
    amp = rng.normal(0.0, 0.25, size=(channels, 1))
    phase = rng.uniform(0.0, 2.0 * np.pi, size=(channels, 1))
    period = times[-1] - times[0] if times[-1] > times[0] else 1.0
    wave = np.sin(2.0 * np.pi * times[None, :] / period + phase)
    return const + amp * wave


def _loss_pair_ratios(
    spec: SimulatorSpec, tasks: Sequence[Task], pairs: int, seed: Seed
) -> list[tuple[float, tuple[float, ...], tuple[float, ...]]]:
    """(ratio, config, fidelity) per sampled pair; degenerate pairs skipped.

    Base trajectory pairs cycle through the tasks' parameters at random
    noise-free fidelity settings (all simulations batched); each is
    compared against a smoothly perturbed copy of itself (high side, low
    side, or both).
    """
    configs = [cfg for task in tasks for cfg in task.sampled_params]
    dim_f = spec.fidelity_space.dimension
    e_rows = np.array([configs[k % len(configs)].as_array() for k in range(pairs)])
    f_rows = _force_noise_off(
        spec, latin_hypercube_unit(dim_f, pairs, split_seed(seed, "fid"))
    )
    pair_seeds = [split_seed(seed, "pair", k) for k in range(pairs)]
    highs, ok_h = simulate_batch(spec, e_rows, None, pair_seeds)
    lows, ok_l = simulate_batch_multi_f(spec, e_rows, f_rows, pair_seeds)
    if not (ok_h.all() and ok_l.all()):
        raise InvalidArgumentError("simulation diverged while sampling trajectory pairs")
    rng = rng_from_seed(split_seed(seed, "perturb"))
    times = spec.grid_times()
    out = []
    for k in range(pairs):
        high1 = Trajectory(0.0, spec.base_dt, spec.channels, highs[k])
        low1 = Trajectory(0.0, spec.base_dt, spec.channels, lows[k])
        mode = k % 3  # perturb high, low, or both
        dh = _smooth_offset(high1.samples.shape, times, rng) if mode != 1 else 0.0
        dl = _smooth_offset(low1.samples.shape, times, rng) if mode != 0 else 0.0
        high2 = Trajectory(high1.start_time, high1.dt, high1.channels, high1.samples + dh)
        low2 = Trajectory(low1.start_time, low1.dt, low1.channels, low1.samples + dl)
        denom = _sup_norm(high1.samples - high2.samples) + _sup_norm(low1.samples - low2.samples)
        if denom <= 1e-15:
            continue
        ratio = abs(mse_loss(high1, low1) - mse_loss(high2, low2)) / denom
        out.append(
            (ratio, tuple(float(v) for v in e_rows[k]), tuple(float(v) for v in f_rows[k]))
        )
    return out


def estimate_lipschitz_loss(
    spec: SimulatorSpec,
    tasks: Sequence[Task],
    pairs: int,
    seed: Seed,
) -> LipschitzEstimate:
    """Max ratio of loss change to summed sup-norm trajectory change."""
    if pairs < 10:
        raise InvalidArgumentError("pairs must be >= 10")
    if not tasks:
        raise InvalidArgumentError("estimate_lipschitz_loss needs at least one task")
    ratios = _loss_pair_ratios(spec, tasks, pairs, seed)
    if not ratios:
        raise InvalidArgumentError("all trajectory pairs were identical")
    best_ratio, cfg, fid = max(ratios, key=lambda r: r[0])
    return LipschitzEstimate(constant=best_ratio, pairs_used=len(ratios), max_pair=(cfg, fid))


# ---------------------------------------------------------------------------
# Sensitivity / gradients
# ---------------------------------------------------------------------------


def _stencil(f: np.ndarray, h: float) -> tuple[list[tuple[int, np.ndarray, np.ndarray, bool]], bool]:
    """Per-dimension (dim, plus, minus, clipped) stencil clipped to [0, 1]."""
    entries = []
    any_clipped = False
    for k in range(len(f)):
        plus = f.copy()
        minus = f.copy()
        clipped = False
        if f[k] + h <= 1.0 and f[k] - h >= 0.0:
            plus[k] += h
            minus[k] -= h
        elif f[k] + h > 1.0:
            minus[k] -= h  # backward one-sided at the upper boundary
            clipped = True
        else:
            plus[k] += h  # forward one-sided at the lower boundary
            clipped = True
        any_clipped = any_clipped or clipped
        entries.append((k, plus, minus, clipped))
    return entries, any_clipped


def sensitivity(
    spec: SimulatorSpec,
    phi: SafetySpec,
    f: FidelitySetting,
    h: float,
    falsify_budget: FalsifyBudget,
    seed: Seed,
    repeats: int | None = None,
    refalsify: bool = False,
) -> SensitivityReport:
    """Central-difference sensitivity of the falsified robustness to fidelity.

    Falsifies once at ``f``, freezes the returned counterexample, and probes
    ``rho(e*, f +/- h u_k)`` per knob (one-sided at the box boundary). With
    ``refalsify=True`` the stencil points are falsified as well and the
    resulting total-derivative estimate is reported alongside.
    """
    if h <= 0.0:
        raise InvalidArgumentError("step h must be > 0")
    inner = falsify(spec, phi, f, falsify_budget, split_seed(seed, "falsify"))
    e_star = inner.best_config
    f0 = f.as_array()
    entries, _ = _stencil(f0, h)
    rows = []
    for _, plus, minus, _ in entries:
        rows.append(plus)
        rows.append(minus)
    f_rows = np.array(rows)
    e_rows = np.tile(e_star.as_array(), (len(f_rows), 1))
    if _noise_active(spec, f_rows) and repeats is None:
        raise InvalidArgumentError(
            "sensitivity stencil activates the noise knob; supply a repeats count"
        )
    rho = _rho_rows(spec, phi, e_rows, f_rows, split_seed(seed, "stencil"), repeats)
    gradient = []
    clipped_flags = []
    for i, (k, plus, minus, clipped) in enumerate(entries):
        dplus, dminus = rho[2 * i], rho[2 * i + 1]
        gradient.append((dplus - dminus) / float(plus[k] - minus[k]))
        clipped_flags.append(clipped)

    total = None
    if refalsify:
        totals = []
        for i, (k, plus, minus, _) in enumerate(entries):
            rp = falsify(
                spec,
                phi,
                spec.fidelity_space.setting(plus),
                falsify_budget,
                split_seed(seed, "falsify"),
            ).best_robustness
            rm = falsify(
                spec,
                phi,
                spec.fidelity_space.setting(minus),
                falsify_budget,
                split_seed(seed, "falsify"),
            ).best_robustness
            totals.append((rp - rm) / float(plus[k] - minus[k]))
        total = tuple(totals)

    return SensitivityReport(
        fidelity=tuple(float(v) for v in f0),
        gradient=tuple(float(g) for g in gradient),
        step=float(h),
        method="central",
        boundary_clipped=tuple(clipped_flags),
        base_config=tuple(e_star.values),
        base_robustness=float(inner.best_robustness),
        total_derivative=total,
    )


def outer_loss_gradient(
    spec: SimulatorSpec,
    tasks: Sequence[Task],
    f: FidelitySetting,
    h: float,
    seed: Seed,
) -> tuple[float, ...]:
    """Central finite difference of the aggregate loss per fidelity dimension.

    Requires deterministic losses: the noise knob must be off at ``f``
    itself. One-sided differences are used at the box boundary; a stencil
    probe along the noise knob may activate an O(h) noise scale, which is
    evaluated at fixed seeds so the result stays reproducible.
    """
    if h <= 0.0:
        raise InvalidArgumentError("step h must be > 0")
    if not tasks:
        raise InvalidArgumentError("outer_loss_gradient needs at least one task")
    f0 = f.as_array()
    if _noise_active(spec, f0[None, :]):
        raise InvalidArgumentError(
            "outer_loss_gradient requires the noise knob off at f"
        )
    entries, _ = _stencil(f0, h)
    cache: dict = {}
    eval_seed = split_seed(seed, "grad")

    def loss_at(values: np.ndarray) -> float:
        setting = spec.fidelity_space.setting(values)
        return aggregate_loss(spec, setting, tasks, seed=eval_seed, high_cache=cache).total

    gradient = []
    for k, plus, minus, _ in entries:
        gradient.append((loss_at(plus) - loss_at(minus)) / float(plus[k] - minus[k]))
    return tuple(float(g) for g in gradient)


# ---------------------------------------------------------------------------
# Sample complexity / convergence
# ---------------------------------------------------------------------------


def hoeffding_n(L: float, epsilon: float, delta: float, L_alt: float | None = None) -> int:
    """Per-iteration samples so the empirical estimate is eps-accurate w.p. 1-delta.

    ``ceil((2 L^2 / eps^2) * ln(2 / delta))``; with ``L_alt`` supplied the
    larger of the two resulting bounds is returned.
    """
    if L < 0:
        raise InvalidArgumentError("L must be >= 0")
    if epsilon <= 0:
        raise InvalidArgumentError("epsilon must be > 0")
    if not 0 < delta <= 2:
        raise InvalidArgumentError("delta must lie in (0, 2]")
    n = math.ceil((2.0 * L * L / (epsilon * epsilon)) * math.log(2.0 / delta))
    n = max(n, 0)
    if L_alt is not None:
        n = max(n, hoeffding_n(L_alt, epsilon, delta))
    return int(n)


def total_samples(n: int, K1: int, K2: int) -> int:
    """Total simulation budget n * K1 * K2 for nested loops of K1 and K2 iterations."""
    for name, v in (("n", n), ("K1", K1), ("K2", K2)):
        if int(v) != v or v < 0:
            raise InvalidArgumentError(f"{name} must be a nonnegative integer")
    result = int(n) * int(K1) * int(K2)
    if result > 2**63 - 1:
        raise OverflowError("total sample count exceeds the 64-bit range")
    return result


def sample_complexity_plan(
    epsilon: float,
    delta: float,
    lipschitz: float,
    K1: int,
    K2: int,
    lipschitz_alt: float | None = None,
) -> SampleComplexityPlan:
    """Assemble the Hoeffding n with observed loop lengths into one plan."""
    n = hoeffding_n(lipschitz, epsilon, delta, L_alt=lipschitz_alt)
    return SampleComplexityPlan(
        epsilon=float(epsilon),
        delta=float(delta),
        lipschitz=float(max(lipschitz, lipschitz_alt or 0.0)),
        n_per_iteration=n,
        K1=int(K1),
        K2=int(K2),
        total_samples=total_samples(n, K1, K2),
    )


def convergence_report(trace: Sequence[float], window: int, tol: float) -> ConvergenceReport:
    """Converged iff the best-so-far value moved at most ``tol`` over the last ``window``."""
    if window < 2:
        raise InvalidArgumentError("window must be >= 2")
    if len(trace) < window:
        raise InvalidArgumentError(f"trace length {len(trace)} shorter than window {window}")
    best = np.minimum.accumulate(np.asarray(trace, dtype=float))
    gap = float(best[-window] - best[-1])
    return ConvergenceReport(converged=gap <= tol, gap=gap, window=int(window))
