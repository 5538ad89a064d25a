"""Joint nested-optimization driver, persistence, and reporting.

One campaign iteration selects a fidelity setting with the outer GP-LCB
loop, runs the inner falsifier at that setting with a budget scaled by the
GP's predictive uncertainty (exploration-weighted inner effort), evaluates
the aggregate high/low discrepancy over the sampled tasks plus every
counterexample found so far, and feeds the loss back into the GP. Events
stream to a JSONL log (the only place timestamps appear); the final result
is a single schema-versioned JSON document whose bytes depend only on the
configuration and master seed.
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Any

import numpy as np

from .analysis import (
    convergence_report,
    estimate_lipschitz_env,
    estimate_lipschitz_fidelity,
    estimate_lipschitz_loss,
    sample_complexity_plan,
)
from .bo import BetaSchedule, UcbMinimizer
from .core import (
    EnvironmentSpace,
    InvalidArgumentError,
    SchemaVersionError,
    Seed,
    Task,
    sample_uniform,
    split_seed,
)
from .falsify import FalsificationFailedError, FalsifyBudget, falsify
from .loss import aggregate_loss
from .sim import (
    CALL_COUNTER,
    SimulatorSpec,
    external_simulator_spec,
    get_benchmark,
    simulate_high,
)
from .stl import parse_spec

__all__ = [
    "SCHEMA_VERSION",
    "AdaptiveBudgetPolicy",
    "CampaignConfig",
    "IterationRecord",
    "CounterexampleRecord",
    "CampaignResult",
    "resolve_simulator",
    "sample_tasks",
    "run_joint",
    "save_result",
    "load_result",
    "report",
]

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class AdaptiveBudgetPolicy:
    """Exploration-weighted inner-loop budgets.

    The inner falsifier at iteration t receives
    ``round(base_budget * (1 + scale * sigma_t / sigma_ref))`` evaluations,
    where ``sigma_ref`` is the largest predictive stddev seen so far
    (floored at ``sigma_threshold``). Budgets are nondecreasing in
    ``sigma_t`` and never fall below the falsifier's population size.
    """

    base_budget: int = 256
    scale: float = 1.0
    sigma_threshold: float = 1e-3

    def __post_init__(self) -> None:
        if self.base_budget < 4:
            raise InvalidArgumentError("base_budget must be >= 4")
        if self.scale < 0:
            raise InvalidArgumentError("scale must be >= 0")
        if self.sigma_threshold <= 0:
            raise InvalidArgumentError("sigma_threshold must be > 0")

    def budget_at(self, sigma: float, sigma_ref: float, minimum: int) -> int:
        ref = max(sigma_ref, self.sigma_threshold)
        frac = max(float(sigma), 0.0) / ref
        budget = int(round(self.base_budget * (1.0 + self.scale * frac)))
        return max(budget, minimum)


@dataclass(frozen=True)
class CampaignConfig:
    """Everything a joint campaign needs; JSON-serializable and validated.

    ``params_per_task`` is either one count shared by every task or a list
    with one count per task.
    """

    simulator: str | dict[str, Any]
    task_count: int
    params_per_task: int | tuple[int, ...]
    outer_iterations: int
    master_seed: Seed
    safety_spec: str | None = None
    falsify_budget: FalsifyBudget = field(
        default_factory=lambda: FalsifyBudget(max_evaluations=256)
    )
    beta_schedule: BetaSchedule = field(default_factory=BetaSchedule)
    budget_policy: AdaptiveBudgetPolicy = field(default_factory=AdaptiveBudgetPolicy)
    counterexample_cap: int = 32
    task_weights: dict[str, float] | None = None
    analysis_pairs: int = 40
    analysis_epsilon: float = 0.1
    analysis_delta: float = 0.05
    convergence_window: int = 5
    convergence_tol: float = 1e-6
    output_dir: str | None = None

    def __post_init__(self) -> None:
        if self.task_count < 1:
            raise InvalidArgumentError("task_count must be >= 1")
        if isinstance(self.params_per_task, (list, tuple)):
            object.__setattr__(self, "params_per_task", tuple(int(m) for m in self.params_per_task))
            if len(self.params_per_task) != self.task_count:
                raise InvalidArgumentError("params_per_task list must have one entry per task")
            if any(m < 1 for m in self.params_per_task):
                raise InvalidArgumentError("every per-task parameter count must be >= 1")
        elif self.params_per_task < 1:
            raise InvalidArgumentError("params_per_task must be >= 1")
        if self.outer_iterations < 1:
            raise InvalidArgumentError("outer_iterations must be >= 1")
        if self.counterexample_cap < 1:
            raise InvalidArgumentError("counterexample_cap must be >= 1")
        if self.analysis_pairs < 10:
            raise InvalidArgumentError("analysis_pairs must be >= 10")

    def to_dict(self) -> dict[str, Any]:
        return {
            "simulator": self.simulator,
            "safety_spec": self.safety_spec,
            "task_count": self.task_count,
            "params_per_task": self.params_per_task,
            "outer_iterations": self.outer_iterations,
            "master_seed": self.master_seed,
            "falsify_budget": dataclasses.asdict(self.falsify_budget),
            "beta_schedule": dataclasses.asdict(self.beta_schedule),
            "budget_policy": dataclasses.asdict(self.budget_policy),
            "counterexample_cap": self.counterexample_cap,
            "task_weights": self.task_weights,
            "analysis_pairs": self.analysis_pairs,
            "analysis_epsilon": self.analysis_epsilon,
            "analysis_delta": self.analysis_delta,
            "convergence_window": self.convergence_window,
            "convergence_tol": self.convergence_tol,
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "CampaignConfig":
        known = {
            "simulator",
            "safety_spec",
            "task_count",
            "params_per_task",
            "outer_iterations",
            "master_seed",
            "falsify_budget",
            "beta_schedule",
            "budget_policy",
            "counterexample_cap",
            "task_weights",
            "analysis_pairs",
            "analysis_epsilon",
            "analysis_delta",
            "convergence_window",
            "convergence_tol",
            "output_dir",
        }
        unknown = set(data) - known
        if unknown:
            raise InvalidArgumentError(f"unknown campaign config fields: {sorted(unknown)}")
        kwargs: dict[str, Any] = dict(data)
        if "falsify_budget" in kwargs:
            kwargs["falsify_budget"] = FalsifyBudget(**kwargs["falsify_budget"])
        if "beta_schedule" in kwargs:
            kwargs["beta_schedule"] = BetaSchedule(**kwargs["beta_schedule"])
        if "budget_policy" in kwargs:
            kwargs["budget_policy"] = AdaptiveBudgetPolicy(**kwargs["budget_policy"])
        return cls(**kwargs)

    @classmethod
    def from_json_file(cls, path: str | Path) -> "CampaignConfig":
        raw = Path(path).read_text()
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise InvalidArgumentError(
                f"config file {path} is not valid JSON at byte offset {exc.pos}: {exc.msg}"
            ) from exc
        return cls.from_dict(data)


def resolve_simulator(simulator: str | dict[str, Any]) -> SimulatorSpec:
    """Turn a config's simulator field into a SimulatorSpec.

    Strings name built-in benchmarks; dicts describe an external adapter:
    ``{"id", "adapter", "environment": {"lower", "upper", "names"},
    "fidelity_dimension", "channels", "base_dt", "duration", "safety_spec"}``.
    """
    if isinstance(simulator, str):
        return get_benchmark(simulator)
    required = {"id", "adapter", "environment", "fidelity_dimension", "channels", "base_dt", "duration"}
    missing = required - set(simulator)
    if missing:
        raise InvalidArgumentError(f"external simulator config missing fields: {sorted(missing)}")
    env = simulator["environment"]
    space = EnvironmentSpace(
        lower=tuple(env["lower"]), upper=tuple(env["upper"]), names=tuple(env.get("names", ()))
    )
    return external_simulator_spec(
        sim_id=simulator["id"],
        adapter=simulator["adapter"],
        environment_space=space,
        fidelity_dimension=int(simulator["fidelity_dimension"]),
        channels=tuple(simulator["channels"]),
        base_dt=float(simulator["base_dt"]),
        duration=float(simulator["duration"]),
        safety_spec=simulator.get("safety_spec"),
    )


@dataclass(frozen=True)
class IterationRecord:
    t: int
    fidelity: tuple[float, ...]
    sigma: float
    inner_budget: int
    inner_evaluations: int
    inner_iterations: int
    inner_sim_calls: int
    inner_trace: tuple[float, ...]
    e_star: tuple[float, ...] | None
    rho_star: float | None
    counterexample_found: bool
    falsification_failed: bool
    loss: float
    loss_mean: float
    pair_count: int
    high_calls: int
    low_calls: int
    regret: float
    cumulative_regret: float


@dataclass(frozen=True)
class CounterexampleRecord:
    values: tuple[float, ...]
    robustness: float
    found_at: int


@dataclass(frozen=True)
class CampaignResult:
    config: CampaignConfig
    best_fidelity: tuple[float, ...]
    best_loss: float
    iterations: tuple[IterationRecord, ...]
    counterexamples: tuple[CounterexampleRecord, ...]
    regret_reference: float
    regret_reference_is_proxy: bool
    totals: dict[str, int]
    analysis: dict[str, Any]
    convergence: dict[str, Any]
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": self.schema_version,
            "config": self.config.to_dict(),
            "best_fidelity": list(self.best_fidelity),
            "best_loss": self.best_loss,
            "iterations": [
                {
                    **dataclasses.asdict(rec),
                    "fidelity": list(rec.fidelity),
                    "inner_trace": list(rec.inner_trace),
                    "e_star": None if rec.e_star is None else list(rec.e_star),
                }
                for rec in self.iterations
            ],
            "counterexamples": [
                {**dataclasses.asdict(c), "values": list(c.values)} for c in self.counterexamples
            ],
            "regret_reference": self.regret_reference,
            "regret_reference_is_proxy": self.regret_reference_is_proxy,
            "totals": dict(self.totals),
            "analysis": self.analysis,
            "convergence": self.convergence,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "CampaignResult":
        known = {
            "schema_version",
            "config",
            "best_fidelity",
            "best_loss",
            "iterations",
            "counterexamples",
            "regret_reference",
            "regret_reference_is_proxy",
            "totals",
            "analysis",
            "convergence",
        }
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise SchemaVersionError(
                f"result schema version {version!r} is not supported; this build "
                f"reads version {SCHEMA_VERSION}"
            )
        unknown = set(data) - known
        if unknown:
            raise SchemaVersionError(
                f"result contains unknown fields {sorted(unknown)}; it was likely "
                f"written by a newer schema than version {SCHEMA_VERSION}"
            )
        iterations = tuple(
            IterationRecord(
                **{
                    **rec,
                    "fidelity": tuple(rec["fidelity"]),
                    "inner_trace": tuple(rec["inner_trace"]),
                    "e_star": None if rec["e_star"] is None else tuple(rec["e_star"]),
                }
            )
            for rec in data["iterations"]
        )
        counterexamples = tuple(
            CounterexampleRecord(**{**c, "values": tuple(c["values"])})
            for c in data["counterexamples"]
        )
        return cls(
            config=CampaignConfig.from_dict(data["config"]),
            best_fidelity=tuple(data["best_fidelity"]),
            best_loss=data["best_loss"],
            iterations=iterations,
            counterexamples=counterexamples,
            regret_reference=data["regret_reference"],
            regret_reference_is_proxy=data["regret_reference_is_proxy"],
            totals=dict(data["totals"]),
            analysis=data["analysis"],
            convergence=data["convergence"],
            schema_version=version,
        )


def _dump_json(data: dict[str, Any]) -> str:
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def save_result(result: CampaignResult, path: str | Path) -> None:
    Path(path).write_text(_dump_json(result.to_dict()))


def load_result(path: str | Path) -> CampaignResult:
    raw = Path(path).read_text()
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise InvalidArgumentError(
            f"result file {path} is not valid JSON at byte offset {exc.pos}: {exc.msg}"
        ) from exc
    return CampaignResult.from_dict(data)


class _EventLog:
    """Append-only JSONL event stream; the sole home of wall-clock timestamps."""

    def __init__(self, path: Path | None):
        self._fh: IO[str] | None = None
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = path.open("w")

    def emit(self, event: str, **payload: Any) -> None:
        if self._fh is None:
            return
        record = {"event": event, "timestamp": time.time(), **payload}
        self._fh.write(json.dumps(record, sort_keys=True) + "\n")
        self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def sample_tasks(
    spec: SimulatorSpec, count: int, params_per_task: int | tuple[int, ...], seed: Seed
) -> list[Task]:
    """Sample ``count`` tasks with uniform parameter configs each.

    ``params_per_task`` is a shared count or a per-task list of counts.
    """
    if isinstance(params_per_task, (list, tuple)):
        if len(params_per_task) != count:
            raise InvalidArgumentError("params_per_task list must have one entry per task")
        per_task = [int(m) for m in params_per_task]
    else:
        per_task = [int(params_per_task)] * count
    tasks = []
    for i in range(count):
        params = sample_uniform(
            spec.environment_space, per_task[i], split_seed(seed, "task", i)
        )
        tasks.append(
            Task(id=f"task-{i}", parameter_space=spec.environment_space, sampled_params=tuple(params))
        )
    return tasks


def _counter_delta(before: dict[str, int]) -> dict[str, int]:
    after = CALL_COUNTER.snapshot()
    return {k: after[k] - before[k] for k in after}


def run_joint(config: CampaignConfig, output_dir: str | Path | None = None) -> CampaignResult:
    """Run the full nested campaign described by ``config``.

    Persists ``events.jsonl`` (streaming, crash-tolerant) and
    ``result.json`` under the output directory when one is given either
    here or in the config. Rerunning with the same config and master seed
    reproduces ``result.json`` byte for byte.
    """
    out = Path(output_dir) if output_dir is not None else (
        Path(config.output_dir) if config.output_dir else None
    )
    spec = resolve_simulator(config.simulator)
    spec_text = config.safety_spec or spec.safety_spec
    if not spec_text:
        raise InvalidArgumentError(
            f"simulator {spec.id!r} has no safety spec of record; set safety_spec"
        )
    phi = parse_spec(spec_text)
    tasks = sample_tasks(spec, config.task_count, config.params_per_task, config.master_seed)
    events = _EventLog(out / "events.jsonl" if out else None)
    events.emit("start", simulator=spec.id, outer_iterations=config.outer_iterations)

    start_counts = CALL_COUNTER.snapshot()
    totals = {
        "setup_high_calls": 0,
        "inner_low_calls": 0,
        "loss_high_calls": 0,
        "loss_low_calls": 0,
        "analysis_high_calls": 0,
        "analysis_low_calls": 0,
    }

    optimizer = UcbMinimizer(
        dimension=spec.fidelity_space.dimension,
        seed=split_seed(config.master_seed, "bo"),
        schedule=config.beta_schedule,
    )
    counterexamples: list[CounterexampleRecord] = []
    extras_high: dict[tuple[float, ...], Any] = {}
    raw_records: list[dict[str, Any]] = []
    losses: list[float] = []
    sigma_ref = 0.0
    last_inner_trace: tuple[float, ...] = ()

    try:
        # Fidelity-independent ground-truth runs, shared by every outer iteration.
        before = CALL_COUNTER.snapshot()
        high_cache: dict = {}
        for task in tasks:
            for j, cfg in enumerate(task.sampled_params):
                high_cache[(task.id, j)] = simulate_high(
                    spec, cfg, split_seed(config.master_seed, "loss", task.id, j)
                )
        totals["setup_high_calls"] = _counter_delta(before)["high_calls"]

        for t in range(1, config.outer_iterations + 1):
            f_vec = optimizer.suggest(t)
            f = spec.fidelity_space.setting(np.clip(f_vec, 0.0, 1.0))
            _, sigma = optimizer.posterior(f_vec)
            sigma_ref = max(sigma_ref, sigma)
            inner_budget = config.budget_policy.budget_at(
                sigma, sigma_ref, minimum=config.falsify_budget.population
            )
            budget = dataclasses.replace(config.falsify_budget, max_evaluations=inner_budget)

            before = CALL_COUNTER.snapshot()
            falsification_failed = False
            inner_result = None
            try:
                inner_result = falsify(
                    spec, phi, f, budget, split_seed(config.master_seed, "falsify", t)
                )
            except FalsificationFailedError:
                falsification_failed = True
            inner_delta = _counter_delta(before)
            totals["inner_low_calls"] += inner_delta["low_calls"]

            if inner_result is not None and inner_result.counterexample_found:
                counterexamples.append(
                    CounterexampleRecord(
                        values=tuple(inner_result.best_config.values),
                        robustness=float(inner_result.best_robustness),
                        found_at=t,
                    )
                )
                if len(counterexamples) > config.counterexample_cap:
                    worst = max(range(len(counterexamples)), key=lambda i: counterexamples[i].robustness)
                    counterexamples.pop(worst)

            extra_configs = [
                spec.environment_space.config(c.values) for c in counterexamples
            ]
            iter_cache = dict(high_cache)
            for k, cfg in enumerate(extra_configs):
                if tuple(cfg.values) in extras_high:
                    iter_cache[("extra", k)] = extras_high[tuple(cfg.values)]

            before = CALL_COUNTER.snapshot()
            loss_failed = False
            try:
                agg = aggregate_loss(
                    spec,
                    f,
                    tasks,
                    extra_configs=extra_configs,
                    seed=split_seed(config.master_seed, "loss"),
                    weights=config.task_weights,
                    high_cache=iter_cache,
                )
                loss_total, loss_mean, pair_count = agg.total, agg.mean, agg.pair_count
            except Exception as exc:
                loss_failed = True
                loss_total, loss_mean, pair_count = math.inf, math.inf, 0
                events.emit("loss_failure", t=t, message=str(exc))
            loss_delta = _counter_delta(before)
            totals["loss_high_calls"] += loss_delta["high_calls"]
            totals["loss_low_calls"] += loss_delta["low_calls"]
            for k, cfg in enumerate(extra_configs):
                if ("extra", k) in iter_cache:
                    extras_high.setdefault(tuple(cfg.values), iter_cache[("extra", k)])

            optimizer.observe(f_vec, loss_total)
            losses.append(loss_total)
            if inner_result is not None:
                last_inner_trace = inner_result.trace

            raw = {
                "t": t,
                "fidelity": tuple(float(v) for v in f.values),
                "sigma": float(sigma),
                "inner_budget": int(inner_budget),
                "inner_evaluations": 0 if inner_result is None else inner_result.evaluations_used,
                "inner_iterations": 0 if inner_result is None else inner_result.iterations,
                "inner_sim_calls": int(inner_delta["low_calls"]),
                "inner_trace": () if inner_result is None else inner_result.trace,
                "e_star": None if inner_result is None else tuple(inner_result.best_config.values),
                "rho_star": None if inner_result is None else float(inner_result.best_robustness),
                "counterexample_found": bool(
                    inner_result is not None and inner_result.counterexample_found
                ),
                "falsification_failed": falsification_failed,
                "loss": float(loss_total),
                "loss_mean": float(loss_mean),
                "pair_count": int(pair_count),
                "high_calls": int(inner_delta["high_calls"] + loss_delta["high_calls"]),
                "low_calls": int(inner_delta["low_calls"] + loss_delta["low_calls"]),
            }
            raw_records.append(raw)
            events.emit("iteration", **{**raw, "inner_trace": list(raw["inner_trace"]),
                                        "fidelity": list(raw["fidelity"]),
                                        "e_star": None if raw["e_star"] is None else list(raw["e_star"])})
    except Exception as exc:
        events.emit("error", message=f"{type(exc).__name__}: {exc}")
        if out is not None:
            partial = {
                "schema_version": SCHEMA_VERSION,
                "completed": False,
                "config": config.to_dict(),
                "iterations": [
                    {**r, "fidelity": list(r["fidelity"]),
                     "inner_trace": list(r["inner_trace"]),
                     "e_star": None if r["e_star"] is None else list(r["e_star"])}
                    for r in raw_records
                ],
            }
            (out / "result.partial.json").write_text(_dump_json(partial))
        events.close()
        raise

    # Regret against the best observed loss (proxy; the true optimum is unknown).
    finite = [l for l in losses if math.isfinite(l)]
    if not finite:
        events.emit("error", message="every outer evaluation failed")
        events.close()
        raise FalsificationFailedError("every outer loss evaluation failed")
    reference = min(finite)
    best_t = min(range(len(losses)), key=lambda i: (losses[i], i))
    cumulative = 0.0
    records: list[IterationRecord] = []
    for raw in raw_records:
        r_t = raw["loss"] - reference
        cumulative += r_t
        records.append(IterationRecord(**raw, regret=float(r_t), cumulative_regret=float(cumulative)))

    best_fidelity = records[best_t].fidelity
    best_loss = records[best_t].loss

    # Analysis summary at desk scale; estimates run on the noise-free face
    # of the fidelity box so they are deterministic.
    before = CALL_COUNTER.snapshot()
    probe_f_values = np.asarray(best_fidelity, dtype=float)
    if spec.fidelity_mapping.noise_knob is not None:
        probe_f_values[spec.fidelity_mapping.noise_knob] = 1.0
    f_best = spec.fidelity_space.setting(probe_f_values)
    if counterexamples:
        probe_values = min(counterexamples, key=lambda c: c.robustness).values
    else:
        lo, hi = spec.environment_space.lower_array(), spec.environment_space.upper_array()
        probe_values = tuple((lo + hi) / 2.0)
    probe_e = spec.environment_space.config(probe_values)
    lip_env = estimate_lipschitz_env(
        spec, phi, f_best, config.analysis_pairs, split_seed(config.master_seed, "lip-env")
    )
    lip_fid = estimate_lipschitz_fidelity(
        spec, phi, probe_e, config.analysis_pairs, split_seed(config.master_seed, "lip-fid")
    )
    lip_loss = estimate_lipschitz_loss(
        spec, tasks, config.analysis_pairs, split_seed(config.master_seed, "lip-loss")
    )
    mean_evals = sum(r.inner_evaluations for r in records) / len(records)
    plan = sample_complexity_plan(
        epsilon=config.analysis_epsilon,
        delta=config.analysis_delta,
        lipschitz=lip_env.constant,
        K1=max(1, round(mean_evals)),
        K2=config.outer_iterations,
        lipschitz_alt=lip_loss.constant,
    )
    analysis_delta = _counter_delta(before)
    totals["analysis_high_calls"] = analysis_delta["high_calls"]
    totals["analysis_low_calls"] = analysis_delta["low_calls"]

    analysis = {
        "lipschitz_env": dataclasses.asdict(lip_env),
        "lipschitz_fidelity": dataclasses.asdict(lip_fid),
        "lipschitz_loss": dataclasses.asdict(lip_loss),
        "sample_plan": dataclasses.asdict(plan),
        "probe_config": list(probe_values),
    }
    # JSON-safe nesting for the max pairs
    for key in ("lipschitz_env", "lipschitz_fidelity", "lipschitz_loss"):
        analysis[key]["max_pair"] = [list(p) for p in analysis[key]["max_pair"]]

    window = min(config.convergence_window, len(losses))
    convergence: dict[str, Any] = {}
    if window >= 2:
        outer_rep = convergence_report(losses, window, config.convergence_tol)
        convergence["outer"] = dataclasses.asdict(outer_rep)
    if len(last_inner_trace) >= 2:
        inner_window = min(config.convergence_window, len(last_inner_trace))
        inner_rep = convergence_report(last_inner_trace, inner_window, config.convergence_tol)
        convergence["inner_last"] = dataclasses.asdict(inner_rep)

    grand = _counter_delta(start_counts)
    totals_out = {
        "high_calls": grand["high_calls"],
        "low_calls": grand["low_calls"],
        "high_steps": grand["high_steps"],
        "low_steps": grand["low_steps"],
        **totals,
    }

    result = CampaignResult(
        config=config,
        best_fidelity=best_fidelity,
        best_loss=best_loss,
        iterations=tuple(records),
        counterexamples=tuple(counterexamples),
        regret_reference=float(reference),
        regret_reference_is_proxy=True,
        totals=totals_out,
        analysis=analysis,
        convergence=convergence,
    )
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        save_result(result, out / "result.json")
    events.emit("finish", best_loss=best_loss)
    events.close()
    return result


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------


def _fmt(x: float | None, digits: int = 6) -> str:
    if x is None:
        return "-"
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.{digits}g}"


def _markdown_report(result: CampaignResult) -> str:
    lines: list[str] = []
    cfg = result.config
    sim_name = cfg.simulator if isinstance(cfg.simulator, str) else cfg.simulator.get("id", "?")
    lines.append("# Campaign report")
    lines.append("")
    lines.append(f"- simulator: `{sim_name}`")
    lines.append(f"- outer iterations: {cfg.outer_iterations}")
    lines.append(f"- master seed: {cfg.master_seed}")
    lines.append(f"- best fidelity: {list(result.best_fidelity)}")
    lines.append(f"- best aggregate loss: {_fmt(result.best_loss)}")
    lines.append(
        f"- regret reference: {_fmt(result.regret_reference)}"
        f"{' (best-observed proxy)' if result.regret_reference_is_proxy else ''}"
    )
    lines.append(f"- counterexamples found: {len(result.counterexamples)}")
    lines.append("")
    lines.append("## Iterations")
    lines.append("")
    lines.append("| t | fidelity | loss | rho* | cx | inner evals | r_t | R_T |")
    lines.append("|---|----------|------|------|----|-------------|-----|-----|")
    for rec in result.iterations:
        fid = ", ".join(f"{v:.3f}" for v in rec.fidelity)
        lines.append(
            f"| {rec.t} | ({fid}) | {_fmt(rec.loss)} | {_fmt(rec.rho_star)} | "
            f"{'yes' if rec.counterexample_found else 'no'} | {rec.inner_evaluations} | "
            f"{_fmt(rec.regret)} | {_fmt(rec.cumulative_regret)} |"
        )
    lines.append("")
    lines.append("## Counterexamples")
    lines.append("")
    if result.counterexamples:
        lines.append("| found at | config | robustness |")
        lines.append("|----------|--------|------------|")
        for c in result.counterexamples:
            vals = ", ".join(f"{v:.4f}" for v in c.values)
            lines.append(f"| {c.found_at} | ({vals}) | {_fmt(c.robustness)} |")
    else:
        lines.append("No counterexamples were found within the budget.")
    lines.append("")
    lines.append("## Analysis estimates")
    lines.append("")
    for key in ("lipschitz_env", "lipschitz_fidelity", "lipschitz_loss"):
        est = result.analysis[key]
        lines.append(f"- {key}: constant {_fmt(est['constant'])} over {est['pairs_used']} pairs")
    plan = result.analysis["sample_plan"]
    lines.append(
        f"- sample plan: n = {plan['n_per_iteration']} per iteration, "
        f"K1 = {plan['K1']}, K2 = {plan['K2']}, N = {plan['total_samples']} "
        f"(eps = {plan['epsilon']}, delta = {plan['delta']})"
    )
    failures = [r.t for r in result.iterations if r.falsification_failed]
    if failures:
        lines.append("")
        lines.append(f"Falsification failed (recorded without penalty) at iterations: {failures}")
    lines.append("")
    lines.append("## Simulator call totals")
    lines.append("")
    for key in sorted(result.totals):
        lines.append(f"- {key}: {result.totals[key]}")
    lines.append("")
    return "\n".join(lines)


def _csv_report(result: CampaignResult) -> dict[str, str]:
    dim = len(result.best_fidelity)
    head = ["t"] + [f"f_{k}" for k in range(dim)] + ["loss", "r_t", "R_T"]
    regret_rows = [",".join(head)]
    for rec in result.iterations:
        row = [str(rec.t)] + [repr(v) for v in rec.fidelity] + [
            repr(rec.loss),
            repr(rec.regret),
            repr(rec.cumulative_regret),
        ]
        regret_rows.append(",".join(row))
    inner_rows = ["t,generation,best_robustness"]
    for rec in result.iterations:
        for g, value in enumerate(rec.inner_trace):
            inner_rows.append(f"{rec.t},{g},{value!r}")
    return {
        "regret.csv": "\n".join(regret_rows) + "\n",
        "inner_traces.csv": "\n".join(inner_rows) + "\n",
    }


def report(result: CampaignResult, format: str = "markdown") -> str | dict[str, str]:
    """Render a campaign result: one markdown document or a bundle of CSVs."""
    if format in ("markdown", "md"):
        return _markdown_report(result)
    if format == "csv":
        return _csv_report(result)
    raise InvalidArgumentError(f"unknown report format {format!r}; use 'markdown' or 'csv'")
