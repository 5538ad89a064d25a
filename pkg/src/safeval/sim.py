"""Multi-fidelity simulator abstraction and built-in benchmark systems.

A simulator is identified by a :class:`SimulatorSpec` and executed through a
registered backend. The high-fidelity path is deterministic and noise-free;
the low-fidelity path degrades it along three orthogonal knobs (all stored
normalized in [0, 1], where 1 always means highest fidelity):

* ``dt_multiplier`` -- integration step enlarged up to 32x and the result
  linearly resampled onto the base grid,
* ``model_blend``   -- blend from the full dynamics model toward a
  simplified one,
* ``noise_scale``   -- seeded additive Gaussian observation noise.

At the all-ones fidelity setting the low-fidelity path runs the exact same
integrator configuration as the high-fidelity path, so the two agree
bit-for-bit.

Two benchmark systems ship with the package:

* ``oscillator`` -- damped nonlinear oscillator x'' = -w^2 x - c v^3 with
  w = 2 rad/s, integrated by RK4 at dt = 1e-3 s over 6 s. The low-fidelity
  model blend replaces the cubic drag with linear drag c*v.
* ``braking``    -- ego-vehicle emergency-braking scenario. Lead and ego
  start at the same speed; the lead brakes at a configurable rate, the ego
  reacts after a 0.6 s delay with 8 m/s^2 braking. The low-fidelity model
  blend adds a first-order brake-actuation lag. The spec of record is
  "G[0,6](gap > 0)" and a crash region exists at small gap / high speed /
  strong lead braking.

External simulators plug in through an executable adapter: the adapter
program receives one JSON request ``{"e": [...], "f": [...]|null,
"seed": int, "duration": float, "dt": float}`` on stdin and must print a
JSON trajectory ``{"start_time": float, "dt": float, "channels": [...],
"samples": [[...], ...]}`` on stdout, sampled on exactly the requested grid.
"""

from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import numpy as np

from .core import (
    EnvironmentConfig,
    EnvironmentSpace,
    FidelitySetting,
    FidelitySpace,
    InvalidArgumentError,
    Seed,
    SimulationDivergedError,
    Trajectory,
    rng_from_seed,
    split_seed,
)

__all__ = [
    "KnobMap",
    "FidelityMapping",
    "SimulatorSpec",
    "SimCallCounter",
    "CALL_COUNTER",
    "AdapterProtocolError",
    "register_backend",
    "simulate_high",
    "simulate_low",
    "simulate_batch",
    "simulate_batch_multi_f",
    "builtin_benchmarks",
    "get_benchmark",
    "external_simulator_spec",
]


class AdapterProtocolError(RuntimeError):
    """An external simulator adapter violated the JSON exchange contract."""


@dataclass(frozen=True)
class KnobMap:
    """Affine map of one fidelity knob from normalized [0,1] to physical units.

    ``at_min`` is the physical value at knob 0 (lowest fidelity), ``at_max``
    at knob 1 (highest fidelity). The map must be strictly monotone.
    """

    name: str
    at_min: float
    at_max: float

    def __post_init__(self) -> None:
        if self.at_min == self.at_max:
            raise InvalidArgumentError(f"knob {self.name!r} map must be monotone")

    def physical(self, v: np.ndarray | float) -> np.ndarray | float:
        return self.at_min + v * (self.at_max - self.at_min)

    def normalized(self, phys: np.ndarray | float) -> np.ndarray | float:
        return (phys - self.at_min) / (self.at_max - self.at_min)


@dataclass(frozen=True)
class FidelityMapping:
    """Per-knob affine maps between normalized fidelity values and physical knobs."""

    knobs: tuple[KnobMap, ...]
    noise_knob: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "knobs", tuple(self.knobs))
        if self.noise_knob is not None and not 0 <= self.noise_knob < len(self.knobs):
            raise InvalidArgumentError("noise_knob index out of range")

    @property
    def dimension(self) -> int:
        return len(self.knobs)

    def to_physical(self, values: Sequence[float]) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        if v.shape != (self.dimension,):
            raise InvalidArgumentError(
                f"expected {self.dimension} knob values, got shape {v.shape}"
            )
        return np.array([k.physical(v[i]) for i, k in enumerate(self.knobs)])

    def to_normalized(self, physical: Sequence[float]) -> np.ndarray:
        p = np.asarray(physical, dtype=float)
        if p.shape != (self.dimension,):
            raise InvalidArgumentError(
                f"expected {self.dimension} physical values, got shape {p.shape}"
            )
        return np.array([k.normalized(p[i]) for i, k in enumerate(self.knobs)])

    def noise_scale(self, values: Sequence[float]) -> float:
        if self.noise_knob is None:
            return 0.0
        return float(self.knobs[self.noise_knob].physical(float(values[self.noise_knob])))


def identity_mapping(dimension: int) -> FidelityMapping:
    """Mapping for simulators whose knobs are already physical in [0, 1]."""
    return FidelityMapping(
        knobs=tuple(KnobMap(f"f{i}", 0.0, 1.0) for i in range(dimension)),
        noise_knob=None,
    )


@dataclass(frozen=True)
class SimulatorSpec:
    """Identity and static description of one simulator pair (high/low)."""

    id: str
    environment_space: EnvironmentSpace
    fidelity_space: FidelitySpace
    channels: tuple[str, ...]
    base_dt: float
    duration: float
    fidelity_mapping: FidelityMapping
    adapter: str | None = None
    safety_spec: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "channels", tuple(str(c) for c in self.channels))
        if self.base_dt <= 0:
            raise InvalidArgumentError("base_dt must be positive")
        if self.duration < 10 * self.base_dt:
            raise InvalidArgumentError("duration must be at least 10 * base_dt")
        if self.fidelity_mapping.dimension != self.fidelity_space.dimension:
            raise InvalidArgumentError("fidelity mapping dimension mismatch")

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.base_dt)) + 1

    def grid_times(self) -> np.ndarray:
        return self.base_dt * np.arange(self.steps)


@dataclass
class SimCallCounter:
    """Running totals of simulator invocations and integration steps.

    Single-process bookkeeping: the campaign layer snapshots this around
    each phase to attribute cost.
    """

    high_calls: int = 0
    low_calls: int = 0
    high_steps: int = 0
    low_steps: int = 0

    def record(self, *, high: bool, calls: int, steps: int) -> None:
        if high:
            self.high_calls += calls
            self.high_steps += steps
        else:
            self.low_calls += calls
            self.low_steps += steps

    def snapshot(self) -> dict[str, int]:
        return {
            "high_calls": self.high_calls,
            "low_calls": self.low_calls,
            "high_steps": self.high_steps,
            "low_steps": self.low_steps,
        }

    def reset(self) -> None:
        self.high_calls = self.low_calls = 0
        self.high_steps = self.low_steps = 0


CALL_COUNTER = SimCallCounter()


class SimulatorBackend(Protocol):
    def run(
        self,
        spec: SimulatorSpec,
        e_values: np.ndarray,
        f_values: np.ndarray | None,
        seeds: Sequence[Seed],
    ) -> tuple[np.ndarray, int]:
        """Return ((batch, channels, steps) samples, total integration steps).

        ``f_values`` is a normalized fidelity vector or None for the
        high-fidelity path. Implementations may emit non-finite samples for
        diverged items; callers handle those per item.
        """
        ...


_REGISTRY: dict[str, SimulatorBackend] = {}


def register_backend(sim_id: str, backend: SimulatorBackend) -> None:
    """Register (or replace) the backend executing simulator ``sim_id``."""
    _REGISTRY[sim_id] = backend


def _backend_for(spec: SimulatorSpec) -> SimulatorBackend:
    if spec.adapter is not None:
        return _AdapterBackend(spec.adapter)
    try:
        return _REGISTRY[spec.id]
    except KeyError:
        raise InvalidArgumentError(f"no backend registered for simulator {spec.id!r}") from None


# ---------------------------------------------------------------------------
# Shared RK4 integrator (batched, per-item step size)
# ---------------------------------------------------------------------------

# RHS contract: rhs(t, x, e, blend) with t (B,), x (B, S), e (B, d_e),
# blend (B,) -> (B, S). Must be vectorized over the batch axis.
RhsFn = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def _rk4_step(
    rhs: RhsFn, t: np.ndarray, x: np.ndarray, h: np.ndarray, e: np.ndarray, blend: np.ndarray
) -> np.ndarray:
    hc = h[:, None]
    k1 = rhs(t, x, e, blend)
    k2 = rhs(t + 0.5 * h, x + 0.5 * hc * k1, e, blend)
    k3 = rhs(t + 0.5 * h, x + 0.5 * hc * k2, e, blend)
    k4 = rhs(t + h, x + hc * k3, e, blend)
    return x + (hc / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _integrate_to_grid(
    rhs: RhsFn,
    x0: np.ndarray,
    e: np.ndarray,
    h: np.ndarray,
    blend: np.ndarray,
    duration: float,
    grid: np.ndarray,
) -> tuple[np.ndarray, int]:
    """Integrate each batch item with its own step size and resample onto ``grid``.

    Items whose step equals the grid spacing are taken verbatim (no
    resampling), which makes the maximum-fidelity path bit-identical to the
    high-fidelity one. The final partial step is truncated to land exactly
    on ``duration``, so trajectories vary continuously with the step size.
    """
    batch, state_dim = x0.shape
    base_dt = float(grid[1] - grid[0])
    full_steps = np.floor(duration / h + 1e-9).astype(int)
    remainder = duration - full_steps * h
    remainder = np.where(remainder > 1e-12 * max(duration, 1.0), remainder, 0.0)
    max_full = int(full_steps.max())

    hist = np.empty((max_full + 2, batch, state_dim))
    hist[0] = x0
    x = x0.copy()
    t = np.zeros(batch)
    for k in range(max_full):
        hk = np.where(k < full_steps, h, 0.0)
        x = _rk4_step(rhs, t, x, hk, e, blend)
        t = t + hk
        hist[k + 1] = x
    hist[max_full + 1] = _rk4_step(rhs, t, x, remainder, e, blend)

    n_grid = len(grid)
    out = np.empty((batch, state_dim, n_grid))
    for i in range(batch):
        fi = int(full_steps[i])
        if h[i] == base_dt and fi == n_grid - 1:
            out[i] = hist[:n_grid, i, :].T
            continue
        knots_t = h[i] * np.arange(fi + 1)
        knots_x = hist[: fi + 1, i, :]
        if remainder[i] > 0.0:
            knots_t = np.append(knots_t, duration)
            knots_x = np.vstack([knots_x, hist[max_full + 1, i, :][None, :]])
        for s in range(state_dim):
            out[i, s] = np.interp(grid, knots_t, knots_x[:, s])
    total_steps = int(full_steps.sum() + np.count_nonzero(remainder))
    return out, total_steps


@dataclass(frozen=True)
class OdeBenchmark:
    """ODE-defined benchmark executed by the shared RK4 integrator.

    Fidelity knobs are interpreted positionally as (dt multiplier, model
    blend, noise scale); trailing knobs may be absent.
    """

    rhs: RhsFn
    initial_state: Callable[[np.ndarray], np.ndarray]

    def _knob_arrays(
        self, spec: SimulatorSpec, f_rows: np.ndarray | None, batch: int
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if f_rows is None:
            return np.full(batch, spec.base_dt), np.zeros(batch), np.zeros(batch)
        phys = np.stack([spec.fidelity_mapping.to_physical(row) for row in f_rows])
        mult = np.maximum(phys[:, 0], 1.0)
        h = np.minimum(spec.base_dt * mult, spec.duration)
        blend = np.clip(phys[:, 1], 0.0, 1.0) if phys.shape[1] > 1 else np.zeros(batch)
        sigma = np.maximum(phys[:, 2], 0.0) if phys.shape[1] > 2 else np.zeros(batch)
        return h, blend, sigma

    def _run_rows(
        self,
        spec: SimulatorSpec,
        e_values: np.ndarray,
        f_rows: np.ndarray | None,
        seeds: Sequence[Seed],
    ) -> tuple[np.ndarray, int]:
        batch = e_values.shape[0]
        h, blend, sigma = self._knob_arrays(spec, f_rows, batch)
        x0 = self.initial_state(e_values)
        samples, steps = _integrate_to_grid(
            self.rhs, x0, e_values, h, blend, spec.duration, spec.grid_times()
        )
        for i in range(batch):
            if sigma[i] > 0.0:
                rng = rng_from_seed(split_seed(seeds[i], "obs-noise", spec.id))
                samples[i] += sigma[i] * rng.standard_normal(samples[i].shape)
        return samples, steps

    def run(
        self,
        spec: SimulatorSpec,
        e_values: np.ndarray,
        f_values: np.ndarray | None,
        seeds: Sequence[Seed],
    ) -> tuple[np.ndarray, int]:
        rows = None
        if f_values is not None:
            rows = np.broadcast_to(f_values, (e_values.shape[0], len(f_values)))
        return self._run_rows(spec, e_values, rows, seeds)

    def run_multi_f(
        self,
        spec: SimulatorSpec,
        e_values: np.ndarray,
        f_rows: np.ndarray,
        seeds: Sequence[Seed],
    ) -> tuple[np.ndarray, int]:
        """Batched run where every item carries its own fidelity setting."""
        return self._run_rows(spec, e_values, f_rows, seeds)


class _AdapterBackend:
    """Runs an external simulator executable via the JSON stdin/stdout protocol."""

    def __init__(self, command: str):
        self.command = command

    def run(
        self,
        spec: SimulatorSpec,
        e_values: np.ndarray,
        f_values: np.ndarray | None,
        seeds: Sequence[Seed],
    ) -> tuple[np.ndarray, int]:
        batch = e_values.shape[0]
        out = np.empty((batch, len(spec.channels), spec.steps))
        steps = 0
        for i in range(batch):
            request = {
                "e": [float(v) for v in e_values[i]],
                "f": None if f_values is None else [float(v) for v in f_values],
                "seed": int(seeds[i]),
                "duration": spec.duration,
                "dt": spec.base_dt,
            }
            try:
                proc = subprocess.run(
                    [self.command],
                    input=json.dumps(request).encode(),
                    stdout=subprocess.PIPE,
                    stderr=subprocess.PIPE,
                    timeout=300,
                )
            except OSError as exc:
                raise AdapterProtocolError(f"cannot execute adapter {self.command!r}: {exc}")
            if proc.returncode != 0:
                raise AdapterProtocolError(
                    f"adapter exited with status {proc.returncode}: "
                    f"{proc.stderr.decode(errors='replace')[:500]}"
                )
            try:
                reply = json.loads(proc.stdout.decode())
            except (ValueError, UnicodeDecodeError) as exc:
                raise AdapterProtocolError(f"adapter produced invalid JSON: {exc}")
            for key in ("dt", "channels", "samples"):
                if key not in reply:
                    raise AdapterProtocolError(f"adapter reply missing field {key!r}")
            if tuple(reply["channels"]) != spec.channels:
                raise AdapterProtocolError(
                    f"adapter channels {reply['channels']} != spec channels {list(spec.channels)}"
                )
            if abs(float(reply["dt"]) - spec.base_dt) > 1e-12:
                raise AdapterProtocolError(
                    f"adapter dt {reply['dt']} != requested dt {spec.base_dt}"
                )
            arr = np.asarray(reply["samples"], dtype=float)
            if arr.shape != (len(spec.channels), spec.steps):
                raise AdapterProtocolError(
                    f"adapter samples shape {arr.shape} != expected "
                    f"{(len(spec.channels), spec.steps)}"
                )
            out[i] = arr
            steps += spec.steps
        return out, steps


# ---------------------------------------------------------------------------
# Public simulation entry points
# ---------------------------------------------------------------------------


def _check_env(spec: SimulatorSpec, e: EnvironmentConfig) -> None:
    if not spec.environment_space.contains(e.values):
        raise InvalidArgumentError(
            f"environment config {e.values} outside the space of simulator {spec.id!r}"
        )


def simulate_batch(
    spec: SimulatorSpec,
    e_values: np.ndarray,
    f: FidelitySetting | None,
    seeds: Sequence[Seed],
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized simulation of many environment points at one fidelity setting.

    Returns ``(samples, ok)`` where ``samples`` has shape
    (batch, channels, steps) and ``ok[i]`` is False for items that diverged
    (non-finite output). ``f=None`` selects the high-fidelity path. This is
    the hot path used by the optimizers; the single-trajectory wrappers
    delegate to it.
    """
    e_values = np.asarray(e_values, dtype=float)
    if e_values.ndim != 2 or e_values.shape[1] != spec.environment_space.dimension:
        raise InvalidArgumentError(
            f"e_values must have shape (batch, {spec.environment_space.dimension})"
        )
    if len(seeds) != e_values.shape[0]:
        raise InvalidArgumentError("one seed per batch item required")
    lo = spec.environment_space.lower_array()
    hi = spec.environment_space.upper_array()
    if np.any(e_values < lo - 1e-12) or np.any(e_values > hi + 1e-12):
        raise InvalidArgumentError("batch contains out-of-bounds environment values")
    f_vec = None
    if f is not None:
        if f.space.dimension != spec.fidelity_space.dimension:
            raise InvalidArgumentError("fidelity setting dimension mismatch")
        f_vec = f.as_array()
    samples, steps = _backend_for(spec).run(spec, e_values, f_vec, list(seeds))
    ok = np.isfinite(samples).all(axis=(1, 2))
    CALL_COUNTER.record(high=f is None, calls=e_values.shape[0], steps=steps)
    return samples, ok


def simulate_batch_multi_f(
    spec: SimulatorSpec,
    e_values: np.ndarray,
    f_rows: np.ndarray,
    seeds: Sequence[Seed],
) -> tuple[np.ndarray, np.ndarray]:
    """Like :func:`simulate_batch` but with one fidelity setting per item.

    Used by the fidelity-direction estimators; backends without a native
    ``run_multi_f`` are driven item by item.
    """
    e_values = np.asarray(e_values, dtype=float)
    f_rows = np.asarray(f_rows, dtype=float)
    if e_values.shape[0] != f_rows.shape[0]:
        raise InvalidArgumentError("e_values and f_rows must have the same batch size")
    if f_rows.ndim != 2 or f_rows.shape[1] != spec.fidelity_space.dimension:
        raise InvalidArgumentError(
            f"f_rows must have shape (batch, {spec.fidelity_space.dimension})"
        )
    if np.any(f_rows < -1e-12) or np.any(f_rows > 1.0 + 1e-12):
        raise InvalidArgumentError("fidelity rows must lie in [0, 1]")
    backend = _backend_for(spec)
    if hasattr(backend, "run_multi_f"):
        samples, steps = backend.run_multi_f(spec, e_values, f_rows, list(seeds))
    else:
        parts = []
        steps = 0
        for i in range(e_values.shape[0]):
            s, st = backend.run(spec, e_values[i : i + 1], f_rows[i], [seeds[i]])
            parts.append(s)
            steps += st
        samples = np.concatenate(parts, axis=0)
    ok = np.isfinite(samples).all(axis=(1, 2))
    CALL_COUNTER.record(high=False, calls=e_values.shape[0], steps=steps)
    return samples, ok


def _single(
    spec: SimulatorSpec, e: EnvironmentConfig, f: FidelitySetting | None, seed: Seed
) -> Trajectory:
    _check_env(spec, e)
    samples, ok = simulate_batch(spec, e.as_array()[None, :], f, [seed])
    if not ok[0]:
        raise SimulationDivergedError(
            f"simulator {spec.id!r} produced non-finite samples at e={e.values}"
        )
    return Trajectory(
        start_time=0.0, dt=spec.base_dt, channels=spec.channels, samples=samples[0]
    )


def simulate_high(spec: SimulatorSpec, e: EnvironmentConfig, seed: Seed) -> Trajectory:
    """Ground-truth trajectory at the base grid; deterministic and noise-free."""
    return _single(spec, e, None, seed)


def simulate_low(
    spec: SimulatorSpec, e: EnvironmentConfig, f: FidelitySetting, seed: Seed
) -> Trajectory:
    """Approximate trajectory under fidelity setting ``f`` on the base grid."""
    if not spec.fidelity_space.contains(f.values):
        raise InvalidArgumentError(f"fidelity setting {f.values} outside [0,1] box")
    return _single(spec, e, f, seed)


# ---------------------------------------------------------------------------
# Built-in benchmarks
# ---------------------------------------------------------------------------

_OSC_OMEGA = 2.0  # rad/s

_BRK_REACTION_TIME = 0.6  # s before the ego vehicle starts braking
_BRK_EGO_DECEL = 8.0  # m/s^2 ego braking strength
_BRK_BRAKE_LAG = 0.8  # s first-order actuation lag of the simplified model
_BRK_SPEED_RAMP = 0.1  # m/s width of the smooth stop ramp


def _osc_rhs(t: np.ndarray, x: np.ndarray, e: np.ndarray, blend: np.ndarray) -> np.ndarray:
    pos = x[:, 0]
    vel = x[:, 1]
    c = e[:, 2]
    drag = c * ((1.0 - blend) * vel**3 + blend * vel)
    return np.stack([vel, -(_OSC_OMEGA**2) * pos - drag], axis=1)


def _osc_init(e: np.ndarray) -> np.ndarray:
    return e[:, 0:2].copy()


def _brk_rhs(t: np.ndarray, x: np.ndarray, e: np.ndarray, blend: np.ndarray) -> np.ndarray:
    v_ego = x[:, 1]
    v_lead = x[:, 2]
    a_lead = e[:, 2]
    after_reaction = np.maximum(t - _BRK_REACTION_TIME, 0.0)
    braking_on = (t >= _BRK_REACTION_TIME).astype(float)
    actuation = 1.0 - blend * np.exp(-after_reaction / _BRK_BRAKE_LAG)
    ego_ramp = np.clip(v_ego / _BRK_SPEED_RAMP, 0.0, 1.0)
    lead_ramp = np.clip(v_lead / _BRK_SPEED_RAMP, 0.0, 1.0)
    dv_ego = -_BRK_EGO_DECEL * braking_on * actuation * ego_ramp
    dv_lead = -a_lead * lead_ramp
    return np.stack([v_lead - v_ego, dv_ego, dv_lead], axis=1)


def _brk_init(e: np.ndarray) -> np.ndarray:
    # State (gap, v_ego, v_lead); lead starts at the ego's speed.
    return np.stack([e[:, 0], e[:, 1], e[:, 1]], axis=1)


def _benchmark_mapping() -> FidelityMapping:
    return FidelityMapping(
        knobs=(
            KnobMap("dt_multiplier", at_min=32.0, at_max=1.0),
            KnobMap("model_blend", at_min=1.0, at_max=0.0),
            KnobMap("noise_scale", at_min=0.1, at_max=0.0),
        ),
        noise_knob=2,
    )


_BENCHMARK_FIDELITY_SPACE = FidelitySpace(
    dimension=3, knob_names=("dt_multiplier", "model_blend", "noise_scale")
)

OSCILLATOR = SimulatorSpec(
    id="oscillator",
    environment_space=EnvironmentSpace(
        lower=(-2.0, -2.0, 0.0), upper=(2.0, 2.0, 1.0), names=("x0", "v0", "drag")
    ),
    fidelity_space=_BENCHMARK_FIDELITY_SPACE,
    channels=("x", "v"),
    base_dt=1e-3,
    duration=6.0,
    fidelity_mapping=_benchmark_mapping(),
    safety_spec="G[0,6](x > -1.9)",
)

BRAKING = SimulatorSpec(
    id="braking",
    environment_space=EnvironmentSpace(
        lower=(5.0, 10.0, 1.0),
        upper=(100.0, 35.0, 9.0),
        names=("initial_gap", "ego_speed", "lead_decel"),
    ),
    fidelity_space=_BENCHMARK_FIDELITY_SPACE,
    channels=("gap", "v_ego", "v_lead"),
    base_dt=0.01,
    duration=6.0,
    fidelity_mapping=_benchmark_mapping(),
    safety_spec="G[0,6](gap > 0)",
)

register_backend("oscillator", OdeBenchmark(rhs=_osc_rhs, initial_state=_osc_init))
register_backend("braking", OdeBenchmark(rhs=_brk_rhs, initial_state=_brk_init))


def builtin_benchmarks() -> list[SimulatorSpec]:
    """The two self-contained benchmark systems shipped with the package."""
    return [OSCILLATOR, BRAKING]


def get_benchmark(sim_id: str) -> SimulatorSpec:
    for spec in builtin_benchmarks():
        if spec.id == sim_id:
            return spec
    raise InvalidArgumentError(
        f"unknown simulator {sim_id!r}; built-ins: "
        f"{[s.id for s in builtin_benchmarks()]}"
    )


def external_simulator_spec(
    sim_id: str,
    adapter: str,
    environment_space: EnvironmentSpace,
    fidelity_dimension: int,
    channels: Sequence[str],
    base_dt: float,
    duration: float,
    safety_spec: str | None = None,
) -> SimulatorSpec:
    """Describe an external simulator reachable through the adapter protocol."""
    return SimulatorSpec(
        id=sim_id,
        environment_space=environment_space,
        fidelity_space=FidelitySpace(dimension=fidelity_dimension),
        channels=tuple(channels),
        base_dt=base_dt,
        duration=duration,
        fidelity_mapping=identity_mapping(fidelity_dimension),
        adapter=adapter,
        safety_spec=safety_spec,
    )
