"""Shared domain types, bounded search spaces, and seeded sampling.

Every value type in this module is immutable, so instances can be shared
freely across parallel workers. All randomness in the project flows through
the counter-based Philox generator (:func:`rng_from_seed`); seeds are plain
64-bit unsigned integers and sub-seeds are derived with :func:`split_seed`,
which hashes a (seed, path) pair so derived streams never collide. Given the
same seed, every sampling operation here is byte-identical across runs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Seed",
    "MAX_SEED",
    "split_seed",
    "rng_from_seed",
    "InvalidArgumentError",
    "SimulationDivergedError",
    "FalsificationFailedError",
    "NumericalFailureError",
    "SchemaVersionError",
    "EnvironmentSpace",
    "EnvironmentConfig",
    "FidelitySpace",
    "FidelitySetting",
    "Trajectory",
    "Task",
    "sample_uniform",
    "latin_hypercube",
]

# Seeds are 64-bit unsigned integers; wider ints are reduced mod 2**64.
Seed = int
MAX_SEED = 2**64 - 1


class InvalidArgumentError(ValueError):
    """A caller violated an operation's precondition."""


class SimulationDivergedError(RuntimeError):
    """A simulation produced a non-finite state."""


class FalsificationFailedError(RuntimeError):
    """The falsifier could not produce any usable evaluation."""


class NumericalFailureError(RuntimeError):
    """A linear-algebra routine failed beyond recovery (e.g. non-PD kernel)."""


class SchemaVersionError(ValueError):
    """A persisted document does not match the supported schema version."""


def split_seed(seed: Seed, *path: str | int) -> Seed:
    """Derive a child seed from ``seed`` and a label path.

    Uses BLAKE2b over the parent seed and the path components, so distinct
    paths give independent streams and the mapping is stable across
    platforms and runs.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(int(seed % 2**64).to_bytes(8, "little"))
    for part in path:
        h.update(str(part).encode("utf-8"))
        h.update(b"\x00")
    return int.from_bytes(h.digest(), "little")


def rng_from_seed(seed: Seed) -> np.random.Generator:
    """Project-wide PRNG: counter-based Philox keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=int(seed % 2**64)))


def _as_float_tuple(values: Iterable[float]) -> tuple[float, ...]:
    return tuple(float(v) for v in values)


@dataclass(frozen=True)
class EnvironmentSpace:
    """Axis-aligned box of admissible environment configurations."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "lower", _as_float_tuple(self.lower))
        object.__setattr__(self, "upper", _as_float_tuple(self.upper))
        if len(self.lower) != len(self.upper):
            raise InvalidArgumentError("lower and upper bounds differ in length")
        if len(self.lower) < 1:
            raise InvalidArgumentError("environment space needs dimension >= 1")
        for lo, hi in zip(self.lower, self.upper):
            if not (np.isfinite(lo) and np.isfinite(hi)):
                raise InvalidArgumentError("bounds must be finite")
            if not lo < hi:
                raise InvalidArgumentError(f"lower bound {lo} must be < upper bound {hi}")
        if self.names and len(self.names) != len(self.lower):
            raise InvalidArgumentError("names must match dimension")
        if not self.names:
            object.__setattr__(
                self, "names", tuple(f"e{i}" for i in range(len(self.lower)))
            )
        else:
            object.__setattr__(self, "names", tuple(str(n) for n in self.names))

    @property
    def dimension(self) -> int:
        return len(self.lower)

    def lower_array(self) -> np.ndarray:
        return np.asarray(self.lower, dtype=float)

    def upper_array(self) -> np.ndarray:
        return np.asarray(self.upper, dtype=float)

    def contains(self, values: Sequence[float], tol: float = 1e-12) -> bool:
        v = np.asarray(values, dtype=float)
        if v.shape != (self.dimension,):
            return False
        return bool(
            np.all(v >= self.lower_array() - tol) and np.all(v <= self.upper_array() + tol)
        )

    def clip(self, values: np.ndarray) -> np.ndarray:
        return np.clip(values, self.lower_array(), self.upper_array())

    def config(self, values: Sequence[float]) -> "EnvironmentConfig":
        return EnvironmentConfig(values=_as_float_tuple(values), space=self)


@dataclass(frozen=True)
class EnvironmentConfig:
    """A single point in an :class:`EnvironmentSpace`."""

    values: tuple[float, ...]
    space: EnvironmentSpace

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _as_float_tuple(self.values))
        if len(self.values) != self.space.dimension:
            raise InvalidArgumentError(
                f"config has {len(self.values)} values for a "
                f"{self.space.dimension}-dimensional space"
            )
        if not self.space.contains(self.values):
            raise InvalidArgumentError(f"config {self.values} outside space bounds")

    @property
    def names(self) -> tuple[str, ...]:
        return self.space.names

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


@dataclass(frozen=True)
class FidelitySpace:
    """Normalized [0, 1]^d box of simulator fidelity knobs.

    Knob value 1 always means highest fidelity. The mapping from normalized
    knobs to physical simulator quantities lives with the simulator
    (see ``sim.FidelityMapping``).
    """

    dimension: int
    knob_names: tuple[str, ...] = ()
    metric: str = "euclidean"

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise InvalidArgumentError("fidelity space needs dimension >= 1")
        if self.knob_names and len(self.knob_names) != self.dimension:
            raise InvalidArgumentError("knob_names must match dimension")
        if not self.knob_names:
            object.__setattr__(
                self, "knob_names", tuple(f"f{i}" for i in range(self.dimension))
            )
        else:
            object.__setattr__(self, "knob_names", tuple(str(n) for n in self.knob_names))
        if self.metric != "euclidean":
            raise InvalidArgumentError("only the euclidean metric is supported")

    def contains(self, values: Sequence[float], tol: float = 1e-12) -> bool:
        v = np.asarray(values, dtype=float)
        if v.shape != (self.dimension,):
            return False
        return bool(np.all(v >= -tol) and np.all(v <= 1.0 + tol))

    def setting(self, values: Sequence[float]) -> "FidelitySetting":
        return FidelitySetting(values=_as_float_tuple(values), space=self)

    def max_fidelity(self) -> "FidelitySetting":
        return self.setting((1.0,) * self.dimension)


@dataclass(frozen=True)
class FidelitySetting:
    """A point in a :class:`FidelitySpace`; all components in [0, 1]."""

    values: tuple[float, ...]
    space: FidelitySpace

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _as_float_tuple(self.values))
        if len(self.values) != self.space.dimension:
            raise InvalidArgumentError(
                f"setting has {len(self.values)} values for a "
                f"{self.space.dimension}-dimensional fidelity space"
            )
        if not self.space.contains(self.values):
            raise InvalidArgumentError(f"fidelity values {self.values} outside [0,1]")

    @property
    def names(self) -> tuple[str, ...]:
        return self.space.knob_names

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def distance(self, other: "FidelitySetting") -> float:
        return float(np.linalg.norm(self.as_array() - other.as_array()))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Finite-horizon, uniformly sampled multichannel signal.

    ``samples`` has shape (channels, steps). ``duration`` is derived as
    (steps - 1) * dt and all samples must be finite.
    """

    start_time: float
    dt: float
    channels: tuple[str, ...]
    samples: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "channels", tuple(str(c) for c in self.channels))
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim != 2:
            raise InvalidArgumentError("samples must be a 2-D (channel x step) array")
        if arr.shape[0] != len(self.channels):
            raise InvalidArgumentError(
                f"{arr.shape[0]} sample rows for {len(self.channels)} channels"
            )
        if self.dt <= 0:
            raise InvalidArgumentError("dt must be positive")
        if arr.shape[1] < 2:
            raise InvalidArgumentError("trajectory needs at least 2 samples")
        if not np.all(np.isfinite(arr)):
            raise SimulationDivergedError("trajectory contains non-finite samples")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def steps(self) -> int:
        return int(self.samples.shape[1])

    @property
    def duration(self) -> float:
        return (self.steps - 1) * self.dt

    @property
    def end_time(self) -> float:
        return self.start_time + self.duration

    def times(self) -> np.ndarray:
        return self.start_time + self.dt * np.arange(self.steps)

    def channel(self, name: str) -> np.ndarray:
        try:
            idx = self.channels.index(name)
        except ValueError:
            raise InvalidArgumentError(
                f"unknown channel {name!r}; trajectory has {self.channels}"
            ) from None
        return self.samples[idx]


@dataclass(frozen=True)
class Task:
    """A named task with its parameter space and sampled configurations."""

    id: str
    parameter_space: EnvironmentSpace
    sampled_params: tuple[EnvironmentConfig, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "sampled_params", tuple(self.sampled_params))
        if len(self.sampled_params) < 1:
            raise InvalidArgumentError(f"task {self.id!r} needs at least one parameter")
        for p in self.sampled_params:
            if not self.parameter_space.contains(p.values):
                raise InvalidArgumentError(
                    f"task {self.id!r} parameter {p.values} outside its space"
                )


def sample_uniform(space: EnvironmentSpace, count: int, seed: Seed) -> list[EnvironmentConfig]:
    """Draw ``count`` independent uniform points from ``space``.

    Deterministic given ``seed``; raises for ``count < 1``.
    """
    if count < 1:
        raise InvalidArgumentError("count must be >= 1")
    rng = rng_from_seed(seed)
    lo = space.lower_array()
    hi = space.upper_array()
    pts = lo + rng.random((count, space.dimension)) * (hi - lo)
    return [space.config(row) for row in pts]


def latin_hypercube_unit(dimension: int, count: int, seed: Seed) -> np.ndarray:
    """Latin hypercube sample on [0, 1]^dimension as a (count, dimension) array.

    Each dimension is split into ``count`` equal strata and receives exactly
    one point per stratum, placed uniformly inside it.
    """
    if count < 1:
        raise InvalidArgumentError("count must be >= 1")
    if dimension < 1:
        raise InvalidArgumentError("dimension must be >= 1")
    rng = rng_from_seed(seed)
    out = np.empty((count, dimension))
    for d in range(dimension):
        perm = rng.permutation(count)
        out[:, d] = (perm + rng.random(count)) / count
    return out


def latin_hypercube(space: EnvironmentSpace, count: int, seed: Seed) -> list[EnvironmentConfig]:
    """Space-filling Latin hypercube sample of ``space``."""
    unit = latin_hypercube_unit(space.dimension, count, seed)
    lo = space.lower_array()
    hi = space.upper_array()
    pts = lo + unit * (hi - lo)
    return [space.config(row) for row in pts]
