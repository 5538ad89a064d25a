"""Quantitative safety-specification language and robustness monitor.

Specs are boolean/temporal formulas over named trajectory channels with the
standard min/max quantitative semantics evaluated on sampled time points
(no interpolation between samples):

    rho(x > c)      = x(t) - c
    rho(x < c)      = c - x(t)
    rho(!phi)       = -rho(phi)
    rho(phi & psi)  = min(rho(phi), rho(psi))
    rho(phi | psi)  = max(rho(phi), rho(psi))
    rho(G[a,b] phi) = min over samples in [t+a, t+b] of rho(phi)
    rho(F[a,b] phi) = max over samples in [t+a, t+b] of rho(phi)

A positive robustness value means the trajectory satisfies the spec, a
negative value means it violates it. Interval endpoints are clipped onto the
sample grid by rounding inward, and windows are truncated at the trajectory
horizon rather than extrapolated.

Grammar accepted by :func:`parse_spec` (whitespace insignificant)::

    formula := or_expr
    or_expr := and_expr ( '|' and_expr )*
    and_expr := unary ( '&' unary )*
    unary   := '!' unary
             | 'G' '[' number ',' number ']' '(' formula ')'
             | 'F' '[' number ',' number ']' '(' formula ')'
             | '(' formula ')'
             | predicate
    predicate := identifier ('>' | '<') number
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Union

import numpy as np

from .core import InvalidArgumentError, Trajectory

__all__ = [
    "SafetySpec",
    "Predicate",
    "Not",
    "And",
    "Or",
    "Globally",
    "Eventually",
    "RobustnessValue",
    "SpecSyntaxError",
    "SpecEvaluationError",
    "parse_spec",
    "format_spec",
    "robustness",
    "satisfied",
    "horizon",
]

# Signed satisfaction margin, in the units of the predicates' channels.
RobustnessValue = float


class SpecSyntaxError(ValueError):
    """Raised on malformed spec text, with position information."""

    def __init__(self, message: str, text: str, offset: int):
        line = text.count("\n", 0, offset) + 1
        col = offset - (text.rfind("\n", 0, offset) + 1) + 1
        super().__init__(f"{message} at offset {offset} (line {line}, column {col})")
        self.offset = offset
        self.line = line
        self.column = col


class SpecEvaluationError(ValueError):
    """Raised when a well-formed spec cannot be evaluated on a trajectory."""


@dataclass(frozen=True)
class Predicate:
    channel: str
    comparator: str  # ">" or "<"
    threshold: float

    def __post_init__(self) -> None:
        if self.comparator not in (">", "<"):
            raise InvalidArgumentError(f"comparator must be '>' or '<', got {self.comparator!r}")
        object.__setattr__(self, "threshold", float(self.threshold))


@dataclass(frozen=True)
class Not:
    sub: "SafetySpec"


@dataclass(frozen=True)
class And:
    args: tuple["SafetySpec", ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "args", tuple(self.args))
        if len(self.args) < 2:
            raise InvalidArgumentError("And needs at least two arguments")


@dataclass(frozen=True)
class Or:
    args: tuple["SafetySpec", ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "args", tuple(self.args))
        if len(self.args) < 2:
            raise InvalidArgumentError("Or needs at least two arguments")


def _check_interval(interval: tuple[float, float]) -> tuple[float, float]:
    a, b = float(interval[0]), float(interval[1])
    if not (0.0 <= a <= b):
        raise InvalidArgumentError(f"interval must satisfy 0 <= a <= b, got [{a}, {b}]")
    return (a, b)


@dataclass(frozen=True)
class Globally:
    interval: tuple[float, float]
    sub: "SafetySpec"

    def __post_init__(self) -> None:
        object.__setattr__(self, "interval", _check_interval(self.interval))


@dataclass(frozen=True)
class Eventually:
    interval: tuple[float, float]
    sub: "SafetySpec"

    def __post_init__(self) -> None:
        object.__setattr__(self, "interval", _check_interval(self.interval))


SafetySpec = Union[Predicate, Not, And, Or, Globally, Eventually]


def horizon(spec: SafetySpec) -> float:
    """Largest lookahead (seconds) the spec needs past its evaluation time."""
    if isinstance(spec, Predicate):
        return 0.0
    if isinstance(spec, Not):
        return horizon(spec.sub)
    if isinstance(spec, (And, Or)):
        return max(horizon(a) for a in spec.args)
    if isinstance(spec, (Globally, Eventually)):
        return spec.interval[1] + horizon(spec.sub)
    raise TypeError(f"not a spec node: {spec!r}")


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str, offset: int | None = None) -> SpecSyntaxError:
        return SpecSyntaxError(message, self.text, self.pos if offset is None else offset)

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str) -> None:
        if self.peek() != ch:
            found = repr(self.peek()) if self.peek() else "end of input"
            raise self.error(f"expected {ch!r}, found {found}")
        self.pos += 1

    def number(self) -> float:
        self.skip_ws()
        start = self.pos
        i = self.pos
        n = len(self.text)
        if i < n and self.text[i] in "+-":
            i += 1
        digits = 0
        while i < n and self.text[i].isdigit():
            i += 1
            digits += 1
        if i < n and self.text[i] == ".":
            i += 1
            while i < n and self.text[i].isdigit():
                i += 1
                digits += 1
        if digits == 0:
            found = repr(self.text[start]) if start < n else "end of input"
            raise self.error(f"expected a number, found {found}", offset=start)
        if i < n and self.text[i] in "eE":
            j = i + 1
            if j < n and self.text[j] in "+-":
                j += 1
            if j < n and self.text[j].isdigit():
                while j < n and self.text[j].isdigit():
                    j += 1
                i = j
        self.pos = i
        return float(self.text[start:i])

    def identifier(self) -> str:
        self.skip_ws()
        start = self.pos
        i = self.pos
        n = len(self.text)
        if i < n and (self.text[i].isalpha() or self.text[i] == "_"):
            i += 1
            while i < n and (self.text[i].isalnum() or self.text[i] == "_"):
                i += 1
        if i == start:
            found = repr(self.text[start]) if start < n else "end of input"
            raise self.error(f"expected an identifier, found {found}", offset=start)
        self.pos = i
        return self.text[start:i]

    def formula(self) -> SafetySpec:
        return self.or_expr()

    def or_expr(self) -> SafetySpec:
        args = [self.and_expr()]
        while self.peek() == "|":
            self.pos += 1
            args.append(self.and_expr())
        return args[0] if len(args) == 1 else Or(tuple(args))

    def and_expr(self) -> SafetySpec:
        args = [self.unary()]
        while self.peek() == "&":
            self.pos += 1
            args.append(self.unary())
        return args[0] if len(args) == 1 else And(tuple(args))

    def unary(self) -> SafetySpec:
        ch = self.peek()
        if ch == "!":
            self.pos += 1
            return Not(self.unary())
        if ch == "(":
            self.pos += 1
            inner = self.formula()
            self.expect(")")
            return inner
        if ch == "":
            raise self.error("unexpected end of input")
        start = self.pos
        name = self.identifier()
        if name in ("G", "F") and self.peek() == "[":
            self.pos += 1
            a = self.number()
            self.expect(",")
            b = self.number()
            self.expect("]")
            self.expect("(")
            inner = self.formula()
            self.expect(")")
            if a < 0 or a > b:
                raise self.error(
                    f"interval [{a:g},{b:g}] must satisfy 0 <= a <= b", offset=start
                )
            node = Globally if name == "G" else Eventually
            return node((a, b), inner)
        # plain predicate: identifier comparator number
        op = self.peek()
        if op not in (">", "<"):
            found = repr(op) if op else "end of input"
            raise self.error(f"expected '>' or '<' after channel name, found {found}")
        self.pos += 1
        threshold = self.number()
        return Predicate(name, op, threshold)


def parse_spec(text: str) -> SafetySpec:
    """Parse spec text into an AST; see the module docstring for the grammar."""
    if not text or not text.strip():
        raise InvalidArgumentError("spec text must be nonempty")
    p = _Parser(text)
    node = p.formula()
    p.skip_ws()
    if p.pos != len(text):
        raise p.error(f"unexpected trailing input {text[p.pos:]!r}")
    return node


def _fmt_num(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def format_spec(spec: SafetySpec) -> str:
    """Pretty-print a spec; ``parse_spec(format_spec(s)) == s``."""
    if isinstance(spec, Predicate):
        return f"{spec.channel} {spec.comparator} {_fmt_num(spec.threshold)}"
    if isinstance(spec, Not):
        return f"!({format_spec(spec.sub)})"
    if isinstance(spec, And):
        return " & ".join(f"({format_spec(a)})" for a in spec.args)
    if isinstance(spec, Or):
        return " | ".join(f"({format_spec(a)})" for a in spec.args)
    if isinstance(spec, Globally):
        a, b = spec.interval
        return f"G[{_fmt_num(a)},{_fmt_num(b)}]({format_spec(spec.sub)})"
    if isinstance(spec, Eventually):
        a, b = spec.interval
        return f"F[{_fmt_num(a)},{_fmt_num(b)}]({format_spec(spec.sub)})"
    raise TypeError(f"not a spec node: {spec!r}")


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def _window_offsets(interval: tuple[float, float], dt: float) -> tuple[int, int]:
    # Round inward onto the sample grid, with a small tolerance so that
    # grid-aligned endpoints are not lost to float representation error.
    a, b = interval
    lo = int(np.ceil(a / dt - 1e-9))
    hi = int(np.floor(b / dt + 1e-9))
    return lo, hi


def _sliding_extremum(x: np.ndarray, lo: int, hi: int, take_max: bool) -> np.ndarray:
    """out[k] = extremum of x[k+lo : min(k+hi, n-1)] (windows clipped at the end).

    Monotonic-deque sweep, O(n) regardless of window width. Entries whose
    clipped window is empty (k + lo > n - 1) are filled with -inf/+inf; the
    horizon check in :func:`robustness` guarantees they are never consumed.
    """
    n = len(x)
    sign = 1.0 if take_max else -1.0
    vals = sign * x
    out = np.full(n, -np.inf)
    dq: deque[int] = deque()  # indices into vals, decreasing values
    j = n - 1  # next index not yet inserted (sweep right to left)
    for k in range(n - 1, -1, -1):
        start = k + lo
        end = min(k + hi, n - 1)
        if start > n - 1:
            continue
        while j >= start:
            while dq and vals[dq[-1]] <= vals[j]:
                dq.pop()
            dq.append(j)
            j -= 1
        while dq and dq[0] > end:
            dq.popleft()
        if dq:
            out[k] = vals[dq[0]]
    out = sign * out
    return out


def _rho_signal(spec: SafetySpec, traj: Trajectory) -> np.ndarray:
    if isinstance(spec, Predicate):
        x = traj.channel(spec.channel)
        return x - spec.threshold if spec.comparator == ">" else spec.threshold - x
    if isinstance(spec, Not):
        return -_rho_signal(spec.sub, traj)
    if isinstance(spec, And):
        return np.min([_rho_signal(a, traj) for a in spec.args], axis=0)
    if isinstance(spec, Or):
        return np.max([_rho_signal(a, traj) for a in spec.args], axis=0)
    if isinstance(spec, (Globally, Eventually)):
        inner = _rho_signal(spec.sub, traj)
        lo, hi = _window_offsets(spec.interval, traj.dt)
        if lo > hi:
            raise SpecEvaluationError(
                f"interval [{spec.interval[0]:g},{spec.interval[1]:g}] contains no "
                f"sample points at dt={traj.dt:g}"
            )
        take_max = isinstance(spec, Eventually)
        return _sliding_extremum(inner, lo, hi, take_max)
    raise TypeError(f"not a spec node: {spec!r}")


def _validate(spec: SafetySpec, traj: Trajectory) -> None:
    if isinstance(spec, Predicate):
        traj.channel(spec.channel)  # raises on unknown channel
        return
    if isinstance(spec, Not):
        _validate(spec.sub, traj)
        return
    if isinstance(spec, (And, Or)):
        for a in spec.args:
            _validate(a, traj)
        return
    if isinstance(spec, (Globally, Eventually)):
        _validate(spec.sub, traj)
        return
    raise TypeError(f"not a spec node: {spec!r}")


def _rho_at_zero(spec: SafetySpec, traj: Trajectory) -> float:
    # Fast path for evaluation at the trajectory start: only the outermost
    # temporal window is reduced directly; the O(n) deque sweep is needed
    # solely for temporal operators nested inside another temporal operator.
    if isinstance(spec, Predicate):
        return float(_rho_signal(spec, traj)[0])
    if isinstance(spec, Not):
        return -_rho_at_zero(spec.sub, traj)
    if isinstance(spec, And):
        return min(_rho_at_zero(a, traj) for a in spec.args)
    if isinstance(spec, Or):
        return max(_rho_at_zero(a, traj) for a in spec.args)
    if isinstance(spec, (Globally, Eventually)):
        inner = _rho_signal(spec.sub, traj)
        lo, hi = _window_offsets(spec.interval, traj.dt)
        end = min(hi, len(inner) - 1)
        if lo > hi or lo > end:
            raise SpecEvaluationError(
                f"interval [{spec.interval[0]:g},{spec.interval[1]:g}] contains no "
                f"sample points at dt={traj.dt:g}"
            )
        seg = inner[lo : end + 1]
        return float(np.max(seg) if isinstance(spec, Eventually) else np.min(seg))
    raise TypeError(f"not a spec node: {spec!r}")


def robustness(spec: SafetySpec, trajectory: Trajectory) -> RobustnessValue:
    """Quantitative robustness of ``spec`` on ``trajectory`` at its start time.

    Positive iff the trajectory satisfies the spec. Raises
    :class:`SpecEvaluationError` for unknown channels or intervals whose
    total reach exceeds the trajectory duration.
    """
    _validate(spec, trajectory)
    reach = horizon(spec)
    if reach > trajectory.duration + 1e-9:
        raise SpecEvaluationError(
            f"spec needs {reach:g} s of signal but the trajectory lasts "
            f"{trajectory.duration:g} s"
        )
    value = _rho_at_zero(spec, trajectory)
    if not np.isfinite(value):
        raise SpecEvaluationError("robustness evaluated to a non-finite value")
    return value


def _bool_signal(spec: SafetySpec, traj: Trajectory) -> np.ndarray:
    if isinstance(spec, Predicate):
        x = traj.channel(spec.channel)
        return x > spec.threshold if spec.comparator == ">" else x < spec.threshold
    if isinstance(spec, Not):
        return ~_bool_signal(spec.sub, traj)
    if isinstance(spec, And):
        return np.logical_and.reduce([_bool_signal(a, traj) for a in spec.args])
    if isinstance(spec, Or):
        return np.logical_or.reduce([_bool_signal(a, traj) for a in spec.args])
    if isinstance(spec, (Globally, Eventually)):
        inner = _bool_signal(spec.sub, traj).astype(float)
        lo, hi = _window_offsets(spec.interval, traj.dt)
        if lo > hi:
            raise SpecEvaluationError("interval contains no sample points")
        take_max = isinstance(spec, Eventually)
        return _sliding_extremum(inner, lo, hi, take_max) > 0.5
    raise TypeError(f"not a spec node: {spec!r}")


def satisfied(spec: SafetySpec, trajectory: Trajectory) -> bool:
    """Boolean monitor over the same AST (strict predicate comparisons)."""
    _validate(spec, trajectory)
    if horizon(spec) > trajectory.duration + 1e-9:
        raise SpecEvaluationError("spec horizon exceeds trajectory duration")
    return bool(_bool_signal(spec, trajectory)[0])
