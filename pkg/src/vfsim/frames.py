"""Validity frames and context admissibility."""
from __future__ import annotations

import math
import numbers
import re
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Mapping

import numpy as np

from vfsim.errors import InvalidArgumentError, MissingFactorError


def value_key(value):
    """Type-tagged key so that ``True`` and ``1`` never compare equal."""
    if isinstance(value, (bool, np.bool_)):
        return ("b", bool(value))
    if isinstance(value, (int, float, np.integer, np.floating)):
        return ("n", float(value))
    return ("s", str(value))


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, float) and value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return str(value)


def parse_value(text: str):
    text = text.strip()
    low = text.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi) or self.lo > self.hi:
            raise InvalidArgumentError(f"empty interval [{self.lo}, {self.hi}]")

    def __contains__(self, value):
        if isinstance(value, (bool, np.bool_)) or not isinstance(value, numbers.Real):
            return False
        return self.lo <= value <= self.hi

    def contains(self, other) -> bool:
        return isinstance(other, Interval) and self.lo <= other.lo and other.hi <= self.hi

    def __str__(self):
        return f"[{format_value(float(self.lo))}, {format_value(float(self.hi))}]"


@dataclass(frozen=True)
class EnumDomain:
    values: tuple

    def __post_init__(self):
        uniq = {}
        for v in self.values:
            uniq.setdefault(value_key(v), v)
        if not uniq:
            raise InvalidArgumentError("enumerated domain must not be empty")
        ordered = tuple(uniq[k] for k in sorted(uniq))
        object.__setattr__(self, "values", ordered)

    @property
    def keys(self):
        return frozenset(value_key(v) for v in self.values)

    def __contains__(self, value):
        return value_key(value) in self.keys

    def contains(self, other) -> bool:
        return isinstance(other, EnumDomain) and other.keys <= self.keys

    def __str__(self):
        return "{" + ", ".join(format_value(v) for v in self.values) + "}"


_INTERVAL = re.compile(r"^\[\s*([^,\]]+)\s*,\s*([^,\]]+)\s*\]$")
_ENUM = re.compile(r"^\{(.*)\}$")


def parse_domain(text: str):
    """``"[lo, hi]"`` is a closed interval, ``"{a, b}"`` an enumeration."""
    text = text.strip()
    m = _INTERVAL.match(text)
    if m:
        try:
            return Interval(float(m.group(1)), float(m.group(2)))
        except ValueError as exc:
            raise InvalidArgumentError(f"bad interval {text!r}") from exc
    m = _ENUM.match(text)
    if m:
        items = [item for item in m.group(1).split(",") if item.strip()]
        return EnumDomain(tuple(parse_value(item) for item in items))
    raise InvalidArgumentError(
        f"domain {text!r} is neither an interval '[lo, hi]' nor an enumeration '{{a, b}}'")


class _DomainSet(Mapping):
    """Name -> domain mapping shared by property and factor sets."""

    def __init__(self, entries=None):
        entries = dict(entries or {})
        for name, dom in list(entries.items()):
            if isinstance(dom, str):
                dom = parse_domain(dom)
                entries[name] = dom
            if not isinstance(dom, (Interval, EnumDomain)):
                raise InvalidArgumentError(f"{name}: unsupported domain {dom!r}")
        self._entries = dict(sorted(entries.items()))

    def __getitem__(self, name):
        return self._entries[name]

    def __iter__(self):
        return iter(self._entries)

    def __len__(self):
        return len(self._entries)

    def __eq__(self, other):
        if not isinstance(other, _DomainSet):
            return NotImplemented
        return type(self) is type(other) and self._entries == other._entries

    def __hash__(self):
        return hash((type(self).__name__, tuple(self._entries.items())))

    def __repr__(self):
        body = ", ".join(f"{k}: {v}" for k, v in self._entries.items())
        return f"{type(self).__name__}({{{body}}})"

    @property
    def names(self) -> frozenset:
        return frozenset(self._entries)


class PropertySet(_DomainSet):
    pass


class FactorSet(_DomainSet):
    pass


class Context(Mapping):
    """Observed influencing-factor values at one monitoring instant."""

    def __init__(self, assignments=None, **kwargs):
        data = dict(assignments or {})
        data.update(kwargs)
        self._data = dict(sorted(data.items()))

    def __getitem__(self, name):
        return self._data[name]

    def __iter__(self):
        return iter(self._data)

    def __len__(self):
        return len(self._data)

    def __hash__(self):
        return hash(tuple((k, value_key(v)) for k, v in self._data.items()))

    def __eq__(self, other):
        if isinstance(other, Context):
            return self._data == other._data
        return NotImplemented

    def __repr__(self):
        inner = ", ".join(f"{k}={format_value(v)}" for k, v in self._data.items())
        return f"Context({inner})"


@dataclass(frozen=True)
class ExecutionSpec:
    platform_label: str
    wcet: float
    mean_cost: float

    def __post_init__(self):
        if not 0 < self.mean_cost <= self.wcet:
            raise InvalidArgumentError(
                f"need 0 < mean_cost <= wcet, got mean_cost={self.mean_cost}, wcet={self.wcet}")


class Status(str, Enum):
    ASSUMED_VALID = "AssumedValid"
    VALIDATED = "Validated"
    INVALIDATED = "Invalidated"


@dataclass
class ValidityRecord:
    status: Status = Status.ASSUMED_VALID
    notes: str = ""
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __post_init__(self):
        self.status = Status(self.status)

    def update(self, status, notes=None):
        with self._lock:
            self.status = Status(status)
            if notes is not None:
                self.notes = notes


@dataclass(frozen=True)
class ValidationCondition:
    name: str
    predicate: Callable = field(compare=False, repr=False)
    expected: bool = True


def _x_nondecreasing(trace, context):
    return bool(np.all(np.diff(trace.x) >= 0.0))


def _lane_constant(trace, context):
    return bool(np.all(trace.lane == trace.lane[0]))


def _speed_nonnegative(trace, context):
    return bool(np.all(trace.v >= 0.0))


# Executable stand-ins for validation activities, addressable by name from library files.
PREDICATES = {
    "x_nondecreasing": _x_nondecreasing,
    "lane_constant": _lane_constant,
    "speed_nonnegative": _speed_nonnegative,
}


def validation(name: str, expected: bool = True) -> ValidationCondition:
    try:
        return ValidationCondition(name, PREDICATES[name], expected)
    except KeyError:
        raise InvalidArgumentError(f"unknown validation predicate {name!r}") from None


@dataclass(frozen=True)
class ValidityFrame:
    frame_id: str
    model_id: str
    pi: PropertySet
    gamma: FactorSet
    exec: ExecutionSpec
    validity: ValidityRecord = field(default_factory=ValidityRecord)
    validations: tuple = ()
    map_pi: Mapping[str, str] = field(default_factory=dict)
    map_gamma: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.pi, PropertySet):
            object.__setattr__(self, "pi", PropertySet(self.pi))
        if not isinstance(self.gamma, FactorSet):
            object.__setattr__(self, "gamma", FactorSet(self.gamma))
        object.__setattr__(self, "validations", tuple(self.validations))
        stray = set(self.map_pi) - self.pi.names
        if stray:
            raise InvalidArgumentError(
                f"frame {self.frame_id}: property map names {sorted(stray)} not in pi")
        stray = set(self.map_gamma) - self.gamma.names
        if stray:
            raise InvalidArgumentError(
                f"frame {self.frame_id}: factor map names {sorted(stray)} not in gamma")

    @property
    def wcet(self) -> float:
        return self.exec.wcet

    @property
    def invalidated(self) -> bool:
        return self.validity.status is Status.INVALIDATED


def frame_admits(frame: ValidityFrame, context: Mapping) -> bool:
    """True iff every factor the frame constrains takes a value inside its domain.

    Factors the frame does not name are ignored. Raises
    :class:`MissingFactorError` when the context lacks a constrained factor.
    """
    for name, domain in frame.gamma.items():
        if name not in context:
            raise MissingFactorError(name)
        if context[name] not in domain:
            return False
    return True


def frame_covers(frame: ValidityFrame, requested: Mapping) -> bool:
    for name, wanted in requested.items():
        if isinstance(wanted, str):
            wanted = parse_domain(wanted)
        have = frame.pi.get(name)
        if have is None or not have.contains(wanted):
            return False
    return True


def run_validations(frame: ValidityFrame, trace, context) -> list:
    results = [(cond.name, bool(cond.predicate(trace, context)) == cond.expected)
               for cond in frame.validations]
    failed = [name for name, ok in results if not ok]
    if failed:
        frame.validity.update(Status.INVALIDATED,
                              f"failed validation: {', '.join(failed)}")
    return results


def domain_region_contains(outer: Mapping, inner: Mapping) -> bool:
    """Whether the validity region of ``inner`` lies inside that of ``outer``.

    A factor absent from a set is unconstrained, so every factor ``outer``
    constrains must also be constrained by ``inner`` to a sub-domain.
    """
    for name, dom in outer.items():
        sub = inner.get(name)
        if sub is None or not dom.contains(sub):
            return False
    return True


def factor_names(frames: Iterable[ValidityFrame]) -> list:
    names = set()
    for fr in frames:
        names |= fr.gamma.names
    return sorted(names)
