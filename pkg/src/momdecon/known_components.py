"""Exact raw-moment oracles for the known component Z.

A :class:`MomentProvider` is an immutable description of the law of Z.  Its
moments are evaluated in closed form with factorials accumulated
multiplicatively, which keeps every value a plain double and avoids Gamma
function calls.  Derived providers (the law of Z**2 and of |Z|) are
materialised as ``custom`` providers holding an explicit moment list.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import MomentOrderError

__all__ = [
    "MomentProvider",
    "AssumptionCheck",
    "moment",
    "check_assumptions",
    "squared_provider",
    "absolute_provider",
    "load_custom",
    "parse_provider",
]

FAMILIES = ("degenerate", "exponential", "normal", "laplace", "custom")

# Closed forms stay finite well past this for unit-scale families; the
# estimator never needs more than 2 * 15 (or 4 * 15 on the squared route).
MAX_BUILTIN_ORDER = 150
DERIVED_MAX_ORDER = 40


class AssumptionCheck(NamedTuple):
    assumption_b_holds: bool
    first_zero_order: int | None


@dataclass(frozen=True)
class MomentProvider:
    """Law of the known component Z.

    Use the named constructors (:meth:`exponential`, :meth:`normal`, ...)
    rather than the raw initialiser.  ``params`` holds the family parameters
    in the order documented on each constructor; for ``custom`` it holds the
    moment list itself, index = order.
    """

    family: str
    params: tuple[float, ...]

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        p = self.params
        if any(not math.isfinite(v) for v in p):
            raise ValueError("provider parameters must be finite")
        if self.family == "degenerate":
            if len(p) != 1:
                raise ValueError("degenerate takes one parameter")
            if p[0] == 0.0:
                raise ValueError("Degenerate(0) makes scale deconvolution undefined")
        elif self.family == "exponential":
            if len(p) != 1 or p[0] <= 0:
                raise ValueError("exponential needs a rate > 0")
        elif self.family in ("normal", "laplace"):
            if len(p) != 2 or p[1] <= 0:
                raise ValueError(f"{self.family} needs (location, scale > 0)")
        elif self.family == "custom":
            if len(p) < 1 or p[0] != 1.0:
                raise ValueError("custom moment list must start with 1")

    # -- constructors -------------------------------------------------------

    @classmethod
    def degenerate(cls, c: float) -> "MomentProvider":
        return cls("degenerate", (float(c),))

    @classmethod
    def exponential(cls, rate: float) -> "MomentProvider":
        return cls("exponential", (float(rate),))

    @classmethod
    def normal(cls, mean: float = 0.0, sd: float = 1.0) -> "MomentProvider":
        return cls("normal", (float(mean), float(sd)))

    @classmethod
    def laplace(cls, location: float = 0.0, scale: float = 1.0) -> "MomentProvider":
        return cls("laplace", (float(location), float(scale)))

    @classmethod
    def custom(cls, moments: Sequence[float]) -> "MomentProvider":
        return cls("custom", tuple(float(m) for m in moments))

    # -- queries ------------------------------------------------------------

    @property
    def max_order(self) -> int:
        if self.family == "custom":
            return len(self.params) - 1
        return MAX_BUILTIN_ORDER

    @property
    def is_symmetric(self) -> bool:
        """True when the law is symmetric about zero (all odd moments vanish)."""
        if self.family in ("normal", "laplace"):
            return self.params[0] == 0.0
        if self.family == "custom":
            return all(m == 0.0 for m in self.params[1::2])
        return False

    def moment(self, j: int) -> float:
        return moment(self, j)

    def moments(self, j_max: int) -> np.ndarray:
        return np.array([moment(self, j) for j in range(j_max + 1)])

    def describe(self) -> str:
        """Compact descriptor, the inverse of :func:`parse_provider` for built-ins."""
        if self.family == "custom":
            return "custom:[" + ",".join(repr(m) for m in self.params) + "]"
        short = {"exponential": "exp"}.get(self.family, self.family)
        return short + ":" + ",".join(repr(v) for v in self.params)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        f, p = self.family, self.params
        if f == "degenerate":
            return np.full(size, p[0])
        if f == "exponential":
            return rng.exponential(1.0 / p[0], size)
        if f == "normal":
            return rng.normal(p[0], p[1], size)
        if f == "laplace":
            return rng.laplace(p[0], p[1], size)
        raise ValueError("custom providers carry moments only and cannot be sampled")

    def to_json(self) -> dict:
        return {"family": self.family, "params": list(self.params)}


def _double_factorial_odd(j: int) -> float:
    """(j - 1)!! for even j, i.e. 1 * 3 * ... * (j - 1)."""
    acc = 1.0
    for i in range(1, j, 2):
        acc *= i
    return acc


def _centred_moment(family: str, scale: float, i: int) -> float:
    if i % 2:
        return 0.0
    if family == "normal":
        return _double_factorial_odd(i) * scale**i
    acc = 1.0  # laplace: i! * b**i
    for r in range(1, i + 1):
        acc *= r * scale
    return acc


def moment(provider: MomentProvider, j: int) -> float:
    """Exact raw moment E[Z**j] of ``provider``."""
    if j < 0:
        raise ValueError("moment order must be non-negative")
    if j > provider.max_order:
        raise MomentOrderError(
            f"order {j} exceeds the provider's maximum order {provider.max_order}"
        )
    f, p = provider.family, provider.params
    if f == "custom":
        return p[j]
    if j == 0:
        return 1.0
    if f == "degenerate":
        return p[0] ** j
    if f == "exponential":
        acc = 1.0
        for i in range(1, j + 1):
            acc *= i / p[0]
        return acc
    loc, scale = p
    if loc == 0.0:
        return _centred_moment(f, scale, j)
    # E(loc + W)^j = sum_i C(j, i) loc^(j-i) E W^i, binomials by multiplicative update
    total, binom = 0.0, 1.0
    for i in range(j + 1):
        if i % 2 == 0:
            total += binom * loc ** (j - i) * _centred_moment(f, scale, i)
        binom = binom * (j - i) / (i + 1)
    return total


def check_assumptions(provider: MomentProvider, j_max: int) -> AssumptionCheck:
    """Find the first order in 1..j_max whose moment vanishes.

    Built-in families are decided from their structure: only the odd
    moments of a centred normal or Laplace law vanish (an underflowed power
    of a tiny constant is not a zero moment).  Custom lists are scanned.
    """
    if j_max < 1:
        raise ValueError("j_max must be at least 1")
    if provider.family in ("degenerate", "exponential"):
        return AssumptionCheck(True, None)
    if provider.family in ("normal", "laplace"):
        return AssumptionCheck(False, 1) if provider.params[0] == 0.0 else AssumptionCheck(True, None)
    for j in range(1, min(j_max, provider.max_order) + 1):
        if moment(provider, j) == 0.0:
            return AssumptionCheck(False, j)
    return AssumptionCheck(True, None)


def squared_provider(provider: MomentProvider, max_order: int | None = None) -> MomentProvider:
    """Provider for Z**2, whose j-th moment is the (2j)-th moment of Z."""
    limit = provider.max_order // 2
    if max_order is None:
        max_order = limit if provider.family == "custom" else DERIVED_MAX_ORDER
    if max_order > limit:
        raise MomentOrderError(
            f"squared provider up to order {max_order} needs moments to {2 * max_order}, "
            f"provider stops at {provider.max_order}"
        )
    return MomentProvider.custom([moment(provider, 2 * j) for j in range(max_order + 1)])


def _absolute_moment(provider: MomentProvider, j: int) -> float:
    f, p = provider.family, provider.params
    if j == 0:
        return 1.0
    if f == "exponential":
        return moment(provider, j)
    if f == "degenerate":
        return abs(p[0]) ** j
    scale = p[1]
    if f == "laplace":
        acc = 1.0  # j! * b**j for every j
        for r in range(1, j + 1):
            acc *= r * scale
        return acc
    if j % 2 == 0:
        return _centred_moment(f, scale, j)
    # normal, odd j = 2i + 1: sigma^j * sqrt(2/pi) * 2^i * i!
    acc = math.sqrt(2.0 / math.pi) * scale
    for r in range(1, (j - 1) // 2 + 1):
        acc *= 2.0 * r * scale * scale
    return acc


def absolute_provider(provider: MomentProvider, max_order: int = DERIVED_MAX_ORDER) -> MomentProvider:
    """Provider for |Z|.

    Only families with a known closed form qualify; normal and Laplace laws
    must be centred at zero.
    """
    if provider.family == "custom":
        raise ValueError("absolute moments are not available for custom providers")
    if provider.family in ("normal", "laplace") and provider.params[0] != 0.0:
        raise ValueError("absolute moments are only available for centred normal/Laplace laws")
    return MomentProvider.custom([_absolute_moment(provider, j) for j in range(max_order + 1)])


def load_custom(path: str | Path) -> MomentProvider:
    """Read a custom provider from a JSON array ``[1.0, m1, m2, ...]``."""
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, list) or not data:
        raise ValueError(f"{path}: expected a non-empty JSON array of moments")
    if float(data[0]) != 1.0:
        raise ValueError(f"{path}: element 0 must equal 1")
    return MomentProvider.custom(data)


def parse_provider(descriptor: str) -> MomentProvider:
    """Parse ``exp:rate``, ``normal:m,sd``, ``laplace:a,b``, ``degenerate:c`` or ``custom:file.json``."""
    name, _, rest = descriptor.partition(":")
    name = name.strip().lower()
    if name == "custom":
        return load_custom(rest)
    try:
        values = [float(v) for v in rest.split(",")] if rest else []
    except ValueError:
        raise ValueError(f"bad parameters in {descriptor!r}") from None
    if name in ("exp", "exponential"):
        return MomentProvider.exponential(*values)
    if name in ("normal", "laplace"):
        if len(values) != 2:
            raise ValueError(f"{name} needs two parameters, got {descriptor!r}")
        return MomentProvider(name, tuple(values))
    if name == "degenerate":
        return MomentProvider.degenerate(*values)
    raise ValueError(f"unknown family in {descriptor!r}")
