"""Empirical moments and deconvolution of the unknown component's moments.

Two observation schemes are supported:

* scale, ``X = Y * Z``: moments factorise, ``E X^j = E Z^j * E Y^j``;
* location, ``X = Y + Z``: moments follow the binomial convolution and Y's
  moments are recovered by forward substitution.

Deconvolved sequences are deliberately left as they come out: they need not
be the moment sequence of any measure, and the cluster-count rule in
:mod:`momdecon.hankel` relies on that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AssumptionBViolation, MomentOrderError
from .known_components import MomentProvider, moment

__all__ = [
    "MomentSequence",
    "empirical_moments",
    "deconvolve_scale",
    "deconvolve_location",
    "even_reduce",
    "discrete_moments",
    "exact_mixture_moments",
]

PROVENANCES = ("exact", "empirical", "deconvolved")


@dataclass(frozen=True)
class MomentSequence:
    values: tuple[float, ...]
    provenance: str = "exact"
    sample_size: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if len(self.values) < 3:
            raise ValueError("a moment sequence needs at least orders 0..2")
        if self.values[0] != 1.0:
            raise ValueError("values[0] must equal 1")
        if self.sample_size is not None and self.sample_size < 1:
            raise ValueError("sample_size must be positive")

    @property
    def max_order(self) -> int:
        return len(self.values) - 1

    def __getitem__(self, j):
        return self.values[j]

    def __len__(self):
        return len(self.values)

    def to_json(self) -> dict:
        return {
            "values": list(self.values),
            "provenance": self.provenance,
            "sample_size": self.sample_size,
        }


def _as_moments(m) -> MomentSequence:
    if isinstance(m, MomentSequence):
        return m
    return MomentSequence(tuple(m))


def empirical_moments(sample: Sequence[float], j_max: int) -> MomentSequence:
    """Raw sample moments ``(1/n) sum X_i^j`` for ``j = 0..j_max``.

    Power sums use :func:`math.fsum`, which is exactly rounded, so the result
    does not depend on the order of the sample.
    """
    if j_max < 2:
        raise ValueError("j_max must be at least 2")
    x = np.asarray(sample, dtype=float).ravel()
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    if not np.all(np.isfinite(x)):
        raise ValueError("sample contains non-finite values")
    values = [1.0]
    power = np.ones_like(x)
    for _ in range(j_max):
        power = power * x
        values.append(math.fsum(power.tolist()) / n)
    return MomentSequence(tuple(values), "empirical", n)


def deconvolve_scale(m, z: MomentProvider) -> MomentSequence:
    """Moments of Y from moments of ``X = Y * Z`` by termwise division."""
    m = _as_moments(m)
    if m.max_order > z.max_order:
        raise MomentOrderError(f"known component supplies moments only to order {z.max_order}")
    out = [1.0]
    for j in range(1, len(m)):
        zj = moment(z, j)
        if zj == 0.0:
            raise AssumptionBViolation(j)
        out.append(m[j] / zj)
    return MomentSequence(tuple(out), "deconvolved", m.sample_size)


def deconvolve_location(m, z: MomentProvider) -> MomentSequence:
    """Moments of Y from moments of ``X = Y + Z`` by the binomial recurrence.

    ``mu_s = m_s - sum_{j=1..s} C(s, j) E[Z^j] mu_{s-j}``; nothing is divided,
    so vanishing moments of Z are fine here.
    """
    m = _as_moments(m)
    if m.max_order > z.max_order:
        raise MomentOrderError(f"known component supplies moments only to order {z.max_order}")
    zm = [moment(z, j) for j in range(len(m))]
    mu = [1.0]
    row = [1.0]  # Pascal row s - 1
    for s in range(1, len(m)):
        row = [1.0] + [row[i - 1] + row[i] for i in range(1, s)] + [1.0]
        # the terms nearly cancel when Z dominates; fsum keeps the sum exactly rounded
        mu.append(math.fsum([m[s], *(-row[j] * zm[j] * mu[s - j] for j in range(1, s + 1))]))
    return MomentSequence(tuple(mu), "deconvolved", m.sample_size)


def even_reduce(sample: Sequence[float]) -> np.ndarray:
    """Element-wise squares; pair with :func:`~momdecon.known_components.squared_provider`."""
    x = np.asarray(sample, dtype=float)
    return x * x


def discrete_moments(support: Sequence[float], weights: Sequence[float], j_max: int) -> list[float]:
    """Exact moments ``sum_k w_k * s_k**j`` of a finite discrete law."""
    out = []
    for j in range(j_max + 1):
        out.append(math.fsum(w * s**j for s, w in zip(support, weights)))
    return out


def exact_mixture_moments(
    support: Sequence[float],
    weights: Sequence[float],
    z: MomentProvider,
    scheme: str,
    j_max: int,
) -> MomentSequence:
    """Exact moments of X for a discrete Y and known Z under ``scheme``."""
    ym = discrete_moments(support, weights, j_max)
    ym[0] = 1.0
    if scheme == "scale":
        xm = [moment(z, j) * ym[j] for j in range(j_max + 1)]
    elif scheme == "location":
        xm = []
        for s in range(j_max + 1):
            terms = [math.comb(s, j) * moment(z, j) * ym[s - j] for j in range(s + 1)]
            xm.append(math.fsum(terms))
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    xm[0] = 1.0
    return MomentSequence(tuple(xm), "exact")
