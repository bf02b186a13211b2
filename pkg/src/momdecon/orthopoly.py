"""Orthonormal polynomials of a moment sequence and the recovered discrete law.

``P_s`` is the determinant of the first ``s`` Hankel rows stacked on the row
``(1, x, ..., x**s)``, scaled by ``1 / sqrt(D_{s-1} D_s)``.  The last member
``P_k`` is left unscaled (``D_k`` is zero for exact moments); its roots are the
support points and the Christoffel numbers ``1 / sum_{i<k} P_i(x)**2`` are the
weights.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import (
    ComplexRootError,
    DegeneratePolynomialError,
    EstimationError,
    NegativeSupportError,
    NonPositiveDeterminantError,
)
from .hankel import HankelReport, hankel_determinant, hankel_matrix

log = logging.getLogger(__name__)

__all__ = [
    "Polynomial",
    "DiscreteDistribution",
    "orthonormal_family",
    "roots",
    "weights",
    "assemble",
]

SCHEMES = ("scale", "location", "even_reduced", "absolute")
IMAG_TOLERANCE = 1e-6
CLAMP_TOLERANCE = 1e-8
MERGE_SEPARATION = 1e-7


@dataclass(frozen=True)
class Polynomial:
    """Real polynomial with ascending coefficients (index = power)."""

    coefficients: tuple[float, ...]

    def __post_init__(self):
        c = [float(v) for v in self.coefficients]
        while len(c) > 1 and c[-1] == 0.0:
            c.pop()
        if not c:
            c = [0.0]
        object.__setattr__(self, "coefficients", tuple(c))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, x):
        acc = 0.0 * x
        for c in reversed(self.coefficients):
            acc = acc * x + c
        return acc

    def derivative(self) -> "Polynomial":
        c = self.coefficients
        return Polynomial(tuple(i * c[i] for i in range(1, len(c))) or (0.0,))


@dataclass(frozen=True)
class DiscreteDistribution:
    support: tuple[float, ...]
    weights: tuple[float, ...]
    scheme: str = "scale"
    raw_weights: tuple[float, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(float(s) for s in self.support))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if len(self.support) != len(self.weights) or not self.support:
            raise ValueError("support and weights must be non-empty and of equal length")
        if any(b <= a for a, b in zip(self.support, self.support[1:])):
            raise ValueError("support must be strictly increasing")
        if any(not (0.0 < w <= 1.0) for w in self.weights):
            raise ValueError("weights must lie in (0, 1]")
        if abs(math.fsum(self.weights) - 1.0) > 1e-6:
            raise ValueError("weights must sum to 1")

    @property
    def k(self) -> int:
        return len(self.support)

    def to_json(self) -> dict:
        out = {"support": list(self.support), "weights": list(self.weights), "scheme": self.scheme}
        if self.raw_weights is not None:
            out["raw_weights"] = list(self.raw_weights)
        return out

    @classmethod
    def from_json(cls, data: dict) -> "DiscreteDistribution":
        raw = data.get("raw_weights")
        return cls(tuple(data["support"]), tuple(data["weights"]), data.get("scheme", "scale"),
                   tuple(raw) if raw is not None else None)


def orthonormal_family(mu, k: int, dets: Sequence[float] | None = None) -> list[Polynomial]:
    """``[P_0, ..., P_k]`` for the moment sequence ``mu``.

    ``dets`` may pass in already computed ``D_0..D_{k-1}``.  The cofactor
    expansion of the determinant form of ``P_s`` along its variable row is,
    by Cramer's rule, ``D_{s-1}`` times the monic polynomial whose lower
    coefficients solve ``H_{s-1} c = -(mu_s, ..., mu_{2s-1})``.  Solving that
    system by pivoted LU is far more accurate than evaluating each minor on
    its own.  ``P_s`` for ``s < k`` carries the factor ``1/sqrt(D_{s-1} D_s)``;
    ``P_k`` is left unnormalised since ``D_k`` may be nonpositive.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    v = tuple(getattr(mu, "values", mu))
    if len(v) < 2 * k:
        raise ValueError(f"P_{k} needs moments up to order {2 * k - 1}")
    d = list(dets[:k]) if dets is not None and len(dets) >= k else [
        hankel_determinant(v, s) for s in range(k)
    ]
    for s in range(k):
        if not d[s] > 0:
            raise NonPositiveDeterminantError(s, d[s])
    family = [Polynomial((1.0,))]
    for s in range(1, k + 1):
        h = hankel_matrix(v, s - 1)
        rhs = -np.asarray(v[s:2 * s], dtype=float)
        lower = scipy.linalg.lu_solve(scipy.linalg.lu_factor(h, check_finite=False), rhs)
        monic = [*lower.tolist(), 1.0]
        if s < k:
            factor = math.sqrt(d[s - 1] / d[s])
        else:
            factor = d[s - 1]
        family.append(Polynomial(tuple(factor * c for c in monic)))
    return family


def roots(p: Polynomial) -> list[float]:
    """Real roots of ``p``, ascending.

    Eigenvalues of the balanced companion matrix of the monic rescaling, one
    Newton step each on ``p``.  A root whose imaginary part survives the
    ``1e-6 * (1 + |re|)`` test means the moments did not yield a valid
    polynomial and raises :class:`ComplexRootError`.
    """
    c = np.asarray(p.coefficients, dtype=float)
    n = p.degree
    if n < 1:
        raise ValueError("roots needs a polynomial of degree >= 1")
    if not np.all(np.isfinite(c)):
        raise DegeneratePolynomialError("non-finite coefficients")
    lead = c[-1]
    if abs(lead) <= 1e-14 * np.max(np.abs(c)):
        raise DegeneratePolynomialError(f"leading coefficient {lead!r} is negligible")
    monic = c[:-1] / lead
    companion = np.zeros((n, n))
    companion[1:, :-1] = np.eye(n - 1)
    companion[:, -1] = -monic
    balanced, _ = scipy.linalg.matrix_balance(companion)
    z = scipy.linalg.eigvals(balanced)
    dp = p.derivative()
    polished = []
    for r in z:
        slope = dp(r)
        if slope != 0:
            r = r - p(r) / slope
        polished.append(complex(r))
    out = []
    for r in polished:
        if abs(r.imag) > IMAG_TOLERANCE * (1.0 + abs(r.real)):
            raise ComplexRootError(f"root {r} is not real")
        out.append(r.real)
    return sorted(out)


def weights(family: Sequence[Polynomial], roots: Sequence[float], normalize: bool = True) -> list[float]:
    """Christoffel numbers ``1 / sum_i P_i(x_j)**2`` at each root.

    ``family`` is ``P_0..P_{k-1}``; by default the result is rescaled to sum
    to one (exact moments already do).
    """
    raw = []
    for x in roots:
        total = math.fsum(q(x) ** 2 for q in family)
        w = 1.0 / total if total > 0 else math.inf
        if not math.isfinite(w):
            raise EstimationError(f"weight at {x!r} is not finite")
        raw.append(w)
    if not normalize:
        return raw
    s = math.fsum(raw)
    log.debug("raw Christoffel weights %s (sum %r)", raw, s)
    return [w / s for w in raw]


def _merge(support: list[float], w: list[float], raw: list[float]):
    scale = max((abs(s) for s in support), default=0.0) or 1.0
    out_s, out_w, out_r = [support[0]], [w[0]], [raw[0]]
    for s, wi, ri in zip(support[1:], w[1:], raw[1:]):
        if s - out_s[-1] < MERGE_SEPARATION * scale:
            total = out_w[-1] + wi
            out_s[-1] = (out_s[-1] * out_w[-1] + s * wi) / total
            out_w[-1] = total
            out_r[-1] += ri
        else:
            out_s.append(s)
            out_w.append(wi)
            out_r.append(ri)
    return out_s, out_w, out_r


def assemble(report: HankelReport, mu, scheme: str = "scale",
             clamp_tolerance: float = CLAMP_TOLERANCE) -> DiscreteDistribution:
    """Discrete law on ``k*`` points from a Hankel scan of ``mu``.

    Under ``even_reduced`` the roots estimate the squared support and are
    mapped back by the positive square root; under ``even_reduced`` and
    ``absolute`` negative roots below ``-clamp_tolerance`` are an error.
    """
    if report.k_star is None:
        raise EstimationError("Hankel scan exhausted without a nonpositive determinant")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    k = report.k_star
    family = orthonormal_family(mu, k, report.determinants)
    support = roots(family[k])
    raw = weights(family[:k], support, normalize=False)
    total = math.fsum(raw)
    w = [r / total for r in raw]
    if scheme in ("even_reduced", "absolute"):
        mapped = []
        for x in support:
            if x < -clamp_tolerance:
                raise NegativeSupportError(f"support point {x!r} is negative under {scheme}")
            x = max(x, 0.0)
            mapped.append(math.sqrt(x) if scheme == "even_reduced" else x)
        support = mapped
    support, w, raw = _merge(support, w, raw)
    return DiscreteDistribution(tuple(support), tuple(w), scheme, tuple(raw))
