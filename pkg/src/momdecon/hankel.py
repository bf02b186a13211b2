"""Hankel determinants of a moment sequence and the cluster-count estimator.

For the moments of a law on exactly k points, ``D_s > 0`` for ``s < k`` and
``D_s = 0`` from ``s = k`` on.  The estimator ``k*`` is the first order whose
(estimated) determinant is not positive.

Determinants come from a triangular factorisation.  Because the stopping rule
depends only on a sign, a result that lies within the rounding-error floor of
the factorisation is recomputed exactly in rational arithmetic (every double
is an exact rational), so exactly singular inputs yield exactly zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import MomentOrderError

__all__ = [
    "HankelReport",
    "hankel_matrix",
    "hankel_determinant",
    "determinant",
    "estimate_k",
]

PIVOT_FLOOR = 1e-300
EXTENDED_FROM_ORDER = 6
EXTENDED_PREC_BITS = 106  # double-double significand
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class HankelReport:
    determinants: tuple[float, ...]
    k_star: int | None
    stop_reason: str
    tolerance_used: float

    def __post_init__(self):
        if self.stop_reason not in ("nonpositive_found", "order_exhausted"):
            raise ValueError(f"unknown stop reason {self.stop_reason!r}")
        if (self.k_star is None) != (self.stop_reason == "order_exhausted"):
            raise ValueError("k_star must be present exactly when a nonpositive determinant was found")

    def to_json(self) -> dict:
        return {
            "determinants": list(self.determinants),
            "k_star": self.k_star,
            "stop_reason": self.stop_reason,
            "tolerance_used": self.tolerance_used,
        }


def _values(mu) -> tuple[float, ...]:
    return tuple(getattr(mu, "values", mu))


def hankel_matrix(mu, s: int) -> np.ndarray:
    """The (s+1) x (s+1) matrix ``H[i, j] = mu[i + j]``."""
    v = _values(mu)
    if len(v) < 2 * s + 1:
        raise MomentOrderError(f"D_{s} needs moments up to order {2 * s}, have {len(v) - 1}")
    idx = np.add.outer(np.arange(s + 1), np.arange(s + 1))
    return np.asarray(v, dtype=float)[idx]


def _symmetric_pivot_det(a: np.ndarray) -> float | None:
    """LDL^T with diagonal pivoting; None if every remaining pivot is negligible."""
    a = a.copy()
    n = a.shape[0]
    det = 1.0
    for k in range(n):
        diag = np.abs(np.diagonal(a)[k:])
        p = k + int(np.argmax(diag))
        if diag[p - k] < PIVOT_FLOOR:
            return None
        if p != k:
            # symmetric permutation: det(P A P^T) = det(A)
            a[[k, p], :] = a[[p, k], :]
            a[:, [k, p]] = a[:, [p, k]]
        piv = a[k, k]
        det *= piv
        if k + 1 < n:
            a[k + 1:, k + 1:] -= np.outer(a[k + 1:, k], a[k, k + 1:]) / piv
    return float(det)


def _full_pivot_det(a: np.ndarray) -> float:
    a = a.copy()
    n = a.shape[0]
    det = 1.0
    for k in range(n):
        sub = np.abs(a[k:, k:])
        i, j = np.unravel_index(int(np.argmax(sub)), sub.shape)
        if sub[i, j] == 0.0:
            return 0.0
        i += k
        j += k
        if i != k:
            a[[k, i], :] = a[[i, k], :]
            det = -det
        if j != k:
            a[:, [k, j]] = a[:, [j, k]]
            det = -det
        piv = a[k, k]
        det *= piv
        if k + 1 < n:
            a[k + 1:, k + 1:] -= np.outer(a[k + 1:, k], a[k, k + 1:]) / piv
    return float(det)


def _exact_det(a: np.ndarray) -> float:
    m = [[Fraction(float(x)) for x in row] for row in a]
    n = len(m)
    det = Fraction(1)
    for k in range(n):
        p = next((i for i in range(k, n) if m[i][k] != 0), None)
        if p is None:
            return 0.0
        if p != k:
            m[k], m[p] = m[p], m[k]
            det = -det
        piv = m[k][k]
        det *= piv
        for i in range(k + 1, n):
            f = m[i][k] / piv
            if f:
                row_k, row_i = m[k], m[i]
                for j in range(k + 1, n):
                    row_i[j] -= f * row_k[j]
    return float(det)


def _rounding_floor(a: np.ndarray) -> float:
    n = a.shape[0]
    with np.errstate(over="ignore"):
        hadamard = float(np.prod(np.linalg.norm(a, axis=1)))
    return 8.0 * n * n * _EPS * hadamard


def _extended_det(a: np.ndarray) -> float:
    import mpmath

    with mpmath.workprec(EXTENDED_PREC_BITS):
        return float(mpmath.det(mpmath.matrix(a.tolist())))


def _certify(a: np.ndarray, det: float) -> float:
    floor = _rounding_floor(a)
    if not math.isfinite(floor) or abs(det) <= floor:
        return _exact_det(a)
    return det


def determinant(a, precision: str = "double") -> float:
    """Determinant of a general square matrix by fully pivoted elimination."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("determinant needs a square matrix")
    if a.shape[0] == 0:
        return 1.0
    if precision == "extended" and a.shape[0] > EXTENDED_FROM_ORDER:
        return _extended_det(a)
    return _certify(a, _full_pivot_det(a))


def hankel_determinant(mu, s: int, precision: str = "double") -> float:
    """``D_s``, the determinant of the (s+1) x (s+1) Hankel matrix of ``mu``.

    ``precision="extended"`` evaluates orders ``s >= 6`` with a 106-bit
    significand instead of doubles.
    """
    if s < 0:
        raise ValueError("order must be non-negative")
    if precision not in ("double", "extended"):
        raise ValueError(f"unknown precision {precision!r}")
    h = hankel_matrix(mu, s)
    if precision == "extended" and s >= EXTENDED_FROM_ORDER:
        return _extended_det(h)
    det = _symmetric_pivot_det(h)
    if det is None:
        det = _full_pivot_det(h)
    return _certify(h, det)


def estimate_k(mu, k_max: int = 10, tolerance: float = 0.0, precision: str = "double") -> HankelReport:
    """Scan ``D_1, D_2, ...`` and stop at the first ``D_s <= tolerance``.

    The scan also stops, without an estimate, once ``k_max`` is passed or the
    sequence runs out of moments; exhaustion is a report state, not an error.
    """
    if tolerance < 0:
        raise ValueError("tolerance must be non-negative")
    v = _values(mu)
    dets = [hankel_determinant(v, 0, precision)]
    for s in range(1, k_max + 1):
        if 2 * s > len(v) - 1:
            break
        d = hankel_determinant(v, s, precision)
        dets.append(d)
        if d <= tolerance:
            return HankelReport(tuple(dets), s, "nonpositive_found", tolerance)
    return HankelReport(tuple(dets), None, "order_exhausted", tolerance)
