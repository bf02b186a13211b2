"""End-to-end moment-method fit of a sample.

Routes
------
``direct``
    scale scheme, every moment of Z non-zero: divide moments.
``even_reduced``
    scale scheme with Z symmetric about zero: square the sample, use the
    moments of Z**2 and take square roots of the recovered support.
``absolute``
    scale scheme on |X| with the absolute moments of Z; estimates the law
    of |Y|.
``location``
    location scheme, binomial recurrence.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import AssumptionBViolation, EstimationError
from .hankel import HankelReport, estimate_k
from .known_components import (
    MomentProvider,
    absolute_provider,
    check_assumptions,
    squared_provider,
)
from .moments import (
    MomentSequence,
    deconvolve_location,
    deconvolve_scale,
    empirical_moments,
    even_reduce,
)
from .orthopoly import DiscreteDistribution, assemble

log = logging.getLogger(__name__)

__all__ = ["FitResult", "choose_route", "deconvolved_moments", "fit_sample", "check_k_max"]

K_MAX_DEFAULT = 10
K_MAX_SAFE = 15
ROUTES = ("auto", "direct", "even_reduced", "absolute", "location")
_ROUTE_SCHEME = {
    "direct": "scale",
    "even_reduced": "even_reduced",
    "absolute": "absolute",
    "location": "location",
}


@dataclass
class FitResult:
    route: str
    moments: MomentSequence
    hankel: HankelReport
    distribution: DiscreteDistribution | None = None
    failure: str | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def k_star(self) -> int | None:
        return self.hankel.k_star

    @property
    def ok(self) -> bool:
        return self.distribution is not None


def check_k_max(k_max: int, allow_high_order: bool = False) -> None:
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    if k_max > K_MAX_SAFE and not allow_high_order:
        raise ValueError(
            f"k_max={k_max} needs sample moments of order {2 * k_max}, which are too noisy "
            f"to trust; pass allow_high_order=True to insist"
        )


def choose_route(z: MomentProvider, scheme: str, j_max: int) -> str:
    if scheme == "location":
        return "location"
    if scheme != "scale":
        raise ValueError(f"unknown scheme {scheme!r}")
    check = check_assumptions(z, j_max)
    if check.assumption_b_holds:
        return "direct"
    if z.is_symmetric:
        return "even_reduced"
    raise AssumptionBViolation(check.first_zero_order)


def deconvolved_moments(sample: Sequence[float], z: MomentProvider, route: str, j_max: int) -> MomentSequence:
    """Moments of Y (or of Y**2, |Y|) up to ``j_max`` along ``route``."""
    x = np.asarray(sample, dtype=float)
    if route == "direct":
        return deconvolve_scale(empirical_moments(x, j_max), z)
    if route == "even_reduced":
        return deconvolve_scale(empirical_moments(even_reduce(x), j_max), squared_provider(z, j_max))
    if route == "absolute":
        return deconvolve_scale(empirical_moments(np.abs(x), j_max), absolute_provider(z, j_max))
    if route == "location":
        return deconvolve_location(empirical_moments(x, j_max), z)
    raise ValueError(f"unknown route {route!r}")


def _fit_route(x, z, route, k_max, tolerance, precision) -> FitResult:
    mu = deconvolved_moments(x, z, route, 2 * k_max)
    report = estimate_k(mu, k_max, tolerance, precision)
    result = FitResult(route, mu, report)
    if report.k_star is None:
        result.failure = f"no nonpositive Hankel determinant up to k_max={k_max}"
        return result
    try:
        result.distribution = assemble(report, mu, _ROUTE_SCHEME[route])
    except EstimationError as exc:
        result.failure = str(exc)
    return result


def fit_sample(
    sample: Sequence[float],
    z: MomentProvider,
    scheme: str = "scale",
    k_max: int = K_MAX_DEFAULT,
    tolerance: float = 0.0,
    route: str = "auto",
    fallback: bool = False,
    precision: str = "double",
    allow_high_order: bool = False,
) -> FitResult:
    """Moment-method estimate of Y from a sample of X.

    Estimation failures (exhausted scan, complex or negative roots) are
    reported on the result, not raised.  With ``fallback=True`` a failed
    even-reduced fit is retried on absolute moments when Z admits them.
    """
    check_k_max(k_max, allow_high_order)
    if route not in ROUTES:
        raise ValueError(f"unknown route {route!r}")
    notes = []
    if route == "auto":
        route = choose_route(z, scheme, 2 * k_max)
        if route == "even_reduced":
            check = check_assumptions(z, 2 * k_max)
            notes.append(
                f"moment of order {check.first_zero_order} of Z vanishes; "
                "using even reduction (squared sample, moments of Z**2)"
            )
    result = _fit_route(sample, z, route, k_max, tolerance, precision)
    if fallback and not result.ok and route == "even_reduced":
        try:
            retry = _fit_route(sample, z, "absolute", k_max, tolerance, precision)
        except ValueError:
            retry = None
        if retry is not None:
            notes.append(f"even-reduced fit failed ({result.failure}); retried on absolute moments")
            if retry.ok:
                result = retry
            else:
                notes.append(f"absolute-moment fit failed too ({retry.failure})")
    result.warnings[:0] = notes
    for note in notes:
        log.info(note)
    return result
