"""Maximum-likelihood refinement of a moment-method fit by EM.

Each supported mixture family has a closed-form M-step:

===================  ===========================  =========================
family               component law                M-step for the parameter
===================  ===========================  =========================
normal_scale         N(0, s_j**2)                 weighted mean of x**2
normal_location      N(m_j, scale**2)             weighted mean
laplace_scale        Laplace(0, b_j)              weighted mean of |x|
laplace_location     Laplace(m_j, scale)          weighted median
exponential_scale    Exp(mean t_j)                weighted mean
===================  ===========================  =========================

The number of components is fixed by the caller and never changed here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from .errors import ComponentCollapseError
from .known_components import MomentProvider
from .orthopoly import DiscreteDistribution

__all__ = ["MixtureModel", "em_fit", "initial_model", "FAMILIES"]

FAMILIES = ("normal_scale", "normal_location", "laplace_scale", "laplace_location", "exponential_scale")
LOCATION_FAMILIES = ("normal_location", "laplace_location")
_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)

MIN_WEIGHT = 1e-8
MIN_RELATIVE_SCALE = 1e-10


@dataclass(frozen=True)
class MixtureModel:
    """Finite mixture of one parametric family.

    ``params`` holds one parameter per component: the scale for ``*_scale``
    families (normal sd, Laplace b, exponential mean) and the location for
    ``*_location`` families, which share the fixed ``scale``.
    """

    family: str
    params: tuple[float, ...]
    weights: tuple[float, ...]
    scale: float | None = None
    loglik: float = float("nan")
    trace: tuple[float, ...] = field(default=(), compare=False, repr=False)
    n_iter: int = 0

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.family not in FAMILIES:
            raise ValueError(f"unknown mixture family {self.family!r}")
        if len(self.params) != len(self.weights) or not self.params:
            raise ValueError("params and weights must be non-empty and of equal length")
        if any(not (0.0 < w <= 1.0) for w in self.weights):
            raise ValueError("weights must lie in (0, 1]")
        if abs(math.fsum(self.weights) - 1.0) > 1e-10:
            raise ValueError("weights must sum to 1")
        if self.family in LOCATION_FAMILIES:
            if self.scale is None or not self.scale > 0:
                raise ValueError(f"{self.family} needs a positive common scale")
        elif any(not p > 0 for p in self.params):
            raise ValueError("scale parameters must be strictly positive")

    @property
    def k(self) -> int:
        return len(self.params)

    def component_logpdf(self, x) -> np.ndarray:
        """``(n, k)`` array of component log densities."""
        return _component_logpdf_t(self, np.asarray(x, dtype=float).ravel()).T

    def logpdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        return _logsumexp_rows(_component_logpdf_t(self, x) + np.log(self.weights)[:, None])

    def log_likelihood(self, x) -> float:
        return float(np.sum(self.logpdf(x)))

    def cdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        xs = x[..., None]
        p = np.asarray(self.params)
        if self.family == "normal_scale":
            comp = ndtr(xs / p)
        elif self.family == "normal_location":
            comp = ndtr((xs - p) / self.scale)
        elif self.family in ("laplace_scale", "laplace_location"):
            loc, b = (0.0, p) if self.family == "laplace_scale" else (p, self.scale)
            u = (xs - loc) / b
            # 0.5*exp(u) below the centre, 1 - 0.5*exp(-u) above
            comp = np.where(u < 0, 0.5 * np.exp(np.minimum(u, 0)), 1 - 0.5 * np.exp(-np.maximum(u, 0)))
        else:
            comp = np.where(xs > 0, -np.expm1(-np.maximum(xs, 0) / p), 0.0)
        return comp @ np.asarray(self.weights)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        labels = rng.choice(self.k, size=n, p=np.asarray(self.weights))
        p = np.asarray(self.params)[labels]
        if self.family == "normal_scale":
            return p * rng.standard_normal(n)
        if self.family == "normal_location":
            return p + self.scale * rng.standard_normal(n)
        if self.family == "laplace_scale":
            return p * rng.laplace(0.0, 1.0, n)
        if self.family == "laplace_location":
            return p + rng.laplace(0.0, self.scale, n)
        return p * rng.exponential(1.0, n)

    def sorted(self) -> "MixtureModel":
        order = np.argsort(self.params, kind="stable")
        return replace(self, params=tuple(np.asarray(self.params)[order]),
                       weights=tuple(np.asarray(self.weights)[order]))

    def to_json(self) -> dict:
        return {
            "family": self.family,
            "params": list(self.params),
            "weights": list(self.weights),
            "scale": self.scale,
            "loglik": self.loglik if math.isfinite(self.loglik) else None,
            "n_iter": self.n_iter,
        }

    @classmethod
    def from_json(cls, data: dict) -> "MixtureModel":
        ll = data.get("loglik")
        return cls(data["family"], tuple(data["params"]), tuple(data["weights"]),
                   data.get("scale"), float("nan") if ll is None else float(ll),
                   n_iter=int(data.get("n_iter", 0)))


def _component_logpdf_t(model: MixtureModel, x: np.ndarray, ax: np.ndarray | None = None) -> np.ndarray:
    # (k, n) layout keeps each component's row contiguous
    p = np.asarray(model.params)[:, None]
    fam = model.family
    if fam == "normal_scale":
        return (-_LOG_SQRT_2PI - np.log(p)) - 0.5 * (x / p) ** 2
    if fam == "normal_location":
        return (-_LOG_SQRT_2PI - math.log(model.scale)) - 0.5 * ((x - p) / model.scale) ** 2
    if fam == "laplace_scale":
        return -np.log(2 * p) - (np.abs(x) if ax is None else ax) / p
    if fam == "laplace_location":
        return -math.log(2 * model.scale) - np.abs(x - p) / model.scale
    with np.errstate(divide="ignore"):
        return np.where(x >= 0, -np.log(p) - x / p, -np.inf)


def _logsumexp_rows(a: np.ndarray) -> np.ndarray:
    """Column-wise log-sum-exp of a ``(k, n)`` array."""
    if a.shape[0] == 1:
        return a[0].copy()
    top = a.max(axis=0)
    safe = np.where(np.isfinite(top), top, 0.0)
    total = np.zeros_like(top)
    for row in a:
        total += np.exp(row - safe)
    with np.errstate(divide="ignore"):
        return np.log(total) + safe


def initial_model(distribution: DiscreteDistribution, z: MomentProvider) -> MixtureModel:
    """Translate a moment-method estimate of Y into a mixture for X."""
    lam = np.asarray(distribution.support)
    w = np.asarray(distribution.weights)
    w = w / w.sum()
    if distribution.scheme == "location":
        if z.family == "normal":
            return MixtureModel("normal_location", tuple(lam + z.params[0]), tuple(w), z.params[1])
        if z.family == "laplace":
            return MixtureModel("laplace_location", tuple(lam + z.params[0]), tuple(w), z.params[1])
        raise ValueError(f"no refinable location family for Z = {z.family}")
    if z.family == "normal" and z.params[0] == 0.0:
        return MixtureModel("normal_scale", tuple(lam * z.params[1]), tuple(w))
    if z.family == "laplace" and z.params[0] == 0.0:
        return MixtureModel("laplace_scale", tuple(lam * z.params[1]), tuple(w))
    if z.family == "exponential":
        return MixtureModel("exponential_scale", tuple(lam / z.params[0]), tuple(w))
    raise ValueError(f"no refinable scale family for Z = {z.describe()}")


def _weighted_median(xs: np.ndarray, r: np.ndarray) -> float:
    cs = np.cumsum(r)
    return float(xs[min(int(np.searchsorted(cs, 0.5 * cs[-1])), xs.size - 1)])


def em_fit(
    sample: Sequence[float],
    init: MixtureModel,
    max_iter: int = 500,
    tol: float = 1e-8,
    debug: bool = False,
) -> MixtureModel:
    """Run EM from ``init`` until the log-likelihood gain drops below ``tol``.

    Returns a model carrying the final log-likelihood, the per-iteration
    log-likelihood ``trace`` and the number of M-steps taken.  Raises
    :class:`ComponentCollapseError` if a weight or scale degenerates.
    """
    x = np.asarray(sample, dtype=float).ravel()
    n, k = x.size, init.k
    if n <= k:
        raise ValueError("sample must be larger than the number of components")
    family = init.family
    params = np.asarray(init.params, dtype=float)
    w = np.asarray(init.weights, dtype=float)
    sample_scale = float(np.sqrt(np.mean(x * x))) or 1.0
    if family == "laplace_location":
        order = np.argsort(x, kind="stable")
        xs = x[order]
    ax = np.abs(x)
    trace: list[float] = []
    model = init
    it = 0
    while True:
        model = MixtureModel(family, tuple(params), tuple(w), init.scale)
        logp = _component_logpdf_t(model, x, ax) + np.log(w)[:, None]
        lse = _logsumexp_rows(logp)
        ll = float(np.sum(lse))
        if debug and trace:
            assert ll >= trace[-1] - 1e-9 * max(1.0, abs(trace[-1])), "EM log-likelihood decreased"
        trace.append(ll)
        if len(trace) > 1 and trace[-1] - trace[-2] < tol or it >= max_iter:
            break
        r = np.exp(logp - lse)
        nk = r.sum(axis=1)
        w = nk / n
        for j in range(k):
            if not w[j] >= MIN_WEIGHT:
                raise ComponentCollapseError(j, f"weight {w[j]!r}")
        if family == "normal_scale":
            params = np.sqrt(r @ (x * x) / nk)
        elif family == "laplace_scale":
            params = (r @ ax) / nk
        elif family in ("normal_location", "exponential_scale"):
            params = (r @ x) / nk
        else:
            params = np.array([_weighted_median(xs, r[j, order]) for j in range(k)])
        if family not in LOCATION_FAMILIES:
            for j in range(k):
                if not params[j] >= MIN_RELATIVE_SCALE * sample_scale:
                    raise ComponentCollapseError(j, f"scale {params[j]!r}")
        w = w / w.sum()
        it += 1
    return replace(model, loglik=ll, trace=tuple(trace), n_iter=it)
