"""Goodness of fit of a mixture model: EDF statistics and bootstrap p-values.

The model parameters are themselves estimated from the data, so the usual
asymptotic tables do not apply.  P-values come from a parametric bootstrap
that draws from the fitted model and, by default, refits it by EM before
evaluating the statistic on each replicate.
"""

from __future__ import annotations

import csv
import math
import secrets
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EstimationError
from .refine import MixtureModel, em_fit

__all__ = [
    "GofReport",
    "AndersonDarlingClampWarning",
    "mixture_cdf",
    "ks_statistic",
    "cvm_statistic",
    "ad_statistic",
    "bootstrap_pvalue",
    "ecdf_table",
    "write_ecdf_csv",
]

AD_CLAMP = 1e-15


class AndersonDarlingClampWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class GofReport:
    statistic_name: str
    statistic_value: float
    p_value: float
    bootstrap_reps: int
    failures: int = 0
    refit: str = "refine"
    seed: int | None = None
    clamped: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.statistic_value) and self.statistic_value >= 0):
            raise ValueError("statistic must be finite and non-negative")
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError("p-value must lie in [0, 1]")

    def to_json(self) -> dict:
        return {
            "statistic_name": self.statistic_name,
            "statistic_value": self.statistic_value,
            "p_value": self.p_value,
            "bootstrap_reps": self.bootstrap_reps,
            "failures": self.failures,
            "refit": self.refit,
            "seed": self.seed,
            "clamped": self.clamped,
        }


def mixture_cdf(model: MixtureModel, x):
    """``sum_j w_j F_j(x)``; scalar in, scalar out."""
    out = model.cdf(x)
    return float(out) if np.ndim(out) == 0 else out


def _model_cdf_sorted(sample, model: MixtureModel) -> np.ndarray:
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("empty sample")
    return model.cdf(x)


def _ks(u: np.ndarray) -> float:
    n = u.size
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - u), np.max(u - (i - 1) / n)))


def _cvm(u: np.ndarray) -> float:
    n = u.size
    i = np.arange(1, n + 1)
    return float(1.0 / (12 * n) + np.sum((u - (2 * i - 1) / (2 * n)) ** 2))


def _ad(u: np.ndarray) -> tuple[float, bool]:
    n = u.size
    clamped = bool(np.any(u < AD_CLAMP) or np.any(u > 1 - AD_CLAMP))
    u = np.clip(u, AD_CLAMP, 1 - AD_CLAMP)
    i = np.arange(1, n + 1)
    s = np.sum((2 * i - 1) * (np.log(u) + np.log1p(-u[::-1])))
    return float(-n - s / n), clamped


def ks_statistic(sample, model: MixtureModel) -> float:
    """Kolmogorov-Smirnov distance between the sample EDF and the model CDF."""
    return _ks(_model_cdf_sorted(sample, model))


def cvm_statistic(sample, model: MixtureModel) -> float:
    """Cramer-von Mises W^2."""
    return _cvm(_model_cdf_sorted(sample, model))


def ad_statistic(sample, model: MixtureModel) -> float:
    """Anderson-Darling A^2; CDF values are clamped to ``[1e-15, 1 - 1e-15]``."""
    value, clamped = _ad(_model_cdf_sorted(sample, model))
    if clamped:
        warnings.warn("model CDF hit 0 or 1; Anderson-Darling terms clamped",
                      AndersonDarlingClampWarning, stacklevel=2)
    return value


def _statistic(name: str, sample, model: MixtureModel) -> tuple[float, bool]:
    u = _model_cdf_sorted(sample, model)
    if name == "ks":
        return _ks(u), False
    if name == "cvm":
        return _cvm(u), False
    if name == "ad":
        return _ad(u)
    raise ValueError(f"unknown statistic {name!r}")


def _replicate(args):
    model, n, name, refit, seed, index, em_tol = args
    rng = np.random.default_rng([seed, index])
    boot = model.sample(n, rng)
    fitted = model
    if refit == "refine":
        try:
            fitted = em_fit(boot, model, tol=em_tol)
        except EstimationError:
            return None
    return _statistic(name, boot, fitted)[0]


def bootstrap_pvalue(
    sample: Sequence[float],
    model: MixtureModel,
    statistic: str = "cvm",
    reps: int = 999,
    seed: int | None = None,
    refit: str = "refine",
    threads: int = 1,
    em_tol: float = 1e-8,
) -> GofReport:
    """Parametric-bootstrap p-value ``(1 + #{T* >= T}) / (valid + 1)``.

    Replicate ``i`` draws from its own generator seeded by ``(seed, i)``, so
    the result does not depend on ``threads``.  Replicates whose refit
    collapses are counted in ``failures`` and left out.
    """
    if reps < 99:
        raise ValueError("use at least 99 bootstrap replicates")
    if refit not in ("none", "refine"):
        raise ValueError(f"unknown refit mode {refit!r}")
    if seed is None:
        seed = secrets.randbits(63)
    x = np.asarray(sample, dtype=float).ravel()
    observed, clamped = _statistic(statistic, x, model)
    jobs = [(model, x.size, statistic, refit, seed, i, em_tol) for i in range(reps)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            boot = list(pool.map(_replicate, jobs))
    else:
        boot = [_replicate(j) for j in jobs]
    valid = [b for b in boot if b is not None]
    exceed = sum(1 for b in valid if b >= observed)
    return GofReport(statistic, observed, (1 + exceed) / (len(valid) + 1), reps,
                     reps - len(valid), refit, seed, clamped)


def ecdf_table(sample, model: MixtureModel) -> list[tuple[float, float, float]]:
    """``(x, EDF(x), model CDF(x))`` at each sorted observation."""
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    edf = np.arange(1, x.size + 1) / x.size
    return list(zip(x.tolist(), edf.tolist(), model.cdf(x).tolist()))


def write_ecdf_csv(path, sample, model: MixtureModel) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["x", "ecdf", "model_cdf"])
        out.writerows(ecdf_table(sample, model))
