"""Monte-Carlo studies of the cluster-count estimator.

Every replication draws from its own generator seeded by ``(seed, index)``,
so a study gives bit-identical summaries whatever the number of workers.
A replication counts as correct only if the pipeline produced a
distribution with ``k* = k``: failed replications (complex or negative
roots, exhausted scans) count as incorrect.
"""

from __future__ import annotations

import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np

from .errors import EstimationError
from .known_components import MomentProvider, parse_provider
from .orthopoly import DiscreteDistribution
from .pipeline import K_MAX_DEFAULT, fit_sample
from .refine import em_fit, initial_model

__all__ = [
    "ExperimentConfig",
    "ExperimentSummary",
    "ReplicationRecord",
    "PRESETS",
    "preset",
    "sample_mixture",
    "run_experiment",
    "load_config",
    "config_from_mapping",
    "format_table",
]


@dataclass(frozen=True)
class ExperimentConfig:
    scheme: str
    z: MomentProvider
    y_true: DiscreteDistribution
    n: int
    reps: int = 5000
    k_max: int = K_MAX_DEFAULT
    seed: int = 0
    refine: bool = False
    tolerance: float = 0.0
    name: str = ""

    def __post_init__(self):
        if self.scheme not in ("scale", "location"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.n < 10:
            raise ValueError("n must be at least 10")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def k_true(self) -> int:
        return self.y_true.k

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "scheme": self.scheme,
            "z": self.z.describe(),
            "support": list(self.y_true.support),
            "weights": list(self.y_true.weights),
            "n": self.n,
            "reps": self.reps,
            "k_max": self.k_max,
            "seed": self.seed,
            "refine": self.refine,
            "tolerance": self.tolerance,
        }


@dataclass(frozen=True)
class ReplicationRecord:
    index: int
    k_star: int | None
    ok: bool
    failure: str | None = None
    route: str = ""
    support: tuple[float, ...] = ()
    weights: tuple[float, ...] = ()
    refined_params: tuple[float, ...] = ()
    refined_weights: tuple[float, ...] = ()
    refine_failure: str | None = None

    def to_json(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


@dataclass
class ExperimentSummary:
    mean_k: float
    median_k: float
    sd_k: float
    pct_correct: float
    param_means: list[float]
    weight_means: list[float]
    failures: int
    reps: int
    k_counts: dict[int, int]
    refined_param_means: list[float] = field(default_factory=list)
    refined_weight_means: list[float] = field(default_factory=list)
    config: ExperimentConfig | None = None
    per_rep: list[ReplicationRecord] | None = None

    def to_json(self, include_reps: bool = False) -> dict:
        out = {
            "config": self.config.to_json() if self.config else None,
            "mean_k": self.mean_k,
            "median_k": self.median_k,
            "sd_k": self.sd_k,
            "pct_correct": self.pct_correct,
            "param_means": self.param_means,
            "weight_means": self.weight_means,
            "refined_param_means": self.refined_param_means,
            "refined_weight_means": self.refined_weight_means,
            "failures": self.failures,
            "reps": self.reps,
            "k_counts": {str(k): v for k, v in sorted(self.k_counts.items(), key=lambda kv: str(kv[0]))},
        }
        if include_reps and self.per_rep is not None:
            out["per_rep"] = [r.to_json() for r in self.per_rep]
        return out


def _equal(support) -> DiscreteDistribution:
    k = len(support)
    return DiscreteDistribution(tuple(support), (1.0 / k,) * k)


def _exp(means, n):
    return ExperimentConfig("scale", MomentProvider.exponential(1.0), _equal(means), n)


def _presets() -> dict[str, Callable[[], ExperimentConfig]]:
    table = {"exp-k2-n100": lambda: _exp((1.0, 3.0), 100)}
    for n in (100, *range(1000, 10001, 1000), 30000):
        table[f"exp-k3-n{n}"] = lambda n=n: _exp((1.0, 3.0, 5.0), n)
    for n in (10000, 100000, 1000000):
        table[f"exp-k4-n{n}"] = lambda n=n: _exp((1.0, 3.0, 5.0, 7.0), n)
    table["normal-scale-I"] = lambda: ExperimentConfig(
        "scale", MomentProvider.normal(0.0, 1.0), _equal((1.0, 3.0)), 1000)
    table["normal-loc-II"] = lambda: ExperimentConfig(
        "location", MomentProvider.normal(0.0, 1.0), _equal((-1.0, 1.0)), 1000)
    # unit standard deviation: 2 b**2 = 1
    table["laplace-loc-III"] = lambda: ExperimentConfig(
        "location", MomentProvider.laplace(0.0, math.sqrt(0.5)), _equal((-1.0, 1.0)), 1000)
    return table


PRESETS = _presets()


def preset(name: str, **overrides) -> ExperimentConfig:
    """A named study with optional field overrides (``reps``, ``seed``, ...)."""
    try:
        cfg = PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
    return replace(cfg, name=name, **overrides)


def sample_mixture(config: ExperimentConfig, rep_index: int) -> np.ndarray:
    """``n`` draws of X for replication ``rep_index``."""
    rng = np.random.default_rng([config.seed, rep_index])
    y = config.y_true
    labels = rng.choice(y.k, size=config.n, p=np.asarray(y.weights))
    values = np.asarray(y.support)[labels]
    z = config.z.sample(rng, config.n)
    return values * z if config.scheme == "scale" else values + z


def _replicate(config: ExperimentConfig, index: int) -> ReplicationRecord:
    x = sample_mixture(config, index)
    fit = fit_sample(x, config.z, config.scheme, config.k_max, config.tolerance)
    if not fit.ok:
        return ReplicationRecord(index, fit.k_star, False, fit.failure, fit.route)
    dist = fit.distribution
    rec = ReplicationRecord(index, fit.k_star, True, None, fit.route, dist.support, dist.weights)
    if config.refine:
        try:
            model = em_fit(x, initial_model(dist, config.z)).sorted()
            rec = replace(rec, refined_params=model.params, refined_weights=model.weights)
        except (EstimationError, ValueError) as exc:
            rec = replace(rec, refine_failure=str(exc))
    return rec


def _replicate_star(args):
    return _replicate(*args)


def _column_means(rows: list[tuple[float, ...]]) -> list[float]:
    if not rows:
        return []
    return [math.fsum(col) / len(rows) for col in zip(*rows)]


def summarize(config: ExperimentConfig, records: list[ReplicationRecord]) -> ExperimentSummary:
    ks = [r.k_star for r in records if r.k_star is not None]
    k_true = config.k_true
    correct = [r for r in records if r.ok and r.k_star == k_true]
    refined = [r for r in correct if r.refined_params]
    counts: dict = {}
    for r in records:
        key = r.k_star if r.k_star is not None else "exhausted"
        counts[key] = counts.get(key, 0) + 1
    nan = float("nan")
    return ExperimentSummary(
        mean_k=math.fsum(ks) / len(ks) if ks else nan,
        median_k=float(statistics.median(ks)) if ks else nan,
        sd_k=statistics.pstdev(ks) if ks else nan,
        pct_correct=100.0 * len(correct) / len(records),
        param_means=_column_means([r.support for r in correct]),
        weight_means=_column_means([r.weights for r in correct]),
        failures=sum(1 for r in records if not r.ok),
        reps=len(records),
        k_counts=counts,
        refined_param_means=_column_means([r.refined_params for r in refined]),
        refined_weight_means=_column_means([r.refined_weights for r in refined]),
        config=config,
        per_rep=records,
    )


def run_experiment(config: ExperimentConfig, workers: int = 1) -> ExperimentSummary:
    """Run ``config.reps`` replications and aggregate the k* statistics.

    Parameter means are taken over correct replications only, matching
    components by ascending support.
    """
    jobs = [(config, i) for i in range(config.reps)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_replicate_star, jobs, chunksize=max(1, config.reps // (8 * workers))))
    else:
        records = [_replicate(config, i) for i in range(config.reps)]
    return summarize(config, records)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def config_from_mapping(values: Mapping[str, str], base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Build a config from string key/values, starting from ``base`` if given."""
    values = {k.strip().lower().replace("-", "_"): str(v).strip() for k, v in values.items()}
    if "preset" in values:
        base = preset(values.pop("preset"))
    fields: dict = {}
    if base is not None:
        fields = dict(scheme=base.scheme, z=base.z, y_true=base.y_true, n=base.n, reps=base.reps,
                      k_max=base.k_max, seed=base.seed, refine=base.refine,
                      tolerance=base.tolerance, name=base.name)
    support = weights = None
    for key, raw in values.items():
        if key == "scheme":
            fields["scheme"] = raw
        elif key in ("z", "z_family"):
            fields["z"] = parse_provider(raw)
        elif key == "support":
            support = _floats(raw)
        elif key == "weights":
            weights = _floats(raw)
        elif key in ("n", "reps", "k_max", "seed"):
            fields[key] = int(raw)
        elif key == "refine":
            if raw.lower() not in _BOOL:
                raise ValueError(f"bad boolean {raw!r} for refine")
            fields["refine"] = _BOOL[raw.lower()]
        elif key == "tolerance":
            fields["tolerance"] = float(raw)
        elif key == "name":
            fields["name"] = raw
        else:
            raise ValueError(f"unknown config key {key!r}")
    if support is not None or weights is not None:
        if support is None:
            support = fields["y_true"].support
        if weights is None:
            weights = (1.0 / len(support),) * len(support)
        order = np.argsort(support)
        fields["y_true"] = DiscreteDistribution(tuple(np.asarray(support)[order]),
                                                tuple(np.asarray(weights)[order]))
    missing = {"scheme", "z", "y_true", "n"} - fields.keys()
    if missing:
        raise ValueError(f"config is missing {', '.join(sorted(missing))}")
    return ExperimentConfig(**fields)


def load_config(path) -> ExperimentConfig:
    """Read a flat ``key = value`` file (``#`` starts a comment)."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            values[key.strip()] = value.strip()
    return config_from_mapping(values)


def format_table(summaries: list[ExperimentSummary]) -> str:
    """Aligned text table with the reporting fields E, me, sigma, pr of k*."""
    header = ["study", "n", "reps", "E(k*)", "me(k*)", "sd(k*)", "pr(k*)%", "fail", "param means", "weight means"]
    rows = [header]
    for s in summaries:
        cfg = s.config
        rows.append([
            cfg.name or "-", str(cfg.n), str(s.reps), f"{s.mean_k:.3f}", f"{s.median_k:g}",
            f"{s.sd_k:.3f}", f"{s.pct_correct:.2f}", str(s.failures),
            " ".join(f"{v:.4f}" for v in s.param_means) or "-",
            " ".join(f"{v:.4f}" for v in s.weight_means) or "-",
        ])
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = []
    for r in rows:
        lines.append("  ".join(cell.rjust(w) if i and i < 8 else cell.ljust(w)
                               for i, (cell, w) in enumerate(zip(r, widths))).rstrip())
    return "\n".join(lines)
