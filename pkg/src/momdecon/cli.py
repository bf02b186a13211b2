"""Command-line interface.

Exit codes: 0 success, 2 estimation failure (the partial report is still
written), 64 usage error, 66 unreadable or empty input.
"""

from __future__ import annotations

import argparse
import json
import logging
import secrets
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import AssumptionBViolation, EstimationError
from .gof import bootstrap_pvalue, write_ecdf_csv
from .hankel import estimate_k
from .ingest import (
    diff_dedup,
    log_returns,
    project,
    read_series_csv,
    read_vectors_csv,
    write_column_csv,
)
from .known_components import absolute_provider, parse_provider, squared_provider
from .moments import deconvolve_location, deconvolve_scale, empirical_moments, exact_mixture_moments
from .pipeline import ROUTES, check_k_max, choose_route, deconvolved_moments, fit_sample
from .refine import MixtureModel, em_fit, initial_model
from .simlab import PRESETS, config_from_mapping, format_table, load_config, preset, run_experiment

log = logging.getLogger("momdecon")

EXIT_OK = 0
EXIT_ESTIMATION = 2
EXIT_USAGE = 64
EXIT_NOINPUT = 66


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    seed = secrets.randbits(63)
    log.warning("no --seed given; using generated seed %d", seed)
    return seed


def _provider(text: str):
    try:
        return parse_provider(text)
    except OSError as exc:
        raise InputError(f"cannot read custom moments: {exc}") from None
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad --z-family {text!r}: {exc}") from None


def _read_sample(path, args) -> tuple[np.ndarray, int]:
    try:
        res = read_series_csv(path, delimiter=args.delimiter, header=args.header)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    if not res.frame.values:
        raise InputError(f"{path}: no numeric values")
    if res.skipped:
        log.warning("%s: skipped %d unparsable rows", path, res.skipped)
    return np.asarray(res.frame.values), res.skipped


def _emit(obj, out) -> None:
    text = json.dumps(obj, indent=2, allow_nan=False)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _stats(text: str) -> list[str]:
    names = [s.strip().lower() for s in text.split(",") if s.strip()]
    bad = [s for s in names if s not in ("ks", "cvm", "ad")]
    if bad:
        raise UsageError(f"unknown statistic(s): {', '.join(bad)}")
    return names


def _gof_reports(sample, model, names, args, seed) -> list[dict]:
    out = []
    for name in names:
        rep = bootstrap_pvalue(sample, model, name, args.bootstrap, seed, args.refit, args.threads)
        out.append(rep.to_json())
    return out


def cmd_fit(args) -> int:
    z = _provider(args.z_family)
    try:
        check_k_max(args.k_max, args.allow_high_order)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    x, skipped = _read_sample(args.sample, args)
    report = {
        "input": {"n": int(x.size), "source": str(args.sample), "skipped_rows": skipped},
        "scheme": args.scheme,
        "z": z.to_json(),
        "warnings": [],
    }
    try:
        fit = fit_sample(x, z, args.scheme, args.k_max, args.tolerance, args.route,
                         fallback=not args.no_fallback, precision=args.precision,
                         allow_high_order=args.allow_high_order)
    except AssumptionBViolation as exc:
        raise UsageError(f"{exc}; Z is not symmetric so no reduction applies") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    report["route"] = fit.route
    report["warnings"].extend(fit.warnings)
    report["moments"] = fit.moments.to_json()
    report["hankel"] = fit.hankel.to_json()
    status = EXIT_OK
    model = None
    if fit.ok:
        report["distribution"] = fit.distribution.to_json()
        try:
            model = initial_model(fit.distribution, z)
            report["moment_model"] = model.to_json()
        except ValueError as exc:
            report["moment_model"] = {"skipped": str(exc)}
    else:
        status = EXIT_ESTIMATION
        report["distribution"] = {"skipped": fit.failure}
        report["moment_model"] = {"skipped": "no moment-method distribution"}

    if args.refine:
        if model is None:
            report["refined_model"] = {"skipped": "no initial model to refine"}
        else:
            try:
                model = em_fit(x, model, args.max_iter, args.em_tol).sorted()
                report["refined_model"] = model.to_json()
            except EstimationError as exc:
                report["refined_model"] = {"skipped": str(exc)}
                report["warnings"].append(str(exc))
                model = None
                status = EXIT_ESTIMATION
    else:
        report["refined_model"] = {"skipped": "refinement not requested"}

    if args.gof:
        names = _stats(args.gof)
        if model is None:
            report["gof"] = {"skipped": "no fitted model"}
        else:
            seed = _seed(args)
            report["seed"] = seed
            report["gof"] = _gof_reports(x, model, names, args, seed)
            if args.ecdf_out:
                write_ecdf_csv(args.ecdf_out, x, model)
    else:
        report["gof"] = {"skipped": "goodness of fit not requested"}
    _emit(report, args.out)
    return status


def cmd_simulate(args) -> int:
    if args.list_presets:
        print("\n".join(PRESETS))
        return EXIT_OK
    configs = []
    try:
        if args.config:
            configs.append(load_config(args.config))
        for name in args.preset or []:
            configs.append(preset(name))
    except OSError as exc:
        raise InputError(str(exc)) from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if not configs:
        raise UsageError("give --preset or --config")
    overrides = {k: str(v) for k, v in (("reps", args.reps), ("n", args.n), ("k_max", args.k_max)) if v is not None}
    if args.refine:
        overrides["refine"] = "true"
    seed = _seed(args)
    overrides["seed"] = str(seed)
    summaries = []
    for cfg in configs:
        try:
            cfg = config_from_mapping(overrides, base=cfg)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        summaries.append(run_experiment(cfg, workers=args.threads))
    payload = {"summaries": [s.to_json(include_reps=args.per_rep) for s in summaries]}
    if args.json:
        _emit(payload, args.out)
    else:
        print(format_table(summaries))
        if args.out:
            _emit(payload, args.out)
    return EXIT_OK


def cmd_ingest(args) -> int:
    try:
        if args.transform == "project":
            vectors, skipped = read_vectors_csv(args.input, args.delimiter, args.header)
            if vectors.size == 0:
                raise InputError(f"{args.input}: no numeric rows")
            direction = None
            if args.direction:
                direction = [float(v) for v in args.direction.split(",")]
            seed = _seed(args) if direction is None else None
            values = project(vectors, direction, seed)
        else:
            res = read_series_csv(args.input, args.delimiter, args.header)
            skipped = res.skipped
            if not res.frame.values:
                raise InputError(f"{args.input}: no numeric values")
            values = log_returns(res.frame) if args.transform == "log-returns" else diff_dedup(res.frame)
    except OSError as exc:
        raise InputError(f"cannot read {args.input}: {exc}") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if skipped:
        log.warning("%s: skipped %d unparsable rows", args.input, skipped)
    if args.out:
        write_column_csv(args.out, values)
    else:
        write_column_csv(sys.stdout, values)
    return EXIT_OK


def _load_model(path) -> MixtureModel:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read model {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not JSON: {exc}") from None
    if "family" not in data:
        for key in ("refined_model", "moment_model"):
            if isinstance(data.get(key), dict) and "family" in data[key]:
                data = data[key]
                break
        else:
            raise UsageError(f"{path} holds no mixture model")
    try:
        return MixtureModel.from_json(data)
    except (KeyError, ValueError) as exc:
        raise UsageError(f"bad model in {path}: {exc}") from None


def cmd_gof(args) -> int:
    model = _load_model(args.model)
    names = _stats(args.stat)
    x, _ = _read_sample(args.sample, args)
    seed = _seed(args)
    reports = _gof_reports(x, model, names, args, seed)
    if args.ecdf_out:
        write_ecdf_csv(args.ecdf_out, x, model)
    _emit({"n": int(x.size), "model": model.to_json(), "seed": seed, "gof": reports}, args.out)
    return EXIT_OK


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad number list {text!r}") from None


def _exact_route_moments(support, weights, z, route, j_max):
    """Exact moments of the observed variable along ``route`` and their deconvolution."""
    if route == "location":
        xm = exact_mixture_moments(support, weights, z, "location", j_max)
        return xm, deconvolve_location(xm, z)
    if route == "even_reduced":
        support, z = [s * s for s in support], squared_provider(z, j_max)
    elif route == "absolute":
        support, z = [abs(s) for s in support], absolute_provider(z, j_max)
    xm = exact_mixture_moments(support, weights, z, "scale", j_max)
    return xm, deconvolve_scale(xm, z)


def cmd_moments(args) -> int:
    z = _provider(args.z_family)
    j_max = 2 * args.k_max
    try:
        route = args.route if args.route != "auto" else choose_route(z, args.scheme, j_max)
        if args.support:
            support = _float_list(args.support)
            weights = _float_list(args.weights) if args.weights else [1.0 / len(support)] * len(support)
            x_moments, mu = _exact_route_moments(support, weights, z, route, j_max)
            source = {"support": support, "weights": weights}
        else:
            if not args.sample:
                raise UsageError("give a sample file or --support")
            x, _ = _read_sample(args.sample, args)
            observed = {"even_reduced": x * x, "absolute": np.abs(x)}.get(route, x)
            x_moments = empirical_moments(observed, j_max)
            mu = deconvolved_moments(x, z, route, j_max)
            source = {"file": str(args.sample), "n": int(x.size)}
    except (AssumptionBViolation, ValueError) as exc:
        raise UsageError(str(exc)) from None
    report = estimate_k(mu, args.k_max, args.tolerance, args.precision)
    payload = {
        "source": source,
        "scheme": args.scheme,
        "route": route,
        "z": z.to_json(),
        "observed_moments": x_moments.to_json(),
        "moments": mu.to_json(),
        "hankel": report.to_json(),
    }
    if args.json:
        _emit(payload, args.out)
        return EXIT_OK
    lines = [f"route: {route}", "order  observed moment          deconvolved moment"]
    for j, (a, b) in enumerate(zip(x_moments.values, mu.values)):
        lines.append(f"{j:5d}  {a:<23.16g}  {b:.16g}")
    lines.append("s      D_s")
    for s, d in enumerate(report.determinants):
        lines.append(f"{s:<5d}  {d:.16g}")
    lines.append(f"k* = {report.k_star if report.k_star is not None else '-'} ({report.stop_reason})")
    print("\n".join(lines))
    if args.out:
        _emit(payload, args.out)
    return EXIT_OK


def _add_csv_options(p) -> None:
    p.add_argument("--delimiter", default=",")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--header", dest="header", action="store_true", default=None,
                   help="first row is a header (default: sniff)")
    g.add_argument("--no-header", dest="header", action="store_false")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="momdecon", description="Finite-support deconvolution by the method of moments.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, seed=True, threads=True):
        if seed:
            p.add_argument("--seed", type=int)
        if threads:
            p.add_argument("--threads", type=int, default=1)
        p.add_argument("--out")

    def z_and_scheme(p):
        p.add_argument("--z-family", "--z", dest="z_family", required=True,
                       help="exp:RATE | normal:M,SD | laplace:A,B | degenerate:C | custom:FILE.json")
        p.add_argument("--scheme", choices=("scale", "location"), default="scale")
        p.add_argument("--k-max", type=int, default=10)
        p.add_argument("--tolerance", type=float, default=0.0)
        p.add_argument("--route", choices=ROUTES, default="auto")
        p.add_argument("--precision", choices=("double", "extended"), default="double")

    def gof_options(p):
        p.add_argument("--bootstrap", type=int, default=999)
        p.add_argument("--refit", choices=("refine", "none"), default="refine")
        p.add_argument("--ecdf-out", help="write (x, ECDF, model CDF) rows here")

    p = sub.add_parser("fit", help="estimate k, support and weights from a sample")
    p.add_argument("sample")
    z_and_scheme(p)
    p.add_argument("--allow-high-order", action="store_true")
    p.add_argument("--no-fallback", action="store_true",
                   help="do not retry a failed even-reduced fit on absolute moments")
    p.add_argument("--refine", action="store_true")
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--em-tol", type=float, default=1e-8)
    p.add_argument("--gof", help="comma list of ks,cvm,ad")
    gof_options(p)
    _add_csv_options(p)
    common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="run a Monte-Carlo study")
    p.add_argument("--preset", action="append", help="repeatable; see --list-presets")
    p.add_argument("--config", help="flat key = value experiment file")
    p.add_argument("--list-presets", action="store_true")
    p.add_argument("--reps", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--k-max", type=int)
    p.add_argument("--refine", action="store_true")
    p.add_argument("--json", action="store_true", help="print JSON instead of the table")
    p.add_argument("--per-rep", action="store_true", help="include per-replication records in JSON")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ingest", help="turn prices/rates/vectors into a sample")
    p.add_argument("input")
    p.add_argument("--transform", required=True, choices=("log-returns", "diff-dedup", "project"))
    p.add_argument("--direction", help="comma-separated projection direction")
    _add_csv_options(p)
    common(p, threads=False)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("gof", help="goodness of fit of a mixture model")
    p.add_argument("sample")
    p.add_argument("--model", required=True, help="mixture model JSON or a fit report")
    p.add_argument("--stat", default="cvm", help="comma list of ks,cvm,ad")
    gof_options(p)
    _add_csv_options(p)
    common(p)
    p.set_defaults(func=cmd_gof)

    p = sub.add_parser("moments", help="moment sequence and Hankel determinant trace")
    p.add_argument("sample", nargs="?")
    z_and_scheme(p)
    p.add_argument("--support", help="exact Y support instead of a sample")
    p.add_argument("--weights")
    p.add_argument("--json", action="store_true")
    _add_csv_options(p)
    common(p, seed=False, threads=False)
    p.set_defaults(func=cmd_moments)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"momdecon: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"momdecon: error: {exc}", file=sys.stderr)
        return EXIT_NOINPUT


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
