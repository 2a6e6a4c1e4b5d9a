"""Command-line front end.

Every flag can also be provided through an environment variable with the
``CTRESERVE_`` prefix (``CTRESERVE_M``, ``CTRESERVE_TAIL_VARIANCE``, ...),
which flags on the command line override.  Exit codes: 0 success, 2
configuration error, 3 data error, 4 numeric infeasibility.
"""

from __future__ import annotations

import argparse
import os
import sys

from .calibration import InfeasibleError
from .reporting import METHODS, ConfigError, RunConfig, run_report
from .triangle import DataError

__all__ = ["build_parser", "main"]

_ENV_PREFIX = "CTRESERVE_"


def _env(name: str, fallback: str | None = None) -> str | None:
    return os.environ.get(_ENV_PREFIX + name, fallback)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctreserve",
        description=(
            "Calibrate the continuous-time claims development model on a "
            "run-off triangle and estimate the reserve distribution."
        ),
    )
    parser.add_argument(
        "--dataset",
        choices=("schnieper", "csv"),
        default=_env("DATASET", "schnieper"),
        help="embedded reference dataset, or csv to read the three input files",
    )
    parser.add_argument("--n-csv", default=_env("N_CSV"), help="new-claims triangle CSV")
    parser.add_argument("--d-csv", default=_env("D_CSV"), help="decrease triangle CSV")
    parser.add_argument(
        "--exposure-csv", default=_env("EXPOSURE_CSV"), help="per-year exposure CSV"
    )
    parser.add_argument(
        "--method",
        choices=METHODS + ("all",),
        default=_env("METHOD", "all"),
        help="reserve distribution method to run (default: all)",
    )
    parser.add_argument(
        "--M", default=_env("M", "10000"), help="number of bootstrap replicates"
    )
    parser.add_argument("--seed", default=_env("SEED", "0"), help="root RNG seed")
    parser.add_argument(
        "--ez",
        action="append",
        default=None,
        help="jump mean E[Z]; repeat the flag for a sensitivity sweep "
        "(default 1.0, env CTRESERVE_EZ accepts a comma-separated list)",
    )
    parser.add_argument(
        "--tail-variance",
        choices=("paper", "formula"),
        default=_env("TAIL_VARIANCE", "paper"),
        help="next-to-last new-claims variance: zeroed (paper) or the raw sample value",
    )
    parser.add_argument(
        "--infeasible",
        choices=("resample", "clamp"),
        default=_env("INFEASIBLE", "resample"),
        help="policy when a re-fitted jump law is infeasible",
    )
    parser.add_argument(
        "--matched-family",
        choices=("lognormal", "gamma"),
        default=_env("MATCHED_FAMILY", "lognormal"),
        help="closed-form family for the moment-matched method",
    )
    parser.add_argument(
        "--lognormal-param",
        choices=("standard", "paper"),
        default=_env("LOGNORMAL_PARAM", "standard"),
        help="log-normal variance parameter: exact matching or the published variant",
    )
    parser.add_argument(
        "--msep-source",
        default=_env("MSEP_SOURCE", "residual"),
        help="MSEP fed to the moment-matched method: ct, residual, timeseries "
        "or external=<value>",
    )
    parser.add_argument(
        "--out", default=_env("OUT", "reports"), help="output directory"
    )
    parser.add_argument(
        "--calibrate-only",
        action="store_true",
        default=_env("CALIBRATE_ONLY", "") not in ("", "0", "false", "no"),
        help="stop after writing calibration.json",
    )
    return parser


def _parse_int(label: str, raw) -> int:
    try:
        return int(str(raw), 10)
    except ValueError:
        raise ConfigError(f"{label} must be an integer, got {raw!r}") from None


def _parse_ez(args) -> tuple[float, ...]:
    if args.ez is not None:
        raw_values = args.ez
    else:
        env = _env("EZ")
        raw_values = env.replace(",", " ").split() if env else ["1.0"]
    values = []
    for raw in raw_values:
        try:
            values.append(float(raw))
        except ValueError:
            raise ConfigError(f"ez must be a number, got {raw!r}") from None
    return tuple(values)


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    methods = METHODS if args.method == "all" else (args.method,)
    return RunConfig(
        dataset=args.dataset,
        n_csv=args.n_csv,
        d_csv=args.d_csv,
        exposure_csv=args.exposure_csv,
        methods=methods,
        M=_parse_int("M", args.M),
        seed=_parse_int("seed", args.seed),
        ez=_parse_ez(args),
        tail_variance_rule=args.tail_variance,
        infeasible_policy=args.infeasible,
        matched_family=args.matched_family,
        lognormal_param=args.lognormal_param,
        msep_source=args.msep_source,
        out_dir=args.out,
        calibrate_only=args.calibrate_only,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        artifacts = run_report(cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 4

    cal = artifacts.calibration
    print(f"reserve point estimate: {cal.reserve:.4f}")
    print(f"jump moment ratio: {cal.regression.ratio:.4f}")
    for name in cfg.methods:
        if cfg.calibrate_only:
            break
        if name == "matched":
            dist = artifacts.matched
            root = 100.0 * dist.msep**0.5 / dist.point_estimate
            tail = dist.q995_excess_pct
        else:
            dist = artifacts.distributions[name]
            root = dist.msep_root_pct
            tail = dist.q995_excess_pct
        print(f"{name:>10}: sqrt(MSEP)/R = {root:.4g}%  99.5% excess = {tail:.4g}%")
    print(f"artifacts written to {os.path.abspath(artifacts.out_dir)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
