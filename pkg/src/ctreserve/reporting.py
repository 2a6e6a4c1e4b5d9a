"""Report orchestration: load data, calibrate, run engines, write artifacts.

The entry point is :func:`run_report`, which takes a :class:`RunConfig` and
produces a directory of machine-readable files:

``calibration.json``
    Development-year estimates, the moment-ratio regression, the implied
    process coefficients and jump law, ultimates and the reserve.
``summary.json`` / ``summary.csv``
    One row per requested method with the reserve point estimate, the MSEP
    (variance of the bootstrap distribution) and the two headline
    percentages.  CSV percentages are rounded to 4 significant figures;
    the JSON carries full precision.
``reserves_<method>.csv``
    The raw replicate reserves of each bootstrap engine.
``histogram_<method>.csv``
    Freedman-Diaconis binned densities of the replicates, bin edges
    recorded in a leading comment line.
``density_matched.csv``
    Analytic density grid of the moment-matched closed form (that method
    has no replicates to bin).
``sensitivity.csv``
    One row per requested jump mean when more than one is given
    (continuous-time engine only).
``diagnostics.json``
    Per-method pathology counts and the zero-absorption scan of the
    first unobserved transitions.

Every file is written atomically (temp file then rename) and is a pure
function of the configuration, so identical configs give byte-identical
files.  Figures are rendered next to the data files unless
``render_plots`` is switched off.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field, replace

import numpy as np

from .bootstrap import (
    INFEASIBLE_POLICIES,
    LOGNORMAL_PARAMS,
    MATCHED_FAMILIES,
    BootstrapConfig,
    MatchedDistribution,
    ReserveDistribution,
    ct_bootstrap,
    moment_matched,
    residual_bootstrap,
    timeseries_bootstrap,
)
from .calibration import (
    CtParams,
    InfeasibleError,
    RegressionReport,
    discrete_to_ct,
    estimate_moment_ratio,
)
from .datasets import schnieper_dataset
from .estimators import (
    TAIL_VARIANCE_RULES,
    DiscreteParams,
    estimate_discrete,
    ultimate_and_reserve,
)
from .simulation import absorption_scan
from .triangle import ClaimsData, DataError, Triangle, build_cumulative, observed_mask

__all__ = [
    "METHODS",
    "ConfigError",
    "RunConfig",
    "CalibrationResult",
    "RunArtifacts",
    "parse_triangle_csv",
    "write_triangle_csv",
    "read_exposure_csv",
    "load_claims_data",
    "calibrate",
    "run_report",
]

METHODS = ("ct", "residual", "timeseries", "matched")


class ConfigError(ValueError):
    """Raised when a run configuration is internally inconsistent."""


@dataclass(frozen=True)
class RunConfig:
    """Everything a report run needs, validated at construction.

    ``ez`` is a tuple of candidate jump means; the first entry drives the
    main run and the remaining ones the sensitivity sweep.  ``msep_source``
    selects where the moment-matched method takes its variance from:
    one of the bootstrap method names, or ``external=<value>`` with an
    absolute MSEP.
    """

    dataset: str = "schnieper"
    n_csv: str | None = None
    d_csv: str | None = None
    exposure_csv: str | None = None
    methods: tuple[str, ...] = METHODS
    M: int = 10_000
    seed: int = 0
    ez: tuple[float, ...] = (1.0,)
    tail_variance_rule: str = "paper"
    infeasible_policy: str = "resample"
    matched_family: str = "lognormal"
    lognormal_param: str = "standard"
    msep_source: str = "residual"
    out_dir: str = "reports"
    calibrate_only: bool = False
    render_plots: bool = True

    def __post_init__(self):
        if self.dataset not in ("schnieper", "csv"):
            raise ConfigError(f"unknown dataset {self.dataset!r}")
        if self.dataset == "csv":
            missing = [
                name
                for name, path in (
                    ("n_csv", self.n_csv),
                    ("d_csv", self.d_csv),
                    ("exposure_csv", self.exposure_csv),
                )
                if not path
            ]
            if missing:
                raise ConfigError(f"dataset 'csv' needs {', '.join(missing)}")
        methods = tuple(dict.fromkeys(self.methods))
        if not methods:
            raise ConfigError("at least one method must be selected")
        for m in methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}")
        object.__setattr__(self, "methods", methods)
        if not (isinstance(self.M, int) and self.M >= 2):
            raise ConfigError(f"M must be an integer >= 2, got {self.M!r}")
        if not isinstance(self.seed, int):
            raise ConfigError(f"seed must be an integer, got {self.seed!r}")
        ez = tuple(float(e) for e in self.ez)
        if not ez:
            raise ConfigError("at least one ez value is required")
        for e in ez:
            if not (e > 0 and math.isfinite(e)):
                raise ConfigError(f"ez values must be finite and > 0, got {e}")
        object.__setattr__(self, "ez", ez)
        if len(ez) > 1 and "ct" not in methods:
            raise ConfigError("an ez sweep applies to the ct method only")
        if self.tail_variance_rule not in TAIL_VARIANCE_RULES:
            raise ConfigError(f"unknown tail_variance_rule {self.tail_variance_rule!r}")
        if self.infeasible_policy not in INFEASIBLE_POLICIES:
            raise ConfigError(f"unknown infeasible_policy {self.infeasible_policy!r}")
        if self.matched_family not in MATCHED_FAMILIES:
            raise ConfigError(f"unknown matched_family {self.matched_family!r}")
        if self.lognormal_param not in LOGNORMAL_PARAMS:
            raise ConfigError(f"unknown lognormal_param {self.lognormal_param!r}")
        _parse_msep_source(self.msep_source)  # raises ConfigError

    @property
    def primary_ez(self) -> float:
        return self.ez[0]


def _parse_msep_source(source: str):
    """Split ``msep_source`` into ``("engine", name)`` or ``("external", v)``."""
    if source in ("ct", "residual", "timeseries"):
        return "engine", source
    if source.startswith("external="):
        raw = source[len("external=") :]
        try:
            value = float(raw)
        except ValueError:
            raise ConfigError(f"external msep is not a number: {raw!r}") from None
        if not (value > 0 and math.isfinite(value)):
            raise ConfigError(f"external msep must be finite and > 0, got {value}")
        return "external", value
    raise ConfigError(
        f"msep_source must be ct, residual, timeseries or external=<value>, got {source!r}"
    )


# --- CSV ingestion ------------------------------------------------------------


def parse_triangle_csv(path: str) -> Triangle:
    """Read a run-off triangle from a delimited file.

    The header must be exactly ``j1..jn``; each of the ``n`` following
    rows is one accident year with ``n`` cells, of which exactly the
    trailing unobserved ones are empty.  Decimal points are parsed
    locale-independently.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from exc
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    n = len(header)
    if n == 0 or header != [f"j{k}" for k in range(1, n + 1)]:
        raise DataError(f"{path}: header must be j1..jn, got {header!r}")
    body = rows[1:]
    if len(body) != n:
        raise DataError(f"{path}: expected {n} accident-year rows, got {len(body)}")
    values = np.full((n, n), np.nan)
    mask = np.zeros((n, n), dtype=bool)
    for i0, row in enumerate(body):
        if len(row) != n:
            raise DataError(
                f"{path}: accident year {i0 + 1} has {len(row)} cells, expected {n}"
            )
        for j0, cell in enumerate(row):
            cell = cell.strip()
            if not cell:
                continue
            try:
                values[i0, j0] = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric cell at (i={i0 + 1}, j={j0 + 1}): {cell!r}"
                ) from None
            mask[i0, j0] = True
    observed = observed_mask(n)
    bad = observed & ~mask
    if bad.any():
        i0, j0 = map(int, np.argwhere(bad)[0])
        raise DataError(f"{path}: hole in the observed region at (i={i0 + 1}, j={j0 + 1})")
    bad = mask & ~observed
    if bad.any():
        i0, j0 = map(int, np.argwhere(bad)[0])
        raise DataError(
            f"{path}: populated cell outside the observed region at (i={i0 + 1}, j={j0 + 1})"
        )
    return Triangle(values, observed)


def write_triangle_csv(path: str, triangle: Triangle) -> None:
    """Serialize a triangle in the format :func:`parse_triangle_csv` reads."""
    n = triangle.n
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"j{k}" for k in range(1, n + 1)])
    for i0 in range(n):
        writer.writerow(
            [
                repr(float(triangle.values[i0, j0])) if triangle.mask[i0, j0] else ""
                for j0 in range(n)
            ]
        )
    _atomic_write(path, buf.getvalue())


def read_exposure_csv(path: str) -> np.ndarray:
    """Read the per-accident-year exposures: header ``exposure``, one row each."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from exc
    if not rows or [h.strip() for h in rows[0]] != ["exposure"]:
        raise DataError(f"{path}: header must be a single 'exposure' column")
    out = []
    for r, row in enumerate(rows[1:], start=1):
        if len(row) != 1 or not row[0].strip():
            raise DataError(f"{path}: accident year {r}: expected one value")
        try:
            out.append(float(row[0]))
        except ValueError:
            raise DataError(
                f"{path}: non-numeric exposure for accident year {r}: {row[0]!r}"
            ) from None
    return np.asarray(out, dtype=float)


def load_claims_data(cfg: RunConfig) -> ClaimsData:
    """Materialize the configured dataset, validating CSV input triangles."""
    if cfg.dataset == "schnieper":
        return schnieper_dataset()
    new = parse_triangle_csv(cfg.n_csv)
    dec = parse_triangle_csv(cfg.d_csv)
    first = dec.values[:, 0]
    nonzero = np.nonzero(dec.mask[:, 0] & (first != 0.0))[0]
    if nonzero.size:
        i = int(nonzero[0]) + 1
        raise DataError(
            f"{cfg.d_csv}: decrease at (i={i}, j=1) is {first[i - 1]}; the opening "
            "development year admits no revisions, so D[i, 1] must be 0"
        )
    exposure = read_exposure_csv(cfg.exposure_csv)
    cum = build_cumulative(new, dec)
    return ClaimsData(new=new, dec=dec, cum=cum, exposure=exposure)


# --- calibration --------------------------------------------------------------


@dataclass(frozen=True)
class CalibrationResult:
    """Everything derived from a data set before any simulation."""

    params: DiscreteParams
    formula_params: DiscreteParams
    regression: RegressionReport
    ct: CtParams
    ultimates: np.ndarray
    reserve: float

    @property
    def intensity_products(self) -> np.ndarray:
        """Identified arrival products intensity * E[Z], independent of ez."""
        return self.ct.intensity * self.ct.jump_law.mean


def calibrate(data: ClaimsData, cfg: RunConfig) -> CalibrationResult:
    """Fit the development-year moments and the process coefficients.

    The moment-ratio regression always runs on the raw sample variances
    (``formula`` rule) because the link fits observed second moments; the
    configured tail rule governs the reported estimates and the reserve.
    Raises :class:`~ctreserve.calibration.InfeasibleError` when a
    requested jump mean is not below the fitted moment ratio.
    """
    params = estimate_discrete(data, cfg.tail_variance_rule)
    if cfg.tail_variance_rule == "formula":
        formula_params = params
    else:
        formula_params = estimate_discrete(data, "formula")
    regression = estimate_moment_ratio(formula_params)
    for e in cfg.ez:
        if not e < regression.ratio:
            raise InfeasibleError(
                f"ez={e} must lie below the fitted moment ratio {regression.ratio}"
            )
    ct = discrete_to_ct(formula_params, cfg.primary_ez, regression.ratio)
    ultimates, reserve = ultimate_and_reserve(data, params)
    return CalibrationResult(
        params=params,
        formula_params=formula_params,
        regression=regression,
        ct=ct,
        ultimates=ultimates,
        reserve=reserve,
    )


# --- artifact writing ---------------------------------------------------------


def _atomic_write(path: str, text: str) -> None:
    """Write text then rename, so a crash never leaves a partial file."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _floats(arr) -> list:
    return [float(v) for v in np.asarray(arr).ravel()]


def _pct(v: float) -> str:
    return f"{v:.4g}"


def _calibration_payload(data: ClaimsData, cfg: RunConfig, cal: CalibrationResult) -> dict:
    reg = cal.regression
    law = cal.ct.jump_law
    return {
        "n": data.n,
        "tail_variance_rule": cfg.tail_variance_rule,
        "exposure": _floats(data.exposure),
        "estimates": {
            "new_mean": _floats(cal.params.new_mean),
            "new_var": _floats(cal.params.new_var),
            "new_var_formula": _floats(cal.formula_params.new_var),
            "dev_mean": _floats(cal.params.dev_mean),
            "dev_var": _floats(cal.params.dev_var),
        },
        "regression": {
            "ratio": reg.ratio,
            "std_error": reg.std_error,
            "t_stat": reg.t_stat,
            "p_value": reg.p_value,
            "r_squared": reg.r_squared,
            "offset": _floats(reg.offset),
            "slope": _floats(reg.slope),
            "response": _floats(reg.response),
            "weight": _floats(reg.weight),
            "fitted": _floats(reg.fitted),
        },
        "intensity_products": _floats(cal.intensity_products),
        "process": {
            "ez": cfg.primary_ez,
            "intensity": _floats(cal.ct.intensity),
            "decay": _floats(cal.ct.decay),
            "vol2": _floats(cal.ct.vol2),
            "jump_shape": law.shape,
            "jump_rate": law.rate,
            "jump_mean": law.mean,
            "jump_moment_ratio": law.moment_ratio,
        },
        "ultimates": _floats(cal.ultimates),
        "reserve": cal.reserve,
    }


def _reserves_csv(reserves: np.ndarray) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["m", "reserve"])
    for m, v in enumerate(reserves, start=1):
        writer.writerow([m, repr(float(v))])
    return buf.getvalue()


def _histogram_csv(reserves: np.ndarray) -> str:
    counts, edges = np.histogram(reserves, bins="fd")
    widths = np.diff(edges)
    density = counts / (counts.sum() * widths)
    buf = io.StringIO()
    buf.write("# bin_edges: " + ",".join(repr(float(e)) for e in edges) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["bin_left", "bin_right", "count", "density"])
    for left, right, cnt, dens in zip(edges[:-1], edges[1:], counts, density):
        writer.writerow([repr(float(left)), repr(float(right)), int(cnt), repr(float(dens))])
    return buf.getvalue()


def _matched_density_csv(dist: MatchedDistribution) -> str:
    lo = float(dist.quantile(1e-4))
    hi = float(dist.quantile(1 - 1e-4))
    grid = np.linspace(lo, hi, 401)
    pdf = dist.pdf(grid)
    buf = io.StringIO()
    buf.write(
        f"# family: {dist.family}"
        + (f" ({dist.lognormal_param})" if dist.family == "lognormal" else "")
        + f", point_estimate: {dist.point_estimate!r}, msep: {dist.msep!r}\n"
    )
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["x", "density"])
    for x, d in zip(grid, pdf):
        writer.writerow([repr(float(x)), repr(float(d))])
    return buf.getvalue()


def _summary_row(method: str, dist) -> dict:
    if isinstance(dist, ReserveDistribution):
        return {
            "method": method,
            "point_estimate": dist.point_estimate,
            "msep": dist.msep,
            "msep_root_pct": dist.msep_root_pct,
            "q995_excess_pct": dist.q995_excess_pct,
        }
    root_pct = 100.0 * math.sqrt(dist.msep) / dist.point_estimate
    return {
        "method": method,
        "family": dist.family,
        "point_estimate": dist.point_estimate,
        "msep": dist.msep,
        "msep_root_pct": root_pct,
        "q995_excess_pct": dist.q995_excess_pct,
    }


def _summary_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["method", "point_estimate", "msep", "sqrt_msep_pct", "q995_excess_pct"])
    for row in rows:
        writer.writerow(
            [
                row["method"],
                repr(row["point_estimate"]),
                repr(row["msep"]),
                _pct(row["msep_root_pct"]),
                _pct(row["q995_excess_pct"]),
            ]
        )
    return buf.getvalue()


def _sensitivity_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["ez", "jump_shape", "jump_rate", "msep", "sqrt_msep_pct", "q995_excess_pct"]
    )
    for row in rows:
        writer.writerow(
            [
                repr(row["ez"]),
                repr(row["jump_shape"]),
                repr(row["jump_rate"]),
                repr(row["msep"]),
                _pct(row["msep_root_pct"]),
                _pct(row["q995_excess_pct"]),
            ]
        )
    return buf.getvalue()


def _diagnostics_payload(
    cfg: RunConfig,
    distributions: dict[str, ReserveDistribution],
    records,
) -> dict:
    methods = {}
    for name, dist in distributions.items():
        d = dist.diagnostics
        methods[name] = {
            "negative_new": d.negative_new,
            "negative_new_rate": d.negative_new / cfg.M,
            "dec_exceeds_cum": d.dec_exceeds_cum,
            "dec_exceeds_cum_rate": d.dec_exceeds_cum / cfg.M,
            "infeasible_refits": d.infeasible_refits,
            "floored_variances": d.floored_variances,
            "excluded_new_columns": list(d.excluded_new_columns),
            "excluded_dec_columns": list(d.excluded_dec_columns),
        }
    record_dicts = [
        {
            "accident_year": r.accident_year,
            "from_dev_year": r.from_dev_year,
            "c_start": r.c_start,
            "lower": r.lower,
            "upper": r.upper,
        }
        for r in records
    ]
    peak = max(record_dicts, key=lambda r: r["upper"]) if record_dicts else None
    return {
        "M": cfg.M,
        "methods": methods,
        "absorption": {"records": record_dicts, "max_upper": peak},
    }


@dataclass(frozen=True)
class RunArtifacts:
    """Handle on a finished run: file paths plus in-memory results."""

    out_dir: str
    paths: dict[str, str] = field(repr=False)
    calibration: CalibrationResult = field(repr=False)
    distributions: dict[str, ReserveDistribution] = field(repr=False)
    matched: MatchedDistribution | None = field(repr=False, default=None)


def run_report(cfg: RunConfig) -> RunArtifacts:
    """Execute a full report run and write all artifacts to ``cfg.out_dir``."""
    data = load_claims_data(cfg)
    cal = calibrate(data, cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    paths: dict[str, str] = {}

    def emit(name: str, text: str) -> None:
        path = os.path.join(cfg.out_dir, name)
        _atomic_write(path, text)
        paths[name] = path

    emit(
        "calibration.json",
        json.dumps(_calibration_payload(data, cfg, cal), indent=2, sort_keys=True) + "\n",
    )
    if cfg.calibrate_only:
        if cfg.render_plots:
            from . import plots

            paths.update(plots.render_all(cfg.out_dir, cal, {}, None, []))
        return RunArtifacts(
            out_dir=cfg.out_dir, paths=paths, calibration=cal, distributions={}
        )

    base = BootstrapConfig(
        M=cfg.M,
        seed=cfg.seed,
        ez=cfg.primary_ez,
        tail_variance_rule=cfg.tail_variance_rule,
        infeasible_policy=cfg.infeasible_policy,
    )
    engines = {
        "ct": ct_bootstrap,
        "residual": residual_bootstrap,
        "timeseries": timeseries_bootstrap,
    }
    kind, source = _parse_msep_source(cfg.msep_source)
    needed = [m for m in cfg.methods if m != "matched"]
    if "matched" in cfg.methods and kind == "engine" and source not in needed:
        needed.append(source)

    distributions: dict[str, ReserveDistribution] = {}
    for name in needed:
        distributions[name] = engines[name](data, base)

    matched = None
    if "matched" in cfg.methods:
        msep = source if kind == "external" else distributions[source].msep
        matched = moment_matched(
            cal.reserve,
            msep,
            family=cfg.matched_family,
            lognormal_param=cfg.lognormal_param,
        )

    rows = []
    for name in cfg.methods:
        if name == "matched":
            rows.append(_summary_row(name, matched))
        else:
            rows.append(_summary_row(name, distributions[name]))
            emit(f"reserves_{name}.csv", _reserves_csv(distributions[name].reserves))
            emit(f"histogram_{name}.csv", _histogram_csv(distributions[name].reserves))
    if matched is not None:
        emit("density_matched.csv", _matched_density_csv(matched))

    sweep_rows = []
    if len(cfg.ez) > 1:
        sweep_rows.append(
            {
                "ez": cfg.primary_ez,
                "jump_shape": cal.ct.jump_law.shape,
                "jump_rate": cal.ct.jump_law.rate,
                "msep": distributions["ct"].msep,
                "msep_root_pct": distributions["ct"].msep_root_pct,
                "q995_excess_pct": distributions["ct"].q995_excess_pct,
            }
        )
        for e in cfg.ez[1:]:
            ct_e = discrete_to_ct(cal.formula_params, e, cal.regression.ratio)
            dist_e = ct_bootstrap(data, replace(base, ez=e))
            sweep_rows.append(
                {
                    "ez": e,
                    "jump_shape": ct_e.jump_law.shape,
                    "jump_rate": ct_e.jump_law.rate,
                    "msep": dist_e.msep,
                    "msep_root_pct": dist_e.msep_root_pct,
                    "q995_excess_pct": dist_e.q995_excess_pct,
                }
            )
        emit("sensitivity.csv", _sensitivity_csv(sweep_rows))

    summary = {
        "config": {
            "dataset": cfg.dataset,
            "methods": list(cfg.methods),
            "M": cfg.M,
            "seed": cfg.seed,
            "ez": list(cfg.ez),
            "tail_variance_rule": cfg.tail_variance_rule,
            "infeasible_policy": cfg.infeasible_policy,
            "matched_family": cfg.matched_family,
            "lognormal_param": cfg.lognormal_param,
            "msep_source": cfg.msep_source,
        },
        "point_estimate": cal.reserve,
        "rows": rows,
    }
    emit("summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    emit("summary.csv", _summary_csv(rows))

    records = absorption_scan(data, cal.ct)
    emit(
        "diagnostics.json",
        json.dumps(_diagnostics_payload(cfg, distributions, records), indent=2, sort_keys=True)
        + "\n",
    )

    if cfg.render_plots:
        from . import plots

        paths.update(
            plots.render_all(
                cfg.out_dir,
                cal,
                {m: distributions[m] for m in cfg.methods if m in distributions},
                matched,
                sweep_rows,
            )
        )

    return RunArtifacts(
        out_dir=cfg.out_dir,
        paths=paths,
        calibration=cal,
        distributions=distributions,
        matched=matched,
    )
