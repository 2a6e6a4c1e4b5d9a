"""Reserve-distribution estimators: three bootstraps and a moment match.

All three bootstrap engines follow the same two-step shape: resample or
resimulate the observed upper triangle, re-estimate the development
parameters from it (simulated numerators over the observed denominators),
then simulate the unobserved lower triangle under the re-estimated
parameters and read off the reserve.  They differ in the law used for
each step:

* continuous-time: exact process simulation conditional on each observed
  cell, re-calibration of the jump-diffusion per replicate; structurally
  incapable of negative new claims or of decreases exceeding the amount
  available.
* residual: Pearson-residual resampling for the upper triangle, a normal
  approximation for the lower one.
* time series: parametric gamma/normal draws channel by channel.

The moment-matched method skips simulation altogether and fits a
two-parameter family to a reserve point estimate and mean squared error
of prediction supplied from elsewhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from .calibration import (
    InfeasibleError,
    _origin_slope,
    discrete_to_ct,
    variance_link,
)
from .estimators import (
    TAIL_VARIANCE_RULES,
    DiscreteParams,
    _estimate_arrays,
    estimate_discrete,
    ultimate_and_reserve,
)
from .rng import RngStream
from .simulation import simulate_lower_triangle, simulate_year
from .triangle import ClaimsData, DataError

__all__ = [
    "INFEASIBLE_POLICIES",
    "MATCHED_FAMILIES",
    "LOGNORMAL_PARAMS",
    "BootstrapConfig",
    "Diagnostics",
    "ReserveDistribution",
    "summarize",
    "ct_bootstrap",
    "residual_bootstrap",
    "timeseries_bootstrap",
    "MatchedDistribution",
    "moment_matched",
]

INFEASIBLE_POLICIES = ("resample", "clamp")
MATCHED_FAMILIES = ("lognormal", "gamma")
LOGNORMAL_PARAMS = ("standard", "paper")

# sub-stream tags so the engines never share draws under one seed
_ENGINE_CT = 0
_ENGINE_RESIDUAL = 1
_ENGINE_TIMESERIES = 2

# resample-policy guard against a systematically infeasible configuration
_MAX_ATTEMPTS = 100


@dataclass(frozen=True)
class BootstrapConfig:
    """Common knobs of the bootstrap engines.

    ``ez`` (the chosen mean claim size) and ``infeasible_policy`` only
    matter to the continuous-time engine, ``shortcut_reestimates`` only
    to the time-series one; the rest apply everywhere.
    """

    M: int = 1000
    seed: int = 0
    ez: float = 1.0
    tail_variance_rule: str = "paper"
    infeasible_policy: str = "resample"
    shortcut_reestimates: bool = False

    def __post_init__(self):
        if self.M < 1:
            raise DataError(f"M must be >= 1, got {self.M}")
        if not (self.ez > 0 and math.isfinite(self.ez)):
            raise DataError(f"ez must be finite and > 0, got {self.ez}")
        if self.tail_variance_rule not in TAIL_VARIANCE_RULES:
            raise DataError(f"unknown tail_variance_rule {self.tail_variance_rule!r}")
        if self.infeasible_policy not in INFEASIBLE_POLICIES:
            raise DataError(f"unknown infeasible_policy {self.infeasible_policy!r}")


@dataclass(frozen=True)
class Diagnostics:
    """Pathology counts accumulated over the replicates.

    ``negative_new`` and ``dec_exceeds_cum`` count replicates containing
    at least one such cell.  The resampling engines score only the
    rebuilt observed cells (the re-estimation inputs); the exact
    simulation scores both triangles since its guarantees are
    structural.  ``infeasible_refits`` counts rejected (or clamped)
    re-calibrations
    and ``floored_variances`` individual negative variance arguments
    floored at zero.  The excluded columns record development years
    whose residuals could not be formed.
    """

    negative_new: int = 0
    dec_exceeds_cum: int = 0
    infeasible_refits: int = 0
    floored_variances: int = 0
    excluded_new_columns: tuple = ()
    excluded_dec_columns: tuple = ()


@dataclass(frozen=True)
class ReserveDistribution:
    """Empirical predictive distribution of the aggregate reserve."""

    reserves: np.ndarray
    point_estimate: float
    msep: float
    msep_root_pct: float
    q995_excess_pct: float
    diagnostics: Diagnostics


def summarize(
    reserves, point_estimate: float, diagnostics: Diagnostics = Diagnostics()
) -> ReserveDistribution:
    """Variance and upper-quantile summary of a reserve sample.

    The mean squared error of prediction is taken as the unbiased sample
    variance of the replicates; the 99.5% quantile uses linear
    interpolation of the order statistics.  Both are reported relative
    to the point estimate, in percent.
    """
    arr = np.ascontiguousarray(reserves, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise DataError("need a flat sample of at least two reserves")
    if not (point_estimate > 0 and math.isfinite(point_estimate)):
        raise DataError(f"point estimate must be finite and > 0, got {point_estimate}")
    arr.setflags(write=False)
    msep = float(np.var(arr, ddof=1))
    q995 = float(np.quantile(arr, 0.995))
    return ReserveDistribution(
        reserves=arr,
        point_estimate=point_estimate,
        msep=msep,
        msep_root_pct=100.0 * math.sqrt(msep) / point_estimate,
        q995_excess_pct=100.0 * (q995 - point_estimate) / point_estimate,
        diagnostics=diagnostics,
    )


def _refit(sim_new, sim_dec, data: ClaimsData, tail_variance_rule: str) -> DiscreteParams:
    """Re-estimate parameters from simulated numerators.

    Denominators and weights stay at their observed values, exactly as
    the re-estimation displays prescribe.
    """
    return DiscreteParams(
        *_estimate_arrays(
            sim_new, sim_dec, data.cum.values, data.exposure, tail_variance_rule
        )
    )


def _upper_starts(data: ClaimsData, k: int) -> np.ndarray:
    """Observed amounts conditioning the year-k transitions (k >= 1)."""
    return data.cum.values[: data.n - k, k - 1]


# --- continuous-time engine -------------------------------------------------


def _ct_simulate_upper(data: ClaimsData, ct, gen) -> tuple[np.ndarray, np.ndarray]:
    """One-step transitions from every observed amount, collected per cell.

    Each observed cell is resimulated conditional on the observed amount
    one year earlier (zero before the opening year), never on simulated
    values: replicate-to-replicate variation then reflects one-step
    process noise only, matching the re-estimation displays.
    """
    n = data.n
    sim_new = np.zeros((n, n))
    sim_dec = np.zeros((n, n))
    cum = data.cum.values
    exposure = data.exposure
    for k in range(n):
        for r in range(n - k):
            c0 = 0.0 if k == 0 else float(cum[r, k - 1])
            t = simulate_year(c0, k, float(exposure[r]), ct, gen)
            sim_new[r, k] = t.n_inc
            sim_dec[r, k] = t.d_inc
    return sim_new, sim_dec


def _ct_recalibrate(p: DiscreteParams, ez: float, policy: str):
    """Map a re-estimated parameter set back to process coefficients.

    Returns ``(ct_params, clamped)``.  Under the resample policy any
    infeasibility (decrease fraction at or above 1, or a jump moment
    ratio at or below the chosen mean) raises
    :class:`~ctreserve.calibration.InfeasibleError`; under the clamp
    policy the offending quantity is pulled just inside the feasible
    region instead and the event is flagged.
    """
    clamped = False
    if policy == "clamp" and (p.dev_mean >= 1.0).any():
        p = replace(p, dev_mean=np.minimum(p.dev_mean, 1.0 - 1e-6))
        clamped = True
    offset, slope = variance_link(p)
    weights = np.arange(p.n - 1, 0, -1, dtype=float)
    x = _origin_slope(offset, slope, p.new_var[: p.n - 1], weights)
    if x <= ez:
        if policy == "clamp":
            x = ez * (1.0 + 1e-6)
            clamped = True
        else:
            raise InfeasibleError(f"refitted moment ratio {x} not above ez {ez}")
    return discrete_to_ct(p, ez, x), clamped


def ct_bootstrap(data: ClaimsData, cfg: BootstrapConfig) -> ReserveDistribution:
    """Predictive reserve distribution from the continuous-time bootstrap.

    Per replicate: resimulate every observed cell's transition exactly
    under the fitted process, re-estimate the discrete parameters from
    the simulated increments, re-calibrate process coefficients and a
    fresh jump law at the same ``ez``, then simulate the lower triangle
    and evaluate the reserve against the observed diagonal.

    Structural guarantees of the exact simulation (new claims >= 0,
    decreases bounded by the available amount, nonnegative cumulative
    amounts) are verified cell by cell and reported in the diagnostics;
    they are expected to stay at zero.
    """
    n = data.n
    if n < 3:
        raise DataError("continuous-time bootstrap needs at least a 3x3 run-off")
    params = estimate_discrete(data, "formula")
    report_weights = np.arange(n - 1, 0, -1, dtype=float)
    offset, slope = variance_link(params)
    x_hat = _origin_slope(offset, slope, params.new_var[: n - 1], report_weights)
    ct0 = discrete_to_ct(params, cfg.ez, x_hat)
    _, point = ultimate_and_reserve(data, estimate_discrete(data, cfg.tail_variance_rule))

    mask = data.new.mask
    starts = [None] + [_upper_starts(data, k) for k in range(1, n)]
    reserves = np.empty(cfg.M)
    infeasible = 0
    negative_new = 0
    dec_exceeds = 0
    for m in range(cfg.M):
        for attempt in range(_MAX_ATTEMPTS):
            gen = RngStream(cfg.seed, m).generator(_ENGINE_CT, attempt)
            sim_new, sim_dec = _ct_simulate_upper(data, ct0, gen)
            try:
                p_m = _refit(sim_new, sim_dec, data, "formula")
                ct_m, clamped = _ct_recalibrate(p_m, cfg.ez, cfg.infeasible_policy)
            except InfeasibleError:
                infeasible += 1
                continue
            if clamped:
                infeasible += 1
            break
        else:
            raise InfeasibleError(
                f"replicate {m} stayed infeasible after {_MAX_ATTEMPTS} attempts"
            )
        completion = simulate_lower_triangle(data, ct_m, gen)
        if (sim_new[mask] < 0).any() or (completion.new < 0).any():
            negative_new += 1
        upper_bad = any(
            (sim_dec[: n - k, k] > starts[k]).any() for k in range(1, n)
        )
        if upper_bad or (completion.dec[:, 1:] > completion.cum[:, :-1]).any():
            dec_exceeds += 1
        reserves[m] = completion.reserve
    diags = Diagnostics(
        negative_new=negative_new,
        dec_exceeds_cum=dec_exceeds,
        infeasible_refits=infeasible,
    )
    return summarize(reserves, point, diags)


# --- residual engine ---------------------------------------------------------


def _residual_pools(data: ClaimsData, params: DiscreteParams):
    """Pearson residual pools of the two channels, rescaled to unit mean square.

    Columns whose variance estimate is zero cannot be standardized and are
    excluded (recorded as 1-based development years / transition years).
    The column-wise residual sums of squares equal their degrees of
    freedom by construction, so dividing each pool by its root mean
    square is the aggregate degrees-of-freedom correction.
    """
    n = data.n
    newv = data.new.values
    decv = data.dec.values
    cumv = data.cum.values
    exposure = data.exposure
    r_parts, s_parts = [], []
    excluded_new, excluded_dec = [], []
    for k in range(n):
        rows = n - k
        sd = math.sqrt(params.new_var[k])
        if sd > 0:
            e = exposure[:rows]
            r_parts.append((newv[:rows, k] - params.new_mean[k] * e) / (sd * np.sqrt(e)))
        else:
            excluded_new.append(k + 1)
    for k in range(1, n):
        rows = n - k
        sd = math.sqrt(params.dev_var[k])
        if sd > 0:
            c = cumv[:rows, k - 1]
            keep = c > 0
            s_parts.append(
                (decv[:rows, k][keep] - params.dev_mean[k] * c[keep])
                / (sd * np.sqrt(c[keep]))
            )
        else:
            excluded_dec.append(k)
    r_pool = np.concatenate(r_parts)
    s_pool = np.concatenate(s_parts)
    if r_pool.size == 0 or s_pool.size == 0:
        raise DataError("no usable Pearson residuals in at least one channel")
    r_pool = r_pool / math.sqrt(float(np.mean(r_pool * r_pool)))
    s_pool = s_pool / math.sqrt(float(np.mean(s_pool * s_pool)))
    return r_pool, s_pool, tuple(excluded_new), tuple(excluded_dec)


def residual_bootstrap(data: ClaimsData, cfg: BootstrapConfig) -> ReserveDistribution:
    """Predictive reserve distribution from Pearson-residual resampling.

    Per replicate: rebuild every observed cell as fitted value plus a
    uniformly resampled residual scaled back to the cell, re-estimate
    the parameters, then chain the lower triangle through the one-step
    normal approximation (aggregate mean and variance of the two
    channels).  Negative variance arguments, which the normal chain can
    produce once a simulated amount goes negative, are floored at zero
    and counted.
    """
    n = data.n
    params = estimate_discrete(data, cfg.tail_variance_rule)
    _, point = ultimate_and_reserve(data, params)
    r_pool, s_pool, excluded_new, excluded_dec = _residual_pools(data, params)

    exposure = data.exposure
    cumv = data.cum.values
    mask = data.new.mask
    new_sd = np.sqrt(params.new_var)[None, :] * np.sqrt(exposure)[:, None]
    new_fit = params.new_mean[None, :] * exposure[:, None]
    # decrease channel: mean/sd per cell against the observed prior amount
    dec_fit = np.zeros((n, n))
    dec_sd = np.zeros((n, n))
    for k in range(1, n):
        rows = n - k
        dec_fit[:rows, k] = params.dev_mean[k] * cumv[:rows, k - 1]
        dec_sd[:rows, k] = math.sqrt(params.dev_var[k]) * np.sqrt(cumv[:rows, k - 1])
    dec_mask = mask.copy()
    dec_mask[:, 0] = False

    diag = np.diag(np.fliplr(cumv))
    reserves = np.empty(cfg.M)
    negative_new = 0
    dec_exceeds = 0
    floored = 0
    for m in range(cfg.M):
        gen = RngStream(cfg.seed, m).generator(_ENGINE_RESIDUAL)
        r_star = np.zeros((n, n))
        r_star[mask] = gen.choice(r_pool, size=int(mask.sum()))
        s_star = np.zeros((n, n))
        s_star[dec_mask] = gen.choice(s_pool, size=int(dec_mask.sum()))
        sim_new = np.where(mask, new_fit + new_sd * r_star, 0.0)
        sim_dec = dec_fit + dec_sd * s_star
        p_m = _refit(sim_new, sim_dec, data, cfg.tail_variance_rule)
        if (sim_new[mask] < 0).any():
            negative_new += 1
        if any((sim_dec[: n - k, k] > cumv[: n - k, k - 1]).any() for k in range(1, n)):
            dec_exceeds += 1
        total = 0.0
        for i in range(2, n + 1):
            r = i - 1
            c = cumv[r, n - i]
            for k in range(n + 1 - i, n):
                var = p_m.new_var[k] * exposure[r] + p_m.dev_var[k] * c
                # <= so a -0.0 product cannot reach the sampler's sign check
                if var <= 0.0:
                    if var < 0.0:
                        floored += 1
                    var = 0.0
                c = (
                    (1.0 - p_m.dev_mean[k]) * c
                    + p_m.new_mean[k] * exposure[r]
                    + math.sqrt(var) * gen.standard_normal()
                )
            total += c - diag[r]
        reserves[m] = total
    diags = Diagnostics(
        negative_new=negative_new,
        dec_exceeds_cum=dec_exceeds,
        floored_variances=floored,
        excluded_new_columns=excluded_new,
        excluded_dec_columns=excluded_dec,
    )
    return summarize(reserves, point, diags)


# --- time-series engine ------------------------------------------------------


def _gamma_increment(mean: float, var: float, exposure: float, gen) -> float:
    """New-claims draw with the given per-exposure moments.

    Zero variance (or a nonpositive mean, which only a degenerate refit
    can produce) collapses to the deterministic mean.
    """
    if var <= 0.0 or mean <= 0.0:
        return mean * exposure
    shape = mean * mean * exposure / var
    return float(gen.gamma(shape, var / mean))


def timeseries_bootstrap(data: ClaimsData, cfg: BootstrapConfig) -> ReserveDistribution:
    """Predictive reserve distribution from a parametric bootstrap.

    The upper triangle is redrawn channel by channel: gamma new claims
    with the fitted mean and variance per cell, normal decreases around
    the observed prior amounts.  Re-estimation either recomputes the
    estimators on the simulated cells or, with
    ``cfg.shortcut_reestimates``, draws the decrease-channel estimates
    from their exact sampling laws (normal around the fitted fraction,
    scaled chi-square for its variance); the new-claims channel is always
    re-estimated explicitly.  The lower triangle chains the same
    gamma/normal one-step laws under the re-estimated parameters.
    """
    n = data.n
    params = estimate_discrete(data, cfg.tail_variance_rule)
    _, point = ultimate_and_reserve(data, params)
    exposure = data.exposure
    cumv = data.cum.values
    mask = data.new.mask
    diag = np.diag(np.fliplr(cumv))

    # per-column gamma parameters of the observed fit (upper triangle)
    safe_var = np.where(params.new_var > 0, params.new_var, 1.0)
    shape_up = np.where(params.new_var > 0, params.new_mean**2 / safe_var, 0.0)
    scale_up = np.where(params.new_var > 0, safe_var / params.new_mean, 0.0)
    csum = np.array(
        [cumv[: n - k, k - 1].sum() if k >= 1 else 0.0 for k in range(n)]
    )
    dof = np.array([max(n - k - 1, 0) for k in range(n)])

    reserves = np.empty(cfg.M)
    negative_new = 0
    dec_exceeds = 0
    floored = 0
    for m in range(cfg.M):
        gen = RngStream(cfg.seed, m).generator(_ENGINE_TIMESERIES)
        sim_new = np.zeros((n, n))
        for k in range(n):
            rows = n - k
            if params.new_var[k] > 0:
                sim_new[:rows, k] = gen.gamma(
                    shape_up[k] * exposure[:rows], scale_up[k]
                )
            else:
                sim_new[:rows, k] = params.new_mean[k] * exposure[:rows]
        upper_dec_bad = False
        if cfg.shortcut_reestimates:
            dev_mean_m = np.zeros(n)
            dev_var_m = np.zeros(n)
            for k in range(1, n):
                sd = math.sqrt(params.dev_var[k] / csum[k]) if csum[k] > 0 else 0.0
                dev_mean_m[k] = gen.normal(params.dev_mean[k], sd)
                if params.dev_var[k] > 0 and dof[k] > 0:
                    dev_var_m[k] = (
                        params.dev_var[k] * gen.chisquare(dof[k]) / dof[k]
                    )
            base = _refit(sim_new, np.zeros((n, n)), data, cfg.tail_variance_rule)
            p_m = replace(base, dev_mean=dev_mean_m, dev_var=dev_var_m)
        else:
            sim_dec = np.zeros((n, n))
            for k in range(1, n):
                rows = n - k
                prior = cumv[:rows, k - 1]
                sim_dec[:rows, k] = gen.normal(
                    params.dev_mean[k] * prior,
                    math.sqrt(params.dev_var[k]) * np.sqrt(prior),
                )
                if (sim_dec[:rows, k] > prior).any():
                    upper_dec_bad = True
            p_m = _refit(sim_new, sim_dec, data, cfg.tail_variance_rule)
        if (sim_new[mask] < 0).any():
            negative_new += 1
        total = 0.0
        for i in range(2, n + 1):
            r = i - 1
            c = cumv[r, n - i]
            for k in range(n + 1 - i, n):
                n_inc = _gamma_increment(
                    p_m.new_mean[k], p_m.new_var[k], exposure[r], gen
                )
                var = p_m.dev_var[k] * c
                # <= so a -0.0 product cannot reach the sampler's sign check
                if var <= 0.0:
                    if var < 0.0:
                        floored += 1
                    var = 0.0
                d_inc = gen.normal(p_m.dev_mean[k] * c, math.sqrt(var))
                c = c + n_inc - d_inc
            total += c - diag[r]
        if upper_dec_bad:
            dec_exceeds += 1
        reserves[m] = total
    diags = Diagnostics(
        negative_new=negative_new,
        dec_exceeds_cum=dec_exceeds,
        floored_variances=floored,
    )
    return summarize(reserves, point, diags)


# --- moment-matched closed forms ---------------------------------------------


@dataclass(frozen=True)
class MatchedDistribution:
    """Two-parameter family matched to a reserve point estimate and MSEP.

    ``family="lognormal"`` with the default ``lognormal_param="standard"``
    matches mean and variance exactly; ``lognormal_param="paper"``
    reproduces a published variant whose variance parameter divides the
    MSEP by the mean instead of the squared mean (kept for comparison,
    it does not match the variance).  ``family="gamma"`` matches both
    moments exactly.
    """

    family: str
    point_estimate: float
    msep: float
    lognormal_param: str = "standard"

    def __post_init__(self):
        if self.family not in MATCHED_FAMILIES:
            raise DataError(f"unknown family {self.family!r}")
        if self.lognormal_param not in LOGNORMAL_PARAMS:
            raise DataError(f"unknown lognormal_param {self.lognormal_param!r}")
        if not (self.point_estimate > 0 and math.isfinite(self.point_estimate)):
            raise DataError("point estimate must be finite and > 0")
        if not (self.msep > 0 and math.isfinite(self.msep)):
            raise DataError("msep must be finite and > 0")

    def _frozen(self):
        mu = self.point_estimate
        if self.family == "gamma":
            return stats.gamma(a=mu * mu / self.msep, scale=self.msep / mu)
        if self.lognormal_param == "standard":
            sigma2 = math.log1p(self.msep / (mu * mu))
        else:
            sigma2 = math.log1p(self.msep / mu)
        location = math.log(mu) - 0.5 * sigma2
        return stats.lognorm(s=math.sqrt(sigma2), scale=math.exp(location))

    @property
    def mean(self) -> float:
        return float(self._frozen().mean())

    @property
    def variance(self) -> float:
        return float(self._frozen().var())

    def quantile(self, q):
        return self._frozen().ppf(q)

    def pdf(self, x):
        return self._frozen().pdf(x)

    @property
    def q995_excess_pct(self) -> float:
        q = float(self.quantile(0.995))
        return 100.0 * (q - self.point_estimate) / self.point_estimate


def moment_matched(
    point_estimate: float,
    msep: float,
    family: str = "lognormal",
    lognormal_param: str = "standard",
) -> MatchedDistribution:
    """Closed-form reserve distribution matched to (point, msep)."""
    return MatchedDistribution(
        family=family,
        point_estimate=point_estimate,
        msep=msep,
        lognormal_param=lognormal_param,
    )
