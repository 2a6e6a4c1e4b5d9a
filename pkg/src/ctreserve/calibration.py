"""Calibration of the continuous-time claims process from discrete estimates.

Between integer development times the cumulative amount of an accident year
follows a jump-diffusion: new claims arrive in a Poisson stream with
exposure-proportional intensity and i.i.d. gamma sizes, while the reported
amount decays at a proportional drift rate with square-root (Cox-Ingersoll-
Ross type) noise.  With the three coefficient functions held constant on
each development year, the year-over-year moments of the process are in
closed-form bijection with the discrete two-channel parameters:

    dev_mean[k] = 1 - exp(-decay[k])
    new_mean[k] = intensity[k] * jump_mean * (1 - exp(-decay[k])) / decay[k]
    dev_var[k]  = vol2[k] * (exp(-decay[k]) - exp(-2 decay[k])) / decay[k]
    new_var[k]  = vol2[k] * intensity[k] * jump_mean
                  * (1 - exp(-decay[k]))^2 / (2 decay[k]^2)
                  + intensity[k] * jump_second_moment
                  * (1 - exp(-2 decay[k])) / (2 decay[k])

(continuous limits apply at decay = 0).  The first three lines invert
directly.  The fourth is linear in the ratio of the first two jump-size
moments, which is therefore recovered by a weighted regression through the
origin across development years; together with a chosen jump mean it pins
down the gamma jump law.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .estimators import DiscreteParams
from .triangle import DataError

__all__ = [
    "InfeasibleError",
    "GammaJumpLaw",
    "fit_jump_gamma",
    "CtParams",
    "variance_link",
    "RegressionReport",
    "estimate_moment_ratio",
    "discrete_to_ct",
    "ct_to_discrete",
]

# below this, ratios of the form f(x)/x are evaluated by Taylor expansion
_SMALL = 1e-8


class InfeasibleError(ValueError):
    """Raised when estimates admit no continuous-time parameterization."""


@dataclass(frozen=True)
class GammaJumpLaw:
    """Gamma jump-size law pinned by its mean and second-moment ratio.

    Parameters
    ----------
    mean : float
        E[Z] > 0, the average size of a newly arriving claim.
    moment_ratio : float
        E[Z^2]/E[Z] > mean.  Fixing both moments identifies the gamma
        shape/rate uniquely.  Other families could be slotted in behind the
        same two-moment interface.
    """

    mean: float
    moment_ratio: float

    def __post_init__(self):
        if not (0.0 < self.mean < self.moment_ratio) or not np.isfinite(self.moment_ratio):
            raise InfeasibleError(
                f"need 0 < mean < moment_ratio, got mean={self.mean}, "
                f"moment_ratio={self.moment_ratio}"
            )

    @property
    def shape(self) -> float:
        return self.mean / (self.moment_ratio - self.mean)

    @property
    def rate(self) -> float:
        return 1.0 / (self.moment_ratio - self.mean)

    @property
    def second_moment(self) -> float:
        return self.mean * self.moment_ratio

    @property
    def variance(self) -> float:
        return self.mean * (self.moment_ratio - self.mean)

    def sample(self, rng: np.random.Generator, size=None):
        return rng.gamma(self.shape, 1.0 / self.rate, size=size)


def fit_jump_gamma(jump_mean: float, moment_ratio: float) -> GammaJumpLaw:
    """Gamma law with the given mean and E[Z^2]/E[Z]; infeasible if ratio <= mean."""
    return GammaJumpLaw(mean=jump_mean, moment_ratio=moment_ratio)


@dataclass(frozen=True)
class CtParams:
    """Piecewise-constant coefficients of the continuous-time claims process.

    ``intensity[k]`` is the claim-arrival intensity per unit exposure,
    ``decay[k]`` the proportional drift rate of the reported amount and
    ``vol2[k]`` the squared square-root-diffusion coefficient, each constant
    on the development-year interval ``(k, k+1]``.  ``decay`` may take either
    sign (negative values model systematic under-reserving); ``decay[0]``
    and ``vol2[0]`` are zero because no reported amount exists before the
    opening year ends.
    """

    intensity: np.ndarray
    decay: np.ndarray
    vol2: np.ndarray
    jump_law: GammaJumpLaw

    def __post_init__(self):
        n = len(self.intensity)
        for name in ("intensity", "decay", "vol2"):
            a = np.ascontiguousarray(getattr(self, name), dtype=float)
            if a.shape != (n,):
                raise DataError(f"{name} must have shape ({n},)")
            if not np.isfinite(a).all():
                raise DataError(f"{name} contains non-finite entries")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if (self.intensity < 0).any():
            raise InfeasibleError("arrival intensities must be nonnegative")
        if (self.vol2 < 0).any():
            raise InfeasibleError("squared volatilities must be nonnegative")
        if self.decay[0] != 0.0 or self.vol2[0] != 0.0:
            raise DataError("opening-year decay and volatility must be zero")

    @property
    def n(self) -> int:
        return len(self.intensity)


def _decay_over_dev(dev: np.ndarray) -> np.ndarray:
    """Elementwise -log(1-x)/x, continuously extended by 1 + x/2 near zero."""
    out = np.empty_like(dev)
    small = np.abs(dev) < _SMALL
    out[small] = 1.0 + 0.5 * dev[small]
    x = dev[~small]
    out[~small] = -np.log1p(-x) / x
    return out


def _one_minus_exp_over(u: np.ndarray) -> np.ndarray:
    """Elementwise (1 - exp(-u))/u, continuously extended by 1 - u/2 near zero."""
    out = np.empty_like(u)
    small = np.abs(u) < _SMALL
    out[small] = 1.0 - 0.5 * u[small]
    x = u[~small]
    out[~small] = -np.expm1(-x) / x
    return out


def variance_link(params: DiscreteParams) -> tuple[np.ndarray, np.ndarray]:
    """Offset and slope of the new-claims variance in the jump-moment ratio.

    For each transition ``k = 0..n-2`` the model implies

        new_var[k] = offset[k] + slope[k] * (E[Z^2]/E[Z]),
        offset[k] = dev_var[k] * new_mean[k] / (2 (1 - dev_mean[k])),
        slope[k]  = new_mean[k] * (2 - dev_mean[k]) / 2,

    independent of the jump mean.  The final transition is excluded: its
    variance estimate carries no degrees of freedom.
    """
    dev = params.dev_mean[: params.n - 1]
    if (dev >= 1.0).any():
        k = int(np.nonzero(dev >= 1.0)[0][0])
        raise InfeasibleError(f"fractional decrease >= 1 at transition {k}")
    mean = params.new_mean[: params.n - 1]
    offset = params.dev_var[: params.n - 1] * mean / (2.0 * (1.0 - dev))
    slope = mean * (2.0 - dev) / 2.0
    return offset, slope


def _origin_slope(offset, slope, response, weights) -> float:
    """Weighted least-squares slope through the origin (hot path, no report)."""
    y = response - offset
    denom = np.sum(weights * slope * slope)
    if denom <= 0.0:
        raise InfeasibleError("variance regression has no information")
    return float(np.sum(weights * slope * y) / denom)


@dataclass(frozen=True)
class RegressionReport:
    """Weighted through-the-origin fit of the jump second-moment ratio.

    Attributes
    ----------
    ratio : float
        Estimated E[Z^2]/E[Z].
    std_error, t_stat, p_value : float
        Two-sided t test of the slope against zero on
        ``len(response) - 1`` degrees of freedom.
    r_squared : float
        Uncentered weighted R^2 (the no-intercept convention).
    offset, slope, response, weight : numpy.ndarray
        Per-transition regression data, transition ``k`` fitting the
        year-``k+1`` new-claims variance with weight ``n - (k+1)``.
    """

    ratio: float
    std_error: float
    t_stat: float
    p_value: float
    r_squared: float
    offset: np.ndarray
    slope: np.ndarray
    response: np.ndarray
    weight: np.ndarray

    @property
    def fitted(self) -> np.ndarray:
        return self.offset + self.ratio * self.slope


def estimate_moment_ratio(params: DiscreteParams) -> RegressionReport:
    """Estimate E[Z^2]/E[Z] from the variance structure of the new claims.

    Regresses the per-exposure new-claims variances on the linear link of
    :func:`variance_link`, weighting transition ``k`` by the ``n - (k+1)``
    observations behind its response.  For the reference statistics the
    responses must be the raw sample variances, i.e. ``params`` fitted with
    ``tail_variance_rule="formula"``; a zeroed next-to-last variance is
    treated as data by the regression, not re-derived.

    Returns
    -------
    RegressionReport
    """
    offset, slope = variance_link(params)
    n = params.n
    response = params.new_var[: n - 1].copy()
    weight = np.arange(n - 1, 0, -1, dtype=float)
    ratio = _origin_slope(offset, slope, response, weight)
    y = response - offset
    resid = y - ratio * slope
    rss = float(np.sum(weight * resid * resid))
    tss = float(np.sum(weight * y * y))
    dof = len(y) - 1
    if dof > 0:
        std_error = float(np.sqrt(rss / dof / np.sum(weight * slope * slope)))
        t_stat = ratio / std_error if std_error > 0 else float("inf")
        p_value = float(2.0 * stats.t.sf(abs(t_stat), df=dof))
    else:
        std_error = t_stat = p_value = float("nan")
    r_squared = 1.0 - rss / tss if tss > 0 else float("nan")
    return RegressionReport(
        ratio=ratio,
        std_error=std_error,
        t_stat=t_stat,
        p_value=p_value,
        r_squared=r_squared,
        offset=offset,
        slope=slope,
        response=response,
        weight=weight,
    )


def discrete_to_ct(params: DiscreteParams, jump_mean: float, moment_ratio: float) -> CtParams:
    """Invert the year-over-year moment maps to continuous-time coefficients.

    Parameters
    ----------
    params : DiscreteParams
        Fitted development-year parameters; every ``dev_mean`` must be
        below 1 and every ``new_mean`` nonnegative.
    jump_mean : float
        Chosen E[Z].  The data identify only ``intensity * jump_mean``, so
        this is a free modelling choice; the implied intensities scale
        accordingly.
    moment_ratio : float
        E[Z^2]/E[Z], typically from :func:`estimate_moment_ratio`; must
        exceed ``jump_mean`` for a gamma law to exist.

    Returns
    -------
    CtParams

    Raises
    ------
    InfeasibleError
        If ``dev_mean >= 1`` somewhere, a ``new_mean`` is negative, or
        ``moment_ratio <= jump_mean``.
    """
    if jump_mean <= 0:
        raise InfeasibleError(f"jump mean must be positive, got {jump_mean}")
    dev = params.dev_mean
    if (dev >= 1.0).any():
        k = int(np.nonzero(dev >= 1.0)[0][0])
        raise InfeasibleError(f"fractional decrease >= 1 at transition {k}")
    if (params.new_mean < 0).any():
        k = int(np.nonzero(params.new_mean < 0)[0][0])
        raise InfeasibleError(f"negative new-claims mean at transition {k}")
    jump_law = fit_jump_gamma(jump_mean, moment_ratio)
    decay = -np.log1p(-dev)
    ratio = _decay_over_dev(dev)
    intensity = params.new_mean * ratio / jump_mean
    vol2 = params.dev_var * ratio / (1.0 - dev)
    return CtParams(intensity=intensity, decay=decay, vol2=vol2, jump_law=jump_law)


def ct_to_discrete(ct: CtParams) -> DiscreteParams:
    """Integrate the continuous-time coefficients back to year moments.

    Exact inverse of :func:`discrete_to_ct` on ``new_mean``, ``dev_mean``
    and ``dev_var``; ``new_var`` additionally uses the jump law's second
    moment, recomposing as ``offset + slope * moment_ratio`` of
    :func:`variance_link`.
    """
    decay = ct.decay
    dev_mean = -np.expm1(-decay)
    g = _one_minus_exp_over(decay)
    ez = ct.jump_law.mean
    new_mean = ct.intensity * ez * g
    dev_var = ct.vol2 * np.exp(-decay) * g
    new_var = (
        ct.vol2 * ct.intensity * ez * g * g / 2.0
        + ct.intensity * ct.jump_law.second_moment * _one_minus_exp_over(2.0 * decay)
    )
    return DiscreteParams(
        new_mean=new_mean, new_var=new_var, dev_mean=dev_mean, dev_var=dev_var
    )
