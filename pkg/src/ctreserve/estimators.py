"""Moment estimators for the two-channel claims development model.

The model splits each development-year movement of the cumulative amount
into a new-claims increment driven by exposure and a proportional decrease
of the amount already reported:

    E[N[i, j] | F_{j-1}] = new_mean[j-1] * exposure[i],
    Var[N[i, j] | F_{j-1}] = new_var[j-1] * exposure[i],
    E[D[i, j+1] | F_j] = dev_mean[j] * C[i, j],
    Var[D[i, j+1] | F_j] = dev_var[j] * C[i, j],

with the two channels conditionally uncorrelated.  Arrays are aligned on
0-based transition indices: entry ``k`` governs the transition from
development year ``k`` to ``k+1`` (entry 0 covers the opening year, where
``dev_mean[0] = dev_var[0] = 0`` because there is nothing to revise yet).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .triangle import ClaimsData, DataError

__all__ = [
    "DiscreteParams",
    "estimate_discrete",
    "ultimate_and_reserve",
    "conditional_moments",
]

TAIL_VARIANCE_RULES = ("paper", "formula")


@dataclass(frozen=True)
class DiscreteParams:
    """Development-year parameters of the two-channel model.

    Attributes
    ----------
    new_mean : numpy.ndarray
        ``new_mean[k]``: expected new-claims amount per unit exposure in
        development year ``k+1``.
    new_var : numpy.ndarray
        Per-exposure variance of the same amount.
    dev_mean : numpy.ndarray
        ``dev_mean[k]``: expected decrease between development years ``k``
        and ``k+1`` as a fraction of the year-``k`` cumulative amount;
        ``dev_mean[0] == 0``.
    dev_var : numpy.ndarray
        Variance of that decrease per unit of the year-``k`` amount;
        ``dev_var[0] == 0``.

    Notes
    -----
    All four arrays have length ``n``.  Estimates are not clipped to the
    model's parameter space: resampled triangles can yield negative
    ``new_mean`` entries, which downstream consumers either tolerate
    (normal-approximation simulation) or reject (intensity calibration).
    """

    new_mean: np.ndarray
    new_var: np.ndarray
    dev_mean: np.ndarray
    dev_var: np.ndarray

    def __post_init__(self):
        arrays = {}
        n = len(self.new_mean)
        for name in ("new_mean", "new_var", "dev_mean", "dev_var"):
            a = np.ascontiguousarray(getattr(self, name), dtype=float)
            if a.shape != (n,):
                raise DataError(f"{name} must have shape ({n},), got {a.shape}")
            if not np.isfinite(a).all():
                raise DataError(f"{name} contains non-finite entries")
            a.setflags(write=False)
            arrays[name] = a
        if arrays["dev_mean"][0] != 0.0 or arrays["dev_var"][0] != 0.0:
            raise DataError("opening-year decrease parameters must be zero")
        if (arrays["new_var"] < 0).any() or (arrays["dev_var"] < 0).any():
            raise DataError("variance parameters must be nonnegative")
        for name, a in arrays.items():
            object.__setattr__(self, name, a)

    @property
    def n(self) -> int:
        return len(self.new_mean)


def _estimate_arrays(new_vals, dec_vals, cum_vals, exposure, tail_variance_rule):
    """Column-wise moment estimators on dense (n, n) arrays.

    ``new_vals``/``dec_vals`` supply the numerators, ``cum_vals`` and
    ``exposure`` the denominators and weights.  Shared by the observed-data
    fit and the bootstrap re-fits, which resimulate the numerators but keep
    the observed denominators fixed.
    """
    n = exposure.shape[0]
    new_mean = np.zeros(n)
    new_var = np.zeros(n)
    dev_mean = np.zeros(n)
    dev_var = np.zeros(n)
    for j in range(1, n + 1):  # development year of the N column
        rows = slice(0, n - j + 1)
        col = new_vals[rows, j - 1]
        e = exposure[rows]
        new_mean[j - 1] = col.sum() / e.sum()
        if j <= n - 1:
            dev = col / e - new_mean[j - 1]
            new_var[j - 1] = (e * dev * dev).sum() / (n - j)
    for j in range(1, n):  # transition from development year j to j+1
        rows = slice(0, n - j)
        dcol = dec_vals[rows, j]
        ccol = cum_vals[rows, j - 1]
        csum = ccol.sum()
        if csum == 0.0:
            raise DataError(f"zero cumulative denominator at development year {j}")
        dev_mean[j] = dcol.sum() / csum
        if j <= n - 2:
            if (ccol == 0.0).any():
                raise DataError(f"zero cumulative weight at development year {j}")
            ratio = dcol / ccol - dev_mean[j]
            dev_var[j] = (ccol * ratio * ratio).sum() / (n - j - 1)
    if tail_variance_rule == "paper":
        new_var[n - 2] = 0.0
    elif tail_variance_rule != "formula":
        raise ValueError(f"unknown tail_variance_rule {tail_variance_rule!r}")
    # last new-claims column has a single observation, last decrease
    # transition none at all: both variances are set to zero by convention.
    new_var[n - 1] = 0.0
    dev_var[n - 1] = 0.0
    return new_mean, new_var, dev_mean, dev_var


def estimate_discrete(data: ClaimsData, tail_variance_rule: str = "paper") -> DiscreteParams:
    """Fit the development-year parameters from an observed run-off.

    Parameters
    ----------
    data : ClaimsData
        Observed triangles and exposures.
    tail_variance_rule : {"paper", "formula"}
        Treatment of the next-to-last new-claims variance, which is
        estimated from two observations only.  ``"paper"`` zeroes it
        (Schnieper's convention, the default); ``"formula"`` keeps the
        sample value.  The variance of the final column and of the final
        decrease transition are zero under both rules (no degrees of
        freedom).

    Returns
    -------
    DiscreteParams

    Notes
    -----
    The new-claims channel uses exposure-weighted column averages; the
    decrease channel uses cumulative-amount-weighted development ratios.
    Variances are computed in a second pass around the fitted means.
    """
    arrays = _estimate_arrays(
        data.new.values, data.dec.values, data.cum.values, data.exposure, tail_variance_rule
    )
    return DiscreteParams(*arrays)


def ultimate_and_reserve(data: ClaimsData, params: DiscreteParams) -> tuple[np.ndarray, float]:
    """Project each accident year to its ultimate and sum the reserve.

    The ultimate of accident year ``i`` with latest observed development
    year ``s = n+1-i`` is

        ult[i] = C[i, s] * prod_{k=s}^{n-1} (1 - dev_mean[k])
                 + exposure[i] * sum_{k=s+1}^{n} new_mean[k-1]
                   * prod_{l=k}^{n-1} (1 - dev_mean[l]),

    i.e. the observed amount developed forward plus the expected future
    new claims, each developed to year ``n``.  The reserve is the sum over
    accident years 2..n of ultimate minus latest observed amount.

    Returns
    -------
    (ultimates, reserve)
        ``ultimates[i-1]`` per accident year, and their aggregate excess
        over the current diagonal.
    """
    n = data.n
    surv = 1.0 - params.dev_mean  # surv[k] applies to transition k -> k+1
    ultimates = np.zeros(n)
    for i in range(1, n + 1):
        s = n + 1 - i
        developed = data.cum[i, s] * np.prod(surv[s:n])
        future = 0.0
        for k in range(s + 1, n + 1):
            future += params.new_mean[k - 1] * np.prod(surv[k:n])
        ultimates[i - 1] = developed + data.exposure[i - 1] * future
    reserve = 0.0
    for i in range(2, n + 1):
        reserve += ultimates[i - 1] - data.cum[i, n + 1 - i]
    return ultimates, float(reserve)


def conditional_moments(
    data: ClaimsData, params: DiscreteParams, i: int, s: int, j: int
) -> tuple[float, float]:
    """Exact conditional mean and variance of ``C[i, j]`` given year ``s``.

    Iterates the one-step relations

        E[C[i, k+1] | F_k]   = (1 - dev_mean[k]) C[i, k] + new_mean[k] E_i,
        Var[C[i, k+1] | F_k] = new_var[k] E_i + dev_var[k] C[i, k],

    through the tower property from ``k = s`` to ``j-1``; the result is the
    closed product-sum expression for the conditional moments.

    Parameters
    ----------
    i, s, j : int
        Accident year, conditioning development year and target development
        year, 1-based with ``1 <= s <= j <= n``.  Cell ``(i, s)`` must be
        populated.

    Returns
    -------
    (mean, variance)
        ``j == s`` returns ``(C[i, s], 0.0)``.
    """
    n = data.n
    if not 1 <= s <= j <= n:
        raise DataError(f"need 1 <= s <= j <= n, got s={s}, j={j}, n={n}")
    mean = data.cum[i, s]
    var = 0.0
    e = data.exposure[i - 1]
    for k in range(s, j):
        f = 1.0 - params.dev_mean[k]
        var = f * f * var + params.new_var[k] * e + params.dev_var[k] * mean
        mean = f * mean + params.new_mean[k] * e
    return float(mean), float(var)
