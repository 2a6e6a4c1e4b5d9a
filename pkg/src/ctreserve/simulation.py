"""Exact simulation of the claims process across development years.

No time stepping is involved.  Conditional on the jump times of one
development year, the process value at the year end is a sum of
independent branches: one branch per newly arrived claim, evolved from
its arrival time, plus one branch carrying the whole amount reported at
the start of the year.  Each branch follows the square-root diffusion
with proportional decay, whose transition law started from mass ``z``
over a horizon ``h`` is a compound Poisson sum of exponentials with

    rate     = (2 z / (tau2 h)) * u / (e^u - 1),      u = delta * h,
    exp_rate = (2 / (tau2 h)) * u / (1 - e^-u),

mean ``z e^{-u}`` and an atom of size ``e^-rate`` at zero.  Sampling the
branches therefore reproduces the year-end law exactly, and the zero
atom gives closed-form bounds on the probability that the reported
amount is fully absorbed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .calibration import CtParams
from .rng import (
    CompoundPoissonExpParams,
    sample_compound_poisson_exp,
    sample_poisson_times,
)
from .triangle import ClaimsData

__all__ = [
    "DeterministicBranch",
    "branch_law",
    "sample_branch",
    "YearTransition",
    "simulate_year",
    "simulate_year_jumpwise",
    "TriangleCompletion",
    "simulate_lower_triangle",
    "AbsorptionRecord",
    "absorption_bounds",
    "absorption_scan",
]

# |delta*h| below this evaluates the rate factors by series; keeps their
# relative error under 1e-8 without hitting 0/0 at delta = 0
_TAYLOR = 1e-8
# tau2 below this collapses the branch to its deterministic mean
_VOL_FLOOR = 1e-14


@dataclass(frozen=True)
class DeterministicBranch:
    """Degenerate branch law (zero volatility or zero horizon)."""

    value: float

    @property
    def mean(self) -> float:
        return self.value

    @property
    def zero_prob(self) -> float:
        return 1.0 if self.value == 0.0 else 0.0


def branch_law(z: float, t_from: float, t_to: float, delta: float, tau2: float):
    """Transition law of one branch of mass ``z`` from ``t_from`` to ``t_to``.

    Returns :class:`~ctreserve.rng.CompoundPoissonExpParams`, or
    :class:`DeterministicBranch` with value ``z e^{-delta h}`` when the
    volatility (or the horizon) vanishes.  Both carry ``mean`` and
    ``zero_prob``; the mean equals ``z e^{-delta h}`` in every regime.
    """
    h = t_to - t_from
    if h < 0.0:
        raise ValueError(f"negative horizon: {t_from} -> {t_to}")
    if z < 0.0:
        raise ValueError(f"branch mass must be >= 0, got {z}")
    if tau2 < 0.0:
        raise ValueError(f"tau2 must be >= 0, got {tau2}")
    if tau2 < _VOL_FLOOR or h == 0.0:
        return DeterministicBranch(z * math.exp(-delta * h))
    u = delta * h
    base = 2.0 / (tau2 * h)
    if abs(u) < _TAYLOR:
        f_rate = 1.0 - 0.5 * u
        f_exp = 1.0 + 0.5 * u
    else:
        f_rate = u / math.expm1(u)
        f_exp = u / -math.expm1(-u)
    return CompoundPoissonExpParams(rate=z * base * f_rate, exp_rate=base * f_exp)


def sample_branch(law, rng: np.random.Generator) -> float:
    if isinstance(law, DeterministicBranch):
        return law.value
    return sample_compound_poisson_exp(law, rng)


def _sum_jump_branches(sizes, horizons, delta, tau2, rng) -> float:
    """Sum of independently evolved per-claim branches (vectorized).

    Same law as evolving each branch through :func:`branch_law` one at a
    time; all horizons must be positive.
    """
    if sizes.size == 0:
        return 0.0
    if tau2 < _VOL_FLOOR:
        return float(np.sum(sizes * np.exp(-delta * horizons)))
    u = delta * horizons
    base = 2.0 / (tau2 * horizons)
    f_rate = np.empty_like(u)
    f_exp = np.empty_like(u)
    small = np.abs(u) < _TAYLOR
    f_rate[small] = 1.0 - 0.5 * u[small]
    f_exp[small] = 1.0 + 0.5 * u[small]
    x = u[~small]
    f_rate[~small] = x / np.expm1(x)
    f_exp[~small] = x / -np.expm1(-x)
    counts = rng.poisson(sizes * base * f_rate)
    # Gamma with shape 0 is exactly 0.0, covering absorbed branches
    return float(np.sum(rng.gamma(counts, 1.0 / (base * f_exp))))


@dataclass(frozen=True)
class YearTransition:
    """One development year of one accident year, decomposed.

    ``c_end = c_start - d_inc + n_inc`` holds exactly as written (the
    amounts are defined through that expression), ``n_inc >= 0``,
    ``d_inc <= c_start`` and ``c_end >= 0`` are structural: no clamping
    is ever applied.
    """

    c_start: float
    year_index: int
    c_end: float
    n_inc: float
    d_inc: float
    jump_times: np.ndarray
    jump_sizes: np.ndarray

    @property
    def jump_count(self) -> int:
        return len(self.jump_times)


def simulate_year(
    c_start: float,
    year_index: int,
    exposure: float,
    params: CtParams,
    rng: np.random.Generator,
) -> YearTransition:
    """Evolve one accident year across ``(year_index, year_index + 1]``.

    Draws the claim arrival times at intensity ``intensity[k] * exposure``
    and their sizes from the jump law, then evolves one branch per claim
    from its arrival to the year end and one branch for the opening
    amount across the whole year.  The decrease is what the opening
    branch lost; the new-claims increment is the surviving mass of the
    claim branches.
    """
    k = year_index
    if not 0 <= k < params.n:
        raise ValueError(f"year_index {k} outside 0..{params.n - 1}")
    if c_start < 0.0:
        raise ValueError(f"c_start must be >= 0, got {c_start}")
    if exposure <= 0.0:
        raise ValueError(f"exposure must be > 0, got {exposure}")
    delta = float(params.decay[k])
    tau2 = float(params.vol2[k])
    t_end = float(k + 1)
    times = sample_poisson_times(params.intensity[k] * exposure, float(k), t_end, rng)
    sizes = params.jump_law.sample(rng, size=times.size)
    s0 = sample_branch(branch_law(c_start, float(k), t_end, delta, tau2), rng)
    n_inc = _sum_jump_branches(sizes, t_end - times, delta, tau2, rng)
    d_inc = c_start - s0
    c_end = c_start - d_inc + n_inc
    return YearTransition(
        c_start=c_start,
        year_index=k,
        c_end=c_end,
        n_inc=n_inc,
        d_inc=d_inc,
        jump_times=times,
        jump_sizes=sizes,
    )


def simulate_year_jumpwise(
    c_start: float,
    year_index: int,
    exposure: float,
    params: CtParams,
    rng: np.random.Generator,
) -> float:
    """Year-end amount by evolving the process jump by jump.

    Alternates exact no-jump transitions between consecutive arrival
    times with the addition of each claim size.  Same year-end law as
    :func:`simulate_year`, but the new/decrease split is not available.
    """
    k = year_index
    if not 0 <= k < params.n:
        raise ValueError(f"year_index {k} outside 0..{params.n - 1}")
    if c_start < 0.0:
        raise ValueError(f"c_start must be >= 0, got {c_start}")
    delta = float(params.decay[k])
    tau2 = float(params.vol2[k])
    t_end = float(k + 1)
    times = sample_poisson_times(params.intensity[k] * exposure, float(k), t_end, rng)
    sizes = params.jump_law.sample(rng, size=times.size)
    c = c_start
    t_prev = float(k)
    for t, z in zip(times, sizes):
        c = sample_branch(branch_law(c, t_prev, float(t), delta, tau2), rng) + z
        t_prev = float(t)
    return sample_branch(branch_law(c, t_prev, t_end, delta, tau2), rng)


@dataclass(frozen=True)
class TriangleCompletion:
    """Fully populated square arrays after simulating below the diagonal.

    Observed cells are copied from the data; ``reserve`` sums the
    simulated ultimates minus the latest observed diagonal values.
    """

    cum: np.ndarray
    new: np.ndarray
    dec: np.ndarray
    reserve: float

    @property
    def ultimates(self) -> np.ndarray:
        return self.cum[:, -1]


def simulate_lower_triangle(
    data: ClaimsData, params: CtParams, rng: np.random.Generator
) -> TriangleCompletion:
    """Chain year transitions from each latest observed value to year n."""
    n = data.n
    cum = data.cum.values.copy()
    new = data.new.values.copy()
    dec = data.dec.values.copy()
    for i in range(2, n + 1):
        r = i - 1
        c = cum[r, n - i]
        for k in range(n + 1 - i, n):
            t = simulate_year(c, k, float(data.exposure[r]), params, rng)
            new[r, k] = t.n_inc
            dec[r, k] = t.d_inc
            cum[r, k] = t.c_end
            c = t.c_end
    reserve = float(np.sum(cum[:, n - 1] - np.diag(np.fliplr(data.cum.values))))
    return TriangleCompletion(cum=cum, new=new, dec=dec, reserve=reserve)


@dataclass(frozen=True)
class AbsorptionRecord:
    """Zero-absorption bounds for one diagonal cell's next transition."""

    accident_year: int
    from_dev_year: int
    c_start: float
    lower: float
    upper: float


def absorption_bounds(
    c_start: float,
    year_index: int,
    exposure: float,
    params: CtParams,
    horizon: float = 1.0,
) -> tuple[float, float]:
    """Bounds on the probability that the reported amount hits zero.

    The upper bound is the zero atom of the opening branch, i.e. the
    probability that everything reported at the year start is gone by
    ``year_index + horizon``; the lower bound further requires that no
    new claim arrives over the horizon.
    """
    if not 0.0 < horizon <= 1.0:
        raise ValueError(f"horizon must be in (0, 1], got {horizon}")
    k = year_index
    law = branch_law(
        c_start, 0.0, horizon, float(params.decay[k]), float(params.vol2[k])
    )
    upper = law.zero_prob
    lower = upper * math.exp(-params.intensity[k] * exposure * horizon)
    return lower, upper


def absorption_scan(data: ClaimsData, params: CtParams) -> tuple[AbsorptionRecord, ...]:
    """Bounds for every accident year's first unobserved transition."""
    records = []
    for i in range(2, data.n + 1):
        j = data.n + 1 - i
        c = data.cum[i, j]
        lower, upper = absorption_bounds(c, j, float(data.exposure[i - 1]), params)
        records.append(
            AbsorptionRecord(
                accident_year=i, from_dev_year=j, c_start=c, lower=lower, upper=upper
            )
        )
    return tuple(records)
