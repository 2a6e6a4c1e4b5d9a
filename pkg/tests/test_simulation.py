"""Exact-transition sampler: laws, structural invariants, absorption."""

import math

import numpy as np
import pytest
from scipy import stats

from ctreserve import (
    AbsorptionRecord,
    CompoundPoissonExpParams,
    CtParams,
    DeterministicBranch,
    GammaJumpLaw,
    RngStream,
    absorption_bounds,
    absorption_scan,
    branch_law,
    sample_branch,
    simulate_lower_triangle,
    simulate_year,
    simulate_year_jumpwise,
)
from ctreserve.calibration import ct_to_discrete
from ctreserve.estimators import conditional_moments

import _oracles as o


def _law(intensity, delta, tau2, n=2, ez=1.0, ratio=3.0):
    return CtParams(
        intensity=[intensity] * n,
        decay=[0.0] + [delta] * (n - 1),
        vol2=[0.0] + [tau2] * (n - 1),
        jump_law=GammaJumpLaw(mean=ez, moment_ratio=ratio),
    )


# --- branch law ---------------------------------------------------------------


def test_branch_mean_identity():
    # mean z e^{-delta h} in every regime, 1e-12 relative
    for z in (0.0, 0.3, 17.0):
        for delta in (-1.5, -0.5, -1e-9, 0.0, 1e-9, 0.5, 1.5):
            for tau2 in (0.0, 0.01, 4.0):
                for h in (0.25, 1.0):
                    law = branch_law(z, 2.0, 2.0 + h, delta, tau2)
                    assert law.mean == pytest.approx(
                        z * math.exp(-delta * h), rel=1e-12, abs=1e-300
                    ), (z, delta, tau2, h)


def test_branch_law_regimes():
    assert isinstance(branch_law(5.0, 0.0, 1.0, 0.3, 0.0), DeterministicBranch)
    assert isinstance(branch_law(5.0, 1.0, 1.0, 0.3, 2.0), DeterministicBranch)  # h = 0
    law = branch_law(5.0, 0.0, 1.0, 0.3, 2.0)
    assert isinstance(law, CompoundPoissonExpParams)
    assert law.rate > 0 and law.exp_rate > 0


def test_branch_law_taylor_crossover_is_continuous():
    # parameters straddling the series threshold give nearly equal laws
    below = branch_law(3.0, 0.0, 1.0, 0.99e-8, 1.0)
    above = branch_law(3.0, 0.0, 1.0, 1.01e-8, 1.0)
    assert below.rate == pytest.approx(above.rate, rel=1e-7)
    assert below.exp_rate == pytest.approx(above.exp_rate, rel=1e-7)


def test_branch_law_zero_delta_closed_form():
    z, tau2, h = 3.0, 0.8, 1.0
    law = branch_law(z, 0.0, h, 0.0, tau2)
    assert law.rate == pytest.approx(2 * z / (tau2 * h), rel=1e-12)
    assert law.exp_rate == pytest.approx(2 / (tau2 * h), rel=1e-12)


def test_branch_law_zero_prob():
    law = branch_law(2.0, 0.0, 1.0, 0.4, 1.5)
    assert law.zero_prob == pytest.approx(math.exp(-law.rate), rel=1e-12)
    assert branch_law(0.0, 0.0, 1.0, 0.4, 1.5).zero_prob == 1.0
    assert DeterministicBranch(0.0).zero_prob == 1.0
    assert DeterministicBranch(2.0).zero_prob == 0.0


def test_branch_law_input_validation():
    with pytest.raises(ValueError, match="horizon"):
        branch_law(1.0, 2.0, 1.0, 0.0, 1.0)
    with pytest.raises(ValueError, match="mass"):
        branch_law(-1.0, 0.0, 1.0, 0.0, 1.0)
    with pytest.raises(ValueError, match="tau2"):
        branch_law(1.0, 0.0, 1.0, 0.0, -1.0)


def test_sample_branch_empirical_moments():
    z, delta, tau2 = 4.0, -0.3, 1.7
    law = branch_law(z, 0.0, 1.0, delta, tau2)
    gen = RngStream(seed=31).generator(0)
    draws = np.array([sample_branch(law, gen) for _ in range(200_000)])
    n = draws.size
    se = draws.std(ddof=1) / math.sqrt(n)
    assert abs(draws.mean() - z * math.exp(-delta)) < 3.5 * se
    zero_frac = np.mean(draws == 0.0)
    se_zero = math.sqrt(law.zero_prob * (1 - law.zero_prob) / n)
    assert abs(zero_frac - law.zero_prob) < 3.5 * se_zero
    assert sample_branch(DeterministicBranch(2.5), gen) == 2.5


# --- year transitions ---------------------------------------------------------


def test_year_transition_structure():
    params = _law(intensity=2.0, delta=0.4, tau2=1.2, ez=1.0, ratio=3.0)
    gen = RngStream(seed=41).generator(0)
    for _ in range(2000):
        t = simulate_year(5.0, 1, 1.0, params, gen)
        assert t.n_inc >= 0.0
        assert t.d_inc <= 5.0 + 1e-15
        assert t.c_end >= 0.0
        assert abs(t.c_end - (5.0 - t.d_inc + t.n_inc)) < 1e-12
        assert t.jump_count == t.jump_times.size == t.jump_sizes.size
        assert ((t.jump_times > 1.0) & (t.jump_times <= 2.0)).all()
        assert (t.jump_sizes > 0.0).all()


def test_year_input_validation():
    params = _law(1.0, 0.0, 1.0)
    gen = RngStream(seed=1).generator(0)
    with pytest.raises(ValueError, match="year_index"):
        simulate_year(1.0, 5, 1.0, params, gen)
    with pytest.raises(ValueError, match="c_start"):
        simulate_year(-1.0, 1, 1.0, params, gen)
    with pytest.raises(ValueError, match="exposure"):
        simulate_year(1.0, 1, 0.0, params, gen)
    with pytest.raises(ValueError, match="year_index"):
        simulate_year_jumpwise(1.0, 5, 1.0, params, gen)
    with pytest.raises(ValueError, match="c_start"):
        simulate_year_jumpwise(-1.0, 1, 1.0, params, gen)


def test_frozen_dynamics():
    params = _law(intensity=0.0, delta=0.7, tau2=0.0)
    gen = RngStream(seed=2).generator(0)
    t = simulate_year(3.0, 1, 1.0, params, gen)
    assert t.c_end == pytest.approx(3.0 * math.exp(-0.7), rel=1e-14)
    assert t.n_inc == 0.0
    assert simulate_year_jumpwise(3.0, 1, 1.0, params, gen) == pytest.approx(
        3.0 * math.exp(-0.7), rel=1e-14
    )
    # fully frozen: nothing moves at all
    still = _law(intensity=0.0, delta=0.0, tau2=0.0)
    assert simulate_year(3.0, 1, 1.0, still, gen).c_end == 3.0


def test_pure_jump_monotonicity():
    params = _law(intensity=3.0, delta=0.0, tau2=0.0)
    gen = RngStream(seed=3).generator(0)
    for _ in range(500):
        t = simulate_year(2.0, 1, 1.0, params, gen)
        assert t.d_inc == 0.0
        assert t.c_end == pytest.approx(2.0 + t.jump_sizes.sum(), rel=1e-12)
        assert t.c_end >= 2.0


def test_year_moments_match_closed_forms():
    params = _law(intensity=1.5, delta=-0.4, tau2=2.0, ez=1.0, ratio=3.5)
    disc = ct_to_discrete(params)
    c0, e = 6.0, 2.0
    gen = RngStream(seed=51).generator(0)
    reps = 60_000
    n_inc = np.empty(reps)
    d_inc = np.empty(reps)
    for m in range(reps):
        t = simulate_year(c0, 1, e, params, gen)
        n_inc[m] = t.n_inc
        d_inc[m] = t.d_inc
    c_end = c0 - d_inc + n_inc
    checks = [
        (n_inc, disc.new_mean[1] * e, disc.new_var[1] * e),
        (d_inc, disc.dev_mean[1] * c0, disc.dev_var[1] * c0),
        (c_end, (1 - disc.dev_mean[1]) * c0 + disc.new_mean[1] * e,
         disc.new_var[1] * e + disc.dev_var[1] * c0),
    ]
    for draws, mean, var in checks:
        se = draws.std(ddof=1) / math.sqrt(reps)
        assert abs(draws.mean() - mean) < 3.5 * se
        v = draws.var(ddof=1)
        se_v = math.sqrt((np.mean((draws - draws.mean()) ** 4) - v * v) / reps)
        assert abs(v - var) < 3.5 * se_v
    # the two channels are conditionally uncorrelated
    se_cov = math.sqrt(np.var(n_inc * d_inc, ddof=1) / reps)
    assert abs(np.mean(n_inc * d_inc) - n_inc.mean() * d_inc.mean()) < 4 * se_cov


def test_collected_and_jumpwise_paths_agree_in_law():
    # same year-end distribution from the two samplers (branching identity)
    params = _law(intensity=2.0, delta=0.5, tau2=1.0, ez=1.0, ratio=3.0)
    reps = 30_000
    gen_a = RngStream(seed=61).generator(0)
    gen_b = RngStream(seed=61).generator(1)
    a = np.array([simulate_year(4.0, 1, 1.0, params, gen_a).c_end for _ in range(reps)])
    b = np.array(
        [simulate_year_jumpwise(4.0, 1, 1.0, params, gen_b) for _ in range(reps)]
    )
    assert stats.ks_2samp(a, b).pvalue > 0.001


# --- triangle completion ------------------------------------------------------


def test_completion_preserves_observed_cells(data, ct_params):
    gen = RngStream(seed=71).generator(0)
    comp = simulate_lower_triangle(data, ct_params, gen)
    mask = data.cum.mask
    assert np.array_equal(comp.cum[mask], data.cum.values[mask])
    assert np.array_equal(comp.new[mask], data.new.values[mask])
    assert np.array_equal(comp.dec[mask], data.dec.values[mask])
    assert np.isfinite(comp.cum).all()


def test_completion_reserve_identity(data, ct_params):
    gen = RngStream(seed=72).generator(0)
    comp = simulate_lower_triangle(data, ct_params, gen)
    diag = np.array([data.cum[i, data.n + 1 - i] for i in range(1, 8)])
    assert comp.reserve == pytest.approx(float((comp.ultimates - diag).sum()), abs=1e-12)
    assert np.array_equal(comp.ultimates, comp.cum[:, -1])


def test_completion_structural_invariants(data, ct_params):
    for m in range(200):
        gen = RngStream(seed=73, stream_id=m).generator(0)
        comp = simulate_lower_triangle(data, ct_params, gen)
        assert (comp.cum >= 0.0).all()
        assert (comp.new[~data.new.mask] >= 0.0).all()
        assert (comp.dec[:, 1:] <= comp.cum[:, :-1] + 1e-12).all()


def test_completion_mean_reserve_matches_projection(data, ct_params):
    """Simulated reserves center on the projected reserve of the recomposed
    development-year parameters (the simulation's own one-step moments)."""
    from ctreserve.estimators import ultimate_and_reserve

    disc = ct_to_discrete(ct_params)
    _, expected = ultimate_and_reserve(data, disc)
    reps = 4000
    reserves = np.empty(reps)
    for m in range(reps):
        gen = RngStream(seed=74, stream_id=m).generator(0)
        reserves[m] = simulate_lower_triangle(data, ct_params, gen).reserve
    se = reserves.std(ddof=1) / math.sqrt(reps)
    assert abs(reserves.mean() - expected) < 3.5 * se


# --- absorption ---------------------------------------------------------------


def test_absorption_bounds_ordering_and_validation(data, ct_params):
    lower, upper = absorption_bounds(10.0, 4, float(data.exposure[3]), ct_params)
    assert 0.0 <= lower <= upper <= 1.0
    with pytest.raises(ValueError, match="horizon"):
        absorption_bounds(10.0, 4, 1.0, ct_params, horizon=0.0)
    with pytest.raises(ValueError, match="horizon"):
        absorption_bounds(10.0, 4, 1.0, ct_params, horizon=1.5)


def test_absorption_with_nothing_to_absorb(ct_params):
    # an empty opening amount is already at zero
    lower, upper = absorption_bounds(0.0, 4, 1.0, ct_params)
    assert upper == 1.0
    assert lower == pytest.approx(
        math.exp(-ct_params.intensity[4] * 1.0), rel=1e-12
    )


def test_absorption_bounds_bracket_empirical_probability():
    params = _law(intensity=0.5, delta=0.8, tau2=6.0, ez=1.0, ratio=3.0)
    c0 = 0.4  # small opening amount so absorption is common
    lower, upper = absorption_bounds(c0, 1, 1.0, params)
    assert 0.05 < lower < upper < 0.95  # the regime the test is about
    gen = RngStream(seed=81).generator(0)
    reps = 40_000
    opening_zero = 0
    year_zero = 0
    for _ in range(reps):
        t = simulate_year(c0, 1, 1.0, params, gen)
        if t.d_inc == c0:
            opening_zero += 1
        if t.c_end == 0.0:
            year_zero += 1
    se = math.sqrt(upper * (1 - upper) / reps)
    assert abs(opening_zero / reps - upper) < 3.5 * se
    assert lower - 3.5 * se <= year_zero / reps <= upper + 3.5 * se


def test_absorption_scan_reference(data, ct_params):
    records = absorption_scan(data, ct_params)
    assert [r.accident_year for r in records] == [2, 3, 4, 5, 6, 7]
    assert all(r.from_dev_year == data.n + 1 - r.accident_year for r in records)
    assert all(isinstance(r, AbsorptionRecord) for r in records)
    assert all(r.lower <= r.upper for r in records)
    peak = max(records, key=lambda r: r.upper)
    assert peak.accident_year == o.ABSORPTION_MAX_YEAR
    assert peak.upper == pytest.approx(o.ABSORPTION_MAX_UPPER, rel=1e-12)
    # the longest-developed years underflow to an exact zero
    by_year = {r.accident_year: r for r in records}
    assert by_year[2].upper == 0.0 and by_year[3].upper == 0.0
