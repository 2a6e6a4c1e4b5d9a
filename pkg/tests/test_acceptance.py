"""Acceptance suite: published reference values at stated tolerances.

Each test prints one pass/fail line under ``pytest -v`` and pins one
published anchor of the Schnieper (1991) case study: the data tables,
the regression table, the intensity products, the absorption bound, the
reserve-distribution table, the pathology rates and the closed-form
quantiles, plus the structural property suite and CLI determinism.

The reserve-distribution runs use M = 100 000 replicates at seed 0 and
are shared module-scoped fixtures; expect a few minutes.

Two checks are deliberately red: the published absorption probability
and the published residual-bootstrap root-MSEP are not reproducible
from the published inputs (the assertion messages carry the values this
implementation obtains, which are the internally consistent ones).
"""

import math
import os

import numpy as np
import pytest
from scipy import stats

from ctreserve import (
    BootstrapConfig,
    DiscreteParams,
    GammaJumpLaw,
    RngStream,
    Triangle,
    absorption_scan,
    branch_law,
    build_cumulative,
    ct_bootstrap,
    ct_to_discrete,
    discrete_to_ct,
    moment_matched,
    residual_bootstrap,
    sample_branch,
    simulate_lower_triangle,
    simulate_year,
    simulate_year_jumpwise,
    timeseries_bootstrap,
)
from ctreserve.bootstrap import _ct_simulate_upper, _refit
from ctreserve.calibration import CtParams
from ctreserve.cli import main

import _oracles as o

M_FULL = 100_000

# published reserve-distribution table: (sqrt(MSEP)%, 99.5% excess %)
PUBLISHED = {
    "ct": (43.1650, 136.702),
    "residual": (38.1737, 103.181),
    "timeseries": (37.1173, 114.056),
}
TOL_SQRT = 1.5
TOL_Q995 = 5.0


@pytest.fixture(scope="module")
def ct_dist(data):
    return ct_bootstrap(data, BootstrapConfig(M=M_FULL, seed=0))


@pytest.fixture(scope="module")
def residual_dist(data):
    # the published pathology rates pin the zeroed next-to-last variance
    return residual_bootstrap(
        data, BootstrapConfig(M=M_FULL, seed=0, tail_variance_rule="paper")
    )


@pytest.fixture(scope="module")
def timeseries_dist(data):
    # the parametric gamma law is undefined at a zeroed variance, and the
    # published quantile matches the raw sample value
    return timeseries_bootstrap(
        data, BootstrapConfig(M=M_FULL, seed=0, tail_variance_rule="formula")
    )


def test_01_cumulative_triangle_matches_published_table():
    cum = build_cumulative(Triangle.from_rows(o.NEW_ROWS), Triangle.from_rows(o.DEC_ROWS))
    for i, row in enumerate(o.CUM_ROWS, start=1):
        for j, printed in enumerate(row, start=1):
            assert round(cum[i, j], 1) == printed, f"C[{i},{j}]"


def test_02_moment_ratio_regression_matches_published_table(regression):
    assert regression.ratio == pytest.approx(4.7120, abs=0.0005)
    assert regression.p_value == pytest.approx(0.0235, abs=0.002)
    assert regression.r_squared == pytest.approx(0.6747, abs=0.001)


def test_03_intensity_products_match_published_table(params_formula, regression):
    published = 1e-3 * np.array(
        [0.4502954, 0.9048361, 1.4490241, 1.1235202, 1.1504111, 0.5099654, 0.5071148]
    )
    for ez in (1.0, 2.5):  # identified products do not move with E[Z]
        ct = discrete_to_ct(params_formula, ez, regression.ratio)
        assert np.allclose(ct.intensity * ct.jump_law.mean, published, rtol=1e-6)


def test_04_absorption_probability_matches_published_value(data, ct_params):
    peak = max(absorption_scan(data, ct_params), key=lambda r: r.upper)
    assert peak.accident_year == 4 and peak.from_dev_year == 4
    assert peak.upper == pytest.approx(2.604e-4, rel=0.02), (
        f"closed-form bound at the published cell is {peak.upper:.6e}; the "
        "published 2.604e-4 does not follow from the published inputs, so "
        "this check is deliberately red"
    )


def test_05_one_step_moments_match_closed_forms(data, ct_params):
    disc = ct_to_discrete(ct_params)
    reps = M_FULL
    for i in range(2, data.n + 1):
        s = data.n + 1 - i
        c0 = data.cum[i, s]
        e = float(data.exposure[i - 1])
        gen = RngStream(seed=0, stream_id=i).generator(3)
        n_inc = np.empty(reps)
        d_inc = np.empty(reps)
        for m in range(reps):
            t = simulate_year(c0, s, e, ct_params, gen)
            n_inc[m] = t.n_inc
            d_inc[m] = t.d_inc
        c_end = c0 - d_inc + n_inc
        cases = [
            ("N", n_inc, disc.new_mean[s] * e, disc.new_var[s] * e),
            ("D", d_inc, disc.dev_mean[s] * c0, disc.dev_var[s] * c0),
            (
                "C",
                c_end,
                (1 - disc.dev_mean[s]) * c0 + disc.new_mean[s] * e,
                disc.new_var[s] * e + disc.dev_var[s] * c0,
            ),
        ]
        for label, draws, mean, var in cases:
            # epsilon absorbs float roundoff when a channel is deterministic
            eps = 1e-9 * max(1.0, abs(mean))
            se = draws.std(ddof=1) / math.sqrt(reps)
            assert abs(draws.mean() - mean) <= 3 * se + eps, (i, label, "mean")
            v = draws.var(ddof=1)
            se_v = math.sqrt(max(np.mean((draws - draws.mean()) ** 4) - v * v, 0.0) / reps)
            assert abs(v - var) <= 3 * se_v + eps, (i, label, "variance")


def test_06_collected_and_jumpwise_samplers_agree_in_law():
    reps = M_FULL
    combo_id = 0
    for delta in (-0.5, 0.0, 0.5):
        for tau2 in (0.1, 5.0):
            for lam in (0.5, 5.0):
                combo_id += 1
                params = CtParams(
                    intensity=[lam, lam],
                    decay=[0.0, delta],
                    vol2=[0.0, tau2],
                    jump_law=GammaJumpLaw(mean=1.0, moment_ratio=3.0),
                )
                gen_a = RngStream(seed=600, stream_id=combo_id).generator(0)
                gen_b = RngStream(seed=600, stream_id=combo_id).generator(1)
                a = np.array(
                    [simulate_year(4.0, 1, 1.0, params, gen_a).c_end for _ in range(reps)]
                )
                b = np.array(
                    [simulate_year_jumpwise(4.0, 1, 1.0, params, gen_b) for _ in range(reps)]
                )
                p = stats.ks_2samp(a, b).pvalue
                assert p >= 0.001, (delta, tau2, lam, p)


@pytest.mark.parametrize(
    "method,stat",
    [(m, s) for m in ("ct", "residual", "timeseries") for s in ("sqrt", "q995")],
    ids=[f"{m}-{s}" for m in ("ct", "residual", "timeseries") for s in ("sqrt", "q995")],
)
def test_07_reserve_distribution_matches_published_table(
    method, stat, ct_dist, residual_dist, timeseries_dist
):
    dist = {"ct": ct_dist, "residual": residual_dist, "timeseries": timeseries_dist}[method]
    value = dist.msep_root_pct if stat == "sqrt" else dist.q995_excess_pct
    target = PUBLISHED[method][0 if stat == "sqrt" else 1]
    tol = TOL_SQRT if stat == "sqrt" else TOL_Q995
    assert abs(value - target) <= tol, (
        f"{method} {stat}: measured {value:.4f}%, published {target}% +/- {tol}; "
        "for the residual root-MSEP no residual-pool convention reproduces the "
        "published value while keeping the published pathology rate, so that "
        "line is deliberately red"
    )


@pytest.mark.parametrize(
    "case",
    ["residual-negative-new", "residual-dec-exceeds", "timeseries-dec-exceeds", "ct-structural"],
)
def test_08_pathology_rates_match_published_text(
    case, ct_dist, residual_dist, timeseries_dist
):
    if case == "residual-negative-new":
        rate = residual_dist.diagnostics.negative_new / M_FULL
        assert abs(rate - 0.66) <= 0.03, f"measured {rate:.4f}"
    elif case == "residual-dec-exceeds":
        rate = residual_dist.diagnostics.dec_exceeds_cum / M_FULL
        assert rate <= 0.005, f"measured {rate:.4f}, published as never occurring"
    elif case == "timeseries-dec-exceeds":
        rate = timeseries_dist.diagnostics.dec_exceeds_cum / M_FULL
        assert abs(rate - 0.06) <= 0.02, f"measured {rate:.4f}"
    else:
        assert ct_dist.diagnostics.negative_new == 0
        assert ct_dist.diagnostics.dec_exceeds_cum == 0


def test_09_matched_closed_forms_reproduce_published_quantiles():
    mu = o.RESERVE
    msep = (0.429175 * mu) ** 2  # the published root-MSEP ratio
    lognormal = moment_matched(mu, msep)
    assert lognormal.q995_excess_pct == pytest.approx(165.003, abs=0.01)
    gamma = moment_matched(mu, msep, family="gamma")
    assert gamma.q995_excess_pct == pytest.approx(144.387, abs=1.0)


def test_10_cli_runs_are_byte_identical(tmp_path):
    paths = []
    for name in ("a", "b"):
        out = str(tmp_path / name)
        assert main(["--method", "ct", "--M", "2000", "--seed", "0", "--out", out]) == 0
        paths.append(os.path.join(out, "reserves_ct.csv"))
    with open(paths[0], "rb") as fa, open(paths[1], "rb") as fb:
        assert fa.read() == fb.read()


def test_11_property_suite(data, ct_params):
    # moment-map round trip across the decay grid, including zero
    for delta in (-2.0, -1.0, -1e-10, 0.0, 1e-10, 1.0, 2.0):
        dev = -math.expm1(-delta)
        p = DiscreteParams(
            new_mean=[0.9, 1.7],
            new_var=[1.0, 0.0],
            dev_mean=[0.0, dev],
            dev_var=[0.0, 0.8],
        )
        back = ct_to_discrete(discrete_to_ct(p, 1.0, 3.0))
        assert np.allclose(back.new_mean, p.new_mean, rtol=1e-10)
        assert np.allclose(back.dev_mean, p.dev_mean, rtol=1e-10, atol=1e-16)
        assert np.allclose(back.dev_var, p.dev_var, rtol=1e-10)

    # branch mean identity on parameters, then empirically
    for z, delta, tau2, h in [(3.0, -0.7, 1.3, 1.0), (0.5, 0.0, 2.0, 0.5), (8.0, 1.2, 0.3, 1.0)]:
        law = branch_law(z, 0.0, h, delta, tau2)
        assert law.mean == pytest.approx(z * math.exp(-delta * h), rel=1e-12)
    law = branch_law(4.0, 0.0, 1.0, 0.6, 1.5)
    gen = RngStream(seed=1106).generator(0)
    draws = np.array([sample_branch(law, gen) for _ in range(30_000)])
    se = draws.std(ddof=1) / math.sqrt(draws.size)
    assert abs(draws.mean() - law.mean) <= 3 * se

    # estimator unbiasedness smoke test on exact resimulations
    truth = ct_to_discrete(ct_params)
    reps = 300
    new_means = np.empty((reps, data.n))
    dev_means = np.empty((reps, data.n))
    for m in range(reps):
        gen = RngStream(seed=1108, stream_id=m).generator(0)
        sim_new, sim_dec = _ct_simulate_upper(data, ct_params, gen)
        fit = _refit(sim_new, sim_dec, data, "formula")
        new_means[m] = fit.new_mean
        dev_means[m] = fit.dev_mean
    for est, true in ((new_means, truth.new_mean), (dev_means, truth.dev_mean)):
        avg = est.mean(axis=0)
        se = est.std(axis=0, ddof=1) / math.sqrt(reps)
        assert (np.abs(avg - true) <= 3 * np.maximum(se, 1e-15)).all()

    # structural non-negativity of completed triangles
    for m in range(100):
        gen = RngStream(seed=1107, stream_id=m).generator(0)
        comp = simulate_lower_triangle(data, ct_params, gen)
        assert (comp.cum >= 0.0).all()
        assert (comp.new[~data.new.mask] >= 0.0).all()
        assert (comp.dec[:, 1:] <= comp.cum[:, :-1]).all()
