import pytest

from ctreserve import (
    discrete_to_ct,
    estimate_discrete,
    estimate_moment_ratio,
    schnieper_dataset,
)


@pytest.fixture(scope="session")
def data():
    return schnieper_dataset()


@pytest.fixture(scope="session")
def params_paper(data):
    return estimate_discrete(data, "paper")


@pytest.fixture(scope="session")
def params_formula(data):
    return estimate_discrete(data, "formula")


@pytest.fixture(scope="session")
def regression(params_formula):
    return estimate_moment_ratio(params_formula)


@pytest.fixture(scope="session")
def ct_params(params_formula, regression):
    # ez = 1 is the reference choice throughout
    return discrete_to_ct(params_formula, 1.0, regression.ratio)
