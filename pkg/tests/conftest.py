import pytest

from qrke_lab.core.chebyshev import t_cos_eval
from qrke_lab.core.diophantine import derive_attack_reals
from qrke_lab.core.precision import make_context
from qrke_lab.utils.experiments import NAMED_EXPERIMENTS, PUBLISHED_X

SEC3 = NAMED_EXPERIMENTS["sec3-diophantine"]
SEC5 = NAMED_EXPERIMENTS["sec5-float-sieve"]


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="运行完整范围的筛法与计时测试")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="需要 --runslow")
    for item in items:
        if "slow" in item.keywords or "bench" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def ctx150():
    return make_context(150)


@pytest.fixture(scope="session")
def ctx40():
    return make_context(40)


@pytest.fixture(scope="session")
def sec3_tr(ctx150):
    return t_cos_eval(SEC3["r"], PUBLISHED_X, ctx150)


@pytest.fixture(scope="session")
def sec3_reals(ctx150, sec3_tr):
    return derive_attack_reals(PUBLISHED_X, sec3_tr, ctx150)


@pytest.fixture(scope="session")
def sec5_tr(ctx40):
    return t_cos_eval(SEC5["r"], PUBLISHED_X, ctx40)


@pytest.fixture(scope="session")
def sec5_reals(ctx40, sec5_tr):
    return derive_attack_reals(PUBLISHED_X, sec5_tr, ctx40)
