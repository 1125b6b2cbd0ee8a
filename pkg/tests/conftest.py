import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bilinear_sliding.instances import InstanceSpec, gen_random_quadratic
from bilinear_sliding.problem import ProblemParams

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one representative per regime; kept small so the restarted solver stays fast
REGIME_PARAMS = {
    "scsc": (ProblemParams(10.0, 10.0, 20.0, 1.0, 1.0), 5, 5),
    "sc_c": (ProblemParams(10.0, 10.0, 19.0, 1.0, 0.0, 0.0, 1.0), 5, 4),
    "c_c": (ProblemParams(5.0, 5.0, 19.0, 0.0, 0.0, 1.0, 1.0), 4, 4),
    "kernel": (ProblemParams(10.0, 10.0, 19.0, 0.0, 1.0, 1.0, 0.0), 5, 3),
}


def make_regime(name, seed=0):
    params, dx, dy = REGIME_PARAMS[name]
    return gen_random_quadratic(InstanceSpec("random-quadratic", params, dx, dy, seed=seed, name=name))


@pytest.fixture(params=sorted(REGIME_PARAMS))
def regime_problem(request):
    return make_regime(request.param)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.report_lines():
        terminalreporter.write_line(line)
