import numpy as np
import pytest
import scipy.sparse as sp

from modfl.benchmarks.common import attach_pareto, matching_constraints
from modfl.core import MOLPInstance


def make_instance(costs, A=None, b=None, bounds=None, orientation="min", features=None, iid=0):
    costs = np.atleast_2d(np.asarray(costs, dtype=float))
    n = costs.shape[1]
    if A is None:
        A, b = sp.csr_matrix((0, n)), np.zeros(0)
    feats = np.ones((n, 1)) if features is None else features
    return MOLPInstance(id=iid, features=feats, costs=costs, A=A, b=b, bounds=bounds, orientation=orientation)


def matching_instance(costs, nu=2, nv=2, orientation="max", denom=5):
    A, b = matching_constraints(nu, nv)
    inst = make_instance(costs, A, b, orientation=orientation)
    return attach_pareto(inst, denom)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
