import sys

import numpy as np
import pytest

from twomode_km.dynamics import KmParams
from twomode_km.graphs import (
    Graphon,
    sample_deterministic_dense,
    sample_random_dense,
    sample_random_sparse,
)


def graph_pair(regime, n, kappa=1 / 3, p=1.0, seed=0):
    g2 = sample_deterministic_dense(Graphon.nearest_neighbor(kappa), n)
    if regime == "deterministic":
        g1 = sample_deterministic_dense(Graphon.uniform(p), n)
    elif regime == "random_dense":
        g1 = sample_random_dense(Graphon.uniform(p), n, rng=seed)
    elif regime == "random_sparse":
        g1 = sample_random_sparse(Graphon.uniform(p), n, 0.3, rng=seed)
    elif regime == "both_random":
        g1 = sample_random_dense(Graphon.uniform(p), n, rng=seed)
        g2 = sample_random_sparse(Graphon.nearest_neighbor(kappa), n, 0.2, rng=seed + 1)
    else:
        raise ValueError(regime)
    return g1, g2


REGIMES = ["deterministic", "random_dense", "random_sparse", "both_random"]


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def case_i_small():
    n = 60
    g1, g2 = graph_pair("deterministic", n)
    return g1, g2, KmParams(K=0.65, p=1.0, kappa=1 / 3, n=n)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for key in sorted(results):
            terminalreporter.write_line(results[key])
