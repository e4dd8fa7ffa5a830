import math
from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from twomode_km.graphs import (
    Graphon,
    cell_average,
    make_rng,
    read_graph_csv,
    sample_deterministic_dense,
    sample_random_dense,
    sample_random_sparse,
    write_graph_csv,
)


def band_rule(n, kappa, i, j):
    """Cell rule evaluated in exact rational arithmetic.

    ``kappa`` is read as the short rational it was written as (1/3, not the
    nearest double), which is what the band half-width is meant to be.
    """
    nk = n * Fraction(kappa).limit_denominator(1000)
    d = abs(i - j)
    return 1.0 if (d <= nk or d >= n - nk) else 0.0


def binomial_band(count, prob, nsigma):
    sigma = math.sqrt(count * prob * (1 - prob))
    return count * prob - nsigma * sigma, count * prob + nsigma * sigma


class TestGraphon:
    def test_uniform_constant(self):
        g = Graphon.uniform(0.3)
        assert np.all(g(np.linspace(0, 1, 7), 0.2) == 0.3)

    def test_nearest_neighbor_values(self):
        g = Graphon.nearest_neighbor(0.25)
        assert g(0.1, 0.3) == 1.0
        assert g(0.1, 0.5) == 0.0
        assert g(0.05, 0.95) == 1.0  # wraparound

    @given(st.floats(0, 1), st.floats(0, 1), st.floats(0.01, 0.49))
    def test_symmetric_and_in_unit_range(self, x, y, kappa):
        g = Graphon.nearest_neighbor(kappa)
        assert g(x, y) == g(y, x)
        assert 0.0 <= g(x, y) <= 1.0

    @pytest.mark.parametrize("kw", [dict(kind="uniform", p=1.5), dict(kind="nearest_neighbor", kappa=0.5),
                                    dict(kind="nearest_neighbor", kappa=0.0), dict(kind="other")])
    def test_rejects_bad_parameters(self, kw):
        with pytest.raises(ValueError):
            Graphon(**kw)


class TestCellAverage:
    def test_uniform(self):
        assert cell_average(Graphon.uniform(0.5), 17, 3, 11) == 0.5

    def test_band_inside(self):
        assert cell_average(Graphon.nearest_neighbor(1 / 3), 6, 1, 2) == 1.0

    def test_band_outside(self):
        assert cell_average(Graphon.nearest_neighbor(1 / 8), 8, 1, 4) == 0.0

    def test_integer_boundary_included(self):
        # n * kappa = 1 exactly: offset 1 and offset n-1 belong to the band
        g = Graphon.nearest_neighbor(1 / 8)
        assert cell_average(g, 8, 1, 2) == 1.0
        assert cell_average(g, 8, 1, 8) == 1.0
        # kappa = 0.3 is not exact in binary; n * kappa = 3 must still include offset 3
        assert cell_average(Graphon.nearest_neighbor(0.3), 10, 1, 4) == 1.0

    @pytest.mark.parametrize("i,j", [(0, 1), (1, 7), (7, 7)])
    def test_index_range(self, i, j):
        with pytest.raises(IndexError):
            cell_average(Graphon.uniform(0.5), 6, i, j)

    @pytest.mark.parametrize("n,kappa", [(6, 1 / 3), (8, 1 / 8), (13, 0.2), (50, 0.37)])
    def test_matches_exact_rule(self, n, kappa):
        g = Graphon.nearest_neighbor(kappa)
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                assert cell_average(g, n, i, j) == band_rule(n, kappa, i, j)


class TestDeterministic:
    def test_complete_graph(self):
        g = sample_deterministic_dense(Graphon.uniform(1.0), 4)
        assert np.array_equal(g.weights, np.ones((4, 4)))
        assert g.alpha == 1.0 and g.symmetric

    def test_constant_half(self):
        g = sample_deterministic_dense(Graphon.uniform(0.5), 500)
        assert np.all(g.weights == 0.5)

    def test_band_n6(self):
        g = sample_deterministic_dense(Graphon.nearest_neighbor(1 / 3), 6)
        expected = np.array([[band_rule(6, 1 / 3, i, j) for j in range(1, 7)] for i in range(1, 7)])
        assert np.array_equal(g.weights, expected)
        # circulant, half-width 2
        assert np.array_equal(g.weights[0], [1, 1, 1, 0, 1, 1])
        for k in range(6):
            assert np.array_equal(np.roll(g.weights[0], k), g.weights[k])

    def test_row_sums_approach_two_kappa(self):
        n, kappa = 1000, 1 / 3
        g = sample_deterministic_dense(Graphon.nearest_neighbor(kappa), n)
        rs = g.weights.sum(axis=1) / n
        assert np.all(np.abs(rs - 2 * kappa) <= 2 / n)

    def test_requires_two_nodes(self):
        with pytest.raises(ValueError):
            sample_deterministic_dense(Graphon.uniform(1.0), 1)


class TestRandomDense:
    def test_probability_one(self):
        g = sample_random_dense(Graphon.uniform(1.0), 30, rng=5)
        assert np.array_equal(g.weights, np.ones((30, 30)))

    def test_probability_zero(self):
        g = sample_random_dense(Graphon.uniform(0.0), 30, rng=5)
        assert not g.weights.any()

    def test_density_concentration(self):
        n = 500
        g = sample_random_dense(Graphon.uniform(0.5), n, rng=11)
        pairs = n * (n + 1) // 2
        lo, hi = binomial_band(pairs, 0.5, 3)
        assert lo <= g.upper_triangle_nonzeros() <= hi
        assert abs(g.density() - 0.5) < 0.01

    def test_symmetric_with_loops_possible(self):
        g = sample_random_dense(Graphon.uniform(0.5), 200, rng=2)
        assert g.is_symmetric()
        assert 0 < np.count_nonzero(np.diag(g.weights)) < 200

    def test_seed_recorded(self):
        assert sample_random_dense(Graphon.uniform(0.5), 10, rng=42).seed == 42

    def test_band_graphon_random(self):
        # probability 0/1 cells reproduce the deterministic band exactly
        gr = sample_random_dense(Graphon.nearest_neighbor(0.2), 40, rng=1)
        gd = sample_deterministic_dense(Graphon.nearest_neighbor(0.2), 40)
        assert np.array_equal(gr.weights, gd.weights)


class TestRandomSparse:
    def test_alpha_and_density(self):
        n, gamma = 500, 0.3
        g = sample_random_sparse(Graphon.uniform(1.0), n, gamma, rng=3)
        alpha = math.exp(-gamma * math.log(n))
        assert g.alpha == pytest.approx(alpha, rel=1e-14)
        assert alpha == pytest.approx(0.1549919, abs=1e-6)
        assert sp.issparse(g.weights)
        pairs = n * (n + 1) // 2
        lo, hi = binomial_band(pairs, alpha, 3)
        assert lo <= g.upper_triangle_nonzeros() <= hi

    def test_small_gamma_limit(self):
        g = sample_random_sparse(Graphon.uniform(1.0), 50, 1e-9, rng=0)
        assert g.alpha == pytest.approx(1.0, abs=1e-8)
        assert g.upper_triangle_nonzeros() == 50 * 51 // 2

    def test_edge_count_over_seeds(self):
        n, gamma, p = 300, 0.3, 1.0
        prob = n ** -gamma * p
        lo, hi = binomial_band(n * (n + 1) // 2, prob, 4)
        for seed in range(20):
            g = sample_random_sparse(Graphon.uniform(p), n, gamma, rng=seed)
            assert lo <= g.upper_triangle_nonzeros() <= hi

    def test_determinism(self):
        a = sample_random_sparse(Graphon.uniform(0.7), 200, 0.25, rng=9)
        b = sample_random_sparse(Graphon.uniform(0.7), 200, 0.25, rng=9)
        assert (a.weights != b.weights).nnz == 0

    @pytest.mark.parametrize("gamma", [0.0, 0.5, -0.1])
    def test_gamma_range(self, gamma):
        with pytest.raises(ValueError):
            sample_random_sparse(Graphon.uniform(1.0), 10, gamma, rng=0)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 60), p=st.floats(0.0, 1.0), seed=st.integers(0, 2**32 - 1),
       sparse=st.booleans())
def test_sampled_graphs_symmetric_and_deterministic(n, p, seed, sparse):
    if sparse:
        make = lambda: sample_random_sparse(Graphon.uniform(p), n, 0.3, rng=seed)
    else:
        make = lambda: sample_random_dense(Graphon.uniform(p), n, rng=seed)
    a, b = make(), make()
    assert a.is_symmetric()
    assert np.array_equal(a.to_dense(), b.to_dense())
    assert set(np.unique(a.to_dense())) <= {0.0, 1.0}


def test_generator_is_counter_based():
    assert isinstance(make_rng(1).bit_generator, np.random.Philox)


@pytest.mark.parametrize("which", ["dense", "sparse", "band"])
def test_csv_dump_roundtrip(tmp_path, which):
    if which == "dense":
        g = sample_random_dense(Graphon.uniform(0.5), 40, rng=1)
    elif which == "sparse":
        g = sample_random_sparse(Graphon.uniform(1.0), 40, 0.3, rng=1)
    else:
        g = sample_deterministic_dense(Graphon.nearest_neighbor(1 / 8), 40)
    path = tmp_path / "g.csv"
    sidecar = write_graph_csv(g, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "i,j,w"
    assert len(lines) - 1 == g.upper_triangle_nonzeros()
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    assert np.all(rows[:, 0] <= rows[:, 1]) and rows[:, 0].min() >= 1
    import json
    meta = json.loads(sidecar.read_text())
    assert set(meta) >= {"kind", "n", "p", "kappa", "gamma", "seed", "alpha"}
    back = read_graph_csv(path)
    assert np.array_equal(back.to_dense(), g.to_dense())
    assert back.alpha == g.alpha and back.sampling == g.sampling
