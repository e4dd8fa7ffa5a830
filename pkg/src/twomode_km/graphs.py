"""Graphons and finite weighted graphs sampled from them.

Two graphons are supported: the constant kernel ``W(x, y) = p`` and the
periodic nearest-neighbour band ``W(x, y) = 1`` iff ``|x - y| <= kappa`` or
``|x - y| >= 1 - kappa``.  Graphs are sampled in three regimes:

- deterministic dense: ``w_ij`` is the cell average of the graphon,
- random dense: ``w_ij = 1`` with probability equal to the cell average,
- random sparse: ``w_ij = 1`` with probability ``alpha * min(1/alpha, avg)``,
  ``alpha = n**-gamma``, stored as CSR.

Random graphs are undirected: the upper triangle (diagonal included) is drawn
independently and mirrored.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp

UNIFORM = "uniform"
NEAREST_NEIGHBOR = "nearest_neighbor"

DETERMINISTIC = "deterministic"
RANDOM_DENSE = "random_dense"
RANDOM_SPARSE = "random_sparse"

# absorbs binary representation error in n*kappa (e.g. kappa=0.3, n=10)
_BAND_RTOL = 1e-12


def make_rng(seed: Optional[int]) -> np.random.Generator:
    """Counter-based Philox generator; ``None`` draws fresh OS entropy."""
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True)
class Graphon:
    """Analytic kernel on the unit square.

    Use :meth:`uniform` or :meth:`nearest_neighbor` rather than the raw
    constructor.
    """

    kind: str
    p: Optional[float] = None
    kappa: Optional[float] = None

    def __post_init__(self):
        if self.kind == UNIFORM:
            if self.p is None or not 0.0 <= self.p <= 1.0:
                raise ValueError(f"uniform graphon needs p in [0, 1], got {self.p}")
        elif self.kind == NEAREST_NEIGHBOR:
            if self.kappa is None or not 0.0 < self.kappa < 0.5:
                raise ValueError(f"nearest-neighbour graphon needs kappa in (0, 1/2), got {self.kappa}")
        else:
            raise ValueError(f"unknown graphon kind {self.kind!r}")

    @classmethod
    def uniform(cls, p: float) -> "Graphon":
        return cls(UNIFORM, p=float(p))

    @classmethod
    def nearest_neighbor(cls, kappa: float) -> "Graphon":
        return cls(NEAREST_NEIGHBOR, kappa=float(kappa))

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == UNIFORM:
            return np.full(np.broadcast(x, y).shape, self.p)
        d = np.abs(x - y)
        return ((d <= self.kappa) | (d >= 1.0 - self.kappa)).astype(float)

    def band_halfwidth(self, n: int) -> int:
        """Largest index offset ``b`` with ``b <= n * kappa``."""
        if self.kind != NEAREST_NEIGHBOR:
            raise ValueError("band half-width only defined for the nearest-neighbour graphon")
        nk = n * self.kappa
        return int(math.floor(nk * (1.0 + _BAND_RTOL)))


def _check_index(n: int, i: int) -> None:
    if not 1 <= i <= n:
        raise IndexError(f"index {i} out of range [1, {n}]")


def cell_average(graphon: Graphon, n: int, i: int, j: int) -> float:
    """Average of the graphon over cell ``I_i x I_j`` (1-based indices).

    For the band graphon the finite-n kernel is constant on each cell, so the
    result is 1 when ``|i-j| <= n*kappa`` or ``|i-j| >= n*(1-kappa)`` and 0
    otherwise.
    """
    _check_index(n, i)
    _check_index(n, j)
    if graphon.kind == UNIFORM:
        return graphon.p
    d = abs(i - j)
    b = graphon.band_halfwidth(n)
    return 1.0 if min(d, n - d) <= b else 0.0


def _cell_average_matrix(graphon: Graphon, n: int) -> np.ndarray:
    if graphon.kind == UNIFORM:
        return np.full((n, n), graphon.p)
    return circulant_band(n, graphon.band_halfwidth(n))


def circulant_band(n: int, b: int) -> np.ndarray:
    """0/1 circulant matrix linking nodes at cyclic distance ``<= b``."""
    idx = np.arange(n)
    d = np.abs(idx[:, None] - idx[None, :])
    return (np.minimum(d, n - d) <= b).astype(float)


@dataclass
class WeightedGraph:
    """A sampled n-node weight structure with its scaling factor ``alpha``.

    ``weights`` is an ndarray for dense regimes and a CSR matrix for the
    sparse regime.  ``graphon`` and ``sampling`` let the fast right-hand side
    pick a kernel; ``seed`` is kept for output metadata.
    """

    n: int
    weights: Union[np.ndarray, sp.csr_matrix]
    alpha: float = 1.0
    symmetric: bool = True
    graphon: Optional[Graphon] = None
    sampling: str = DETERMINISTIC
    gamma: Optional[float] = None
    seed: Optional[int] = None
    meta: dict = field(default_factory=dict)

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.weights)

    def to_dense(self) -> np.ndarray:
        if self.is_sparse:
            return self.weights.toarray()
        return np.asarray(self.weights)

    def is_symmetric(self) -> bool:
        """Full scan of ``w_ij == w_ji``."""
        if self.is_sparse:
            return (self.weights != self.weights.T).nnz == 0
        w = np.asarray(self.weights)
        return bool(np.array_equal(w, w.T))

    def upper_triangle_nonzeros(self) -> int:
        """Number of nonzero entries with ``i <= j``."""
        if self.is_sparse:
            return int(sp.triu(self.weights).nnz)
        return int(np.count_nonzero(np.triu(self.weights)))

    def density(self) -> float:
        """Fraction of the ``n(n+1)/2`` unordered pairs that carry an edge."""
        return self.upper_triangle_nonzeros() / (self.n * (self.n + 1) / 2)

    @property
    def is_constant(self) -> bool:
        return (self.sampling == DETERMINISTIC and self.graphon is not None
                and self.graphon.kind == UNIFORM)

    @property
    def is_circulant(self) -> bool:
        return (self.sampling == DETERMINISTIC and self.graphon is not None
                and self.graphon.kind == NEAREST_NEIGHBOR)

    def metadata(self) -> dict:
        g = self.graphon
        return {
            "kind": g.kind if g is not None else None,
            "sampling": self.sampling,
            "n": self.n,
            "p": g.p if g is not None else None,
            "kappa": g.kappa if g is not None else None,
            "gamma": self.gamma,
            "seed": self.seed,
            "alpha": self.alpha,
            **self.meta,
        }


def sample_deterministic_dense(graphon: Graphon, n: int) -> WeightedGraph:
    if n < 2:
        raise ValueError("n must be at least 2")
    w = _cell_average_matrix(graphon, n)
    return WeightedGraph(n=n, weights=w, alpha=1.0, graphon=graphon,
                         sampling=DETERMINISTIC)


def _resolve_rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng, None
    return make_rng(rng), rng


def _upper_bernoulli(prob: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = prob.shape[0]
    iu = np.triu_indices(n)
    draws = rng.random(iu[0].size) < prob[iu]
    a = np.zeros((n, n), dtype=bool)
    a[iu] = draws
    return a | a.T


def sample_random_dense(graphon: Graphon, n: int, rng=None) -> WeightedGraph:
    """Bernoulli graph with edge probabilities given by the cell averages.

    ``rng`` may be a ``numpy.random.Generator`` or an integer seed (recorded
    in the metadata).
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    gen, seed = _resolve_rng(rng)
    prob = _cell_average_matrix(graphon, n)
    a = _upper_bernoulli(prob, gen)
    return WeightedGraph(n=n, weights=a.astype(float), alpha=1.0,
                         graphon=graphon, sampling=RANDOM_DENSE, seed=seed)


def sample_random_sparse(graphon: Graphon, n: int, gamma: float, rng=None) -> WeightedGraph:
    """Sparse Bernoulli graph with ``alpha = n**-gamma``, stored as CSR."""
    if not 0.0 < gamma < 0.5:
        raise ValueError(f"gamma must lie in (0, 1/2), got {gamma}")
    if n < 2:
        raise ValueError("n must be at least 2")
    gen, seed = _resolve_rng(rng)
    alpha = float(n) ** (-gamma)
    prob = alpha * np.minimum(1.0 / alpha, _cell_average_matrix(graphon, n))
    a = _upper_bernoulli(prob, gen)
    w = sp.csr_matrix(a, dtype=float)
    return WeightedGraph(n=n, weights=w, alpha=alpha, graphon=graphon,
                         sampling=RANDOM_SPARSE, gamma=gamma, seed=seed)


def sample(graphon: Graphon, n: int, sampling: str = DETERMINISTIC,
           gamma: Optional[float] = None, rng=None) -> WeightedGraph:
    if sampling == DETERMINISTIC:
        return sample_deterministic_dense(graphon, n)
    if sampling == RANDOM_DENSE:
        return sample_random_dense(graphon, n, rng)
    if sampling == RANDOM_SPARSE:
        if gamma is None:
            raise ValueError("random_sparse sampling requires gamma")
        return sample_random_sparse(graphon, n, gamma, rng)
    raise ValueError(f"unknown sampling regime {sampling!r}")


def write_graph_csv(graph: WeightedGraph, path) -> Path:
    """Write nonzero upper-triangle triplets ``i,j,w`` (1-based) plus a JSON sidecar.

    Returns the sidecar path.
    """
    path = Path(path)
    if graph.is_sparse:
        coo = sp.triu(graph.weights).tocoo()
        order = np.lexsort((coo.col, coo.row))
        rows, cols, vals = coo.row[order], coo.col[order], coo.data[order]
    else:
        rows, cols = np.nonzero(np.triu(graph.weights))
        vals = np.asarray(graph.weights)[rows, cols]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["i", "j", "w"])
        for i, j, w in zip(rows, cols, vals):
            out.writerow([int(i) + 1, int(j) + 1, repr(float(w))])
    sidecar = path.with_suffix(".json")
    sidecar.write_text(json.dumps(graph.metadata(), indent=2, sort_keys=True) + "\n")
    return sidecar


def read_graph_csv(path) -> WeightedGraph:
    """Inverse of :func:`write_graph_csv`."""
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    n = int(meta["n"])
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    w = np.zeros((n, n))
    if data.size:
        i = data[:, 0].astype(int) - 1
        j = data[:, 1].astype(int) - 1
        w[i, j] = data[:, 2]
        w[j, i] = data[:, 2]
    graphon = None
    if meta.get("kind") == UNIFORM:
        graphon = Graphon.uniform(meta["p"])
    elif meta.get("kind") == NEAREST_NEIGHBOR:
        graphon = Graphon.nearest_neighbor(meta["kappa"])
    weights = sp.csr_matrix(w) if meta.get("sampling") == RANDOM_SPARSE else w
    return WeightedGraph(n=n, weights=weights, alpha=float(meta["alpha"]),
                         graphon=graphon, sampling=meta.get("sampling", DETERMINISTIC),
                         gamma=meta.get("gamma"), seed=meta.get("seed"))
