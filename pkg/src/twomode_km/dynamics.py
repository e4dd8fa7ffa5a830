"""Two-mode Kuramoto dynamics on a pair of graphs.

The model for phases ``u_1..u_n`` is::

    du_i/dt = omega + 1/(n a1) sum_j w1_ij sin(u_j - u_i)
                    - K/(n a2) sum_j w2_ij sin 2(u_j - u_i)

with ``a1, a2`` the graph scaling factors.  :func:`rhs_naive` evaluates it
literally; :class:`TwoModeKM` is the production kernel.  Trajectories are
integrated with the explicit Dormand-Prince 8(5,3) pair.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.integrate import DOP853

from .graphs import (
    Graphon,
    WeightedGraph,
    make_rng,
    sample_deterministic_dense,
)

log = logging.getLogger(__name__)

WIDE = "wide"
NARROW = "narrow"


@dataclass(frozen=True)
class KmParams:
    K: float
    p: float = 1.0
    kappa: float = 1.0 / 3.0
    n: int = 500
    omega: float = 0.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if not 0.0 < self.kappa < 0.5:
            raise ValueError("kappa must lie in (0, 1/2)")
        if not 0.0 < self.p <= 1.0:
            raise ValueError("p must lie in (0, 1]")


@dataclass
class PhaseState:
    t: float
    u: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        if self.u.ndim != 1:
            raise ValueError("phase vector must be one-dimensional")
        if not np.all(np.isfinite(self.u)):
            raise ValueError("phase vector contains non-finite entries")

    @property
    def n(self) -> int:
        return self.u.size


def _phases(state) -> np.ndarray:
    if isinstance(state, PhaseState):
        return state.u
    return np.asarray(state, dtype=float)


def grid(n: int) -> np.ndarray:
    """Cell midpoints ``(2i-1)/(2n)``, i = 1..n."""
    return (2.0 * np.arange(1, n + 1) - 1.0) / (2.0 * n)


def _check_dims(u, g1, g2, params):
    n = u.size
    if g1.n != n or g2.n != n or params.n != n:
        raise ValueError(
            f"dimension mismatch: state {n}, g1 {g1.n}, g2 {g2.n}, params {params.n}")


def rhs_naive(state, g1: WeightedGraph, g2: WeightedGraph, params: KmParams) -> np.ndarray:
    """Reference right-hand side, summed row by row from phase differences."""
    u = _phases(state)
    _check_dims(u, g1, g2, params)
    n = u.size
    w1 = g1.to_dense()
    w2 = g2.to_dense()
    du = np.empty(n)
    for i in range(n):
        diff = u - u[i]
        first = np.sum(w1[i] * np.sin(diff)) / (n * g1.alpha)
        second = np.sum(w2[i] * np.sin(2.0 * diff)) / (n * g2.alpha)
        du[i] = params.omega + first - params.K * second
    return du


def _band_sum(v: np.ndarray, b: int) -> np.ndarray:
    """Cyclic window sums ``sum_{|k|<=b} v[i+k]`` via prefix sums."""
    n = v.size
    ext = np.concatenate((v[n - b:], v, v[:b])) if b else v
    c = np.concatenate(([0.0], np.cumsum(ext)))
    return c[2 * b + 1:] - c[:n]


class _Coupling:
    """``sum_j w_ij sin(a (u_j - u_i))`` for one graph and harmonic ``a``."""

    def __init__(self, graph: WeightedGraph, harmonic: int):
        self.harmonic = harmonic
        self.scale = 1.0 / (graph.n * graph.alpha)
        if graph.is_constant:
            self.kind = "constant"
            self.level = float(graph.graphon.p)
        elif graph.is_circulant:
            self.kind = "circulant"
            self.b = graph.graphon.band_halfwidth(graph.n)
        elif graph.sampling in ("random_dense", "random_sparse", "deterministic"):
            self.kind = "matrix"
            w = graph.weights
            self.w = w.tocsr() if sp.issparse(w) else np.ascontiguousarray(w)
        else:
            raise ValueError(f"no kernel for graph sampling {graph.sampling!r}")

    def __call__(self, s: np.ndarray, c: np.ndarray) -> np.ndarray:
        # s, c = sin(a u), cos(a u);  sin a(u_j-u_i) = s_j c_i - c_j s_i
        if self.kind == "constant":
            return self.scale * self.level * (c * s.sum() - s * c.sum())
        if self.kind == "circulant":
            return self.scale * (c * _band_sum(s, self.b) - s * _band_sum(c, self.b))
        return self.scale * (c * (self.w @ s) - s * (self.w @ c))


class TwoModeKM:
    """Fast right-hand side ``f(t, u)`` for a fixed graph pair.

    Kernel choice per graph: constant deterministic graphs use the O(n)
    mean-field identity, deterministic band graphs use prefix-sum window
    sums, sampled graphs use a dense or CSR matrix-vector product.
    """

    def __init__(self, g1: WeightedGraph, g2: WeightedGraph, params: KmParams):
        if g1.n != params.n or g2.n != params.n:
            raise ValueError("graph size does not match params.n")
        self.g1, self.g2, self.params = g1, g2, params
        self.first = _Coupling(g1, 1)
        self.second = _Coupling(g2, 2)
        self.nfev = 0

    def __call__(self, t, u):
        self.nfev += 1
        s1, c1 = np.sin(u), np.cos(u)
        # double-angle from the first harmonic avoids two more transcendentals
        s2 = 2.0 * s1 * c1
        c2 = c1 * c1 - s1 * s1
        return self.params.omega + self.first(s1, c1) - self.params.K * self.second(s2, c2)


def rhs_fast(state, g1: WeightedGraph, g2: WeightedGraph, params: KmParams) -> np.ndarray:
    u = _phases(state)
    _check_dims(u, g1, g2, params)
    return TwoModeKM(g1, g2, params)(0.0, u)


def make_rhs(g1, g2, params, kernel: str = "fast") -> Callable:
    if kernel == "fast":
        return TwoModeKM(g1, g2, params)
    if kernel == "naive":
        return lambda t, u: rhs_naive(u, g1, g2, params)
    raise ValueError(f"unknown kernel {kernel!r}")


# --------------------------------------------------------------------------
# integration


@dataclass
class IntegratorConfig:
    t_end: float
    rtol: float = 1e-8
    atol: float = 1e-10
    sample_every: Optional[float] = None
    max_steps: int = 10_000_000
    steady_tol: Optional[float] = 1e-9
    # Near a stable equilibrium the rhs is tiny and the controller would let h
    # grow far past the explicit stability limit (about 6/|lambda|); round-off
    # then gets amplified up to the tolerance level.  Capping h avoids that.
    max_step: float = 2.0

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("tolerances must be positive")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")


@dataclass
class Trajectory:
    t: np.ndarray
    u: np.ndarray
    final: PhaseState
    steps: int
    nfev: int
    steady: bool = False
    info: dict = field(default_factory=dict)


class IntegrationError(RuntimeError):
    """Step size underflow or exhausted step budget; ``state`` is the last good state."""

    def __init__(self, message, state: PhaseState, trajectory: Optional[Trajectory] = None):
        super().__init__(message)
        self.state = state
        self.trajectory = trajectory


def integrate(state0, rhs: Callable, config: IntegratorConfig, t0: float = 0.0) -> Trajectory:
    """Integrate ``du/dt = rhs(t, u)`` from ``state0`` with DOP853.

    Local error is held below ``rtol*|u| + atol`` per component.  Samples are
    taken every ``sample_every`` time units (from the dense output) plus the
    final state.  With ``steady_tol`` set, integration stops early once
    ``max|rhs| < steady_tol``.
    """
    if isinstance(state0, PhaseState):
        t0 = state0.t
    y0 = np.atleast_1d(np.asarray(_phases(state0), dtype=float))
    if not np.all(np.isfinite(y0)):
        raise ValueError("initial state is not finite")
    t_bound = t0 + config.t_end
    solver = DOP853(rhs, t0, y0, t_bound, rtol=config.rtol, atol=config.atol,
                    max_step=config.max_step)

    stride = config.sample_every
    ts, us = [t0], [y0.copy()]
    next_sample = t0 + stride if stride else None
    steps = 0
    steady = False
    while solver.status == "running":
        if steps >= config.max_steps:
            last = PhaseState(solver.t, solver.y.copy())
            raise IntegrationError(f"step budget of {config.max_steps} exhausted at t={solver.t}",
                                   last, _pack(ts, us, last, steps, solver))
        t_prev, y_prev = solver.t, solver.y.copy()
        msg = solver.step()
        if solver.status == "failed":
            last = PhaseState(t_prev, y_prev)
            raise IntegrationError(f"integration failed at t={t_prev}: {msg}",
                                   last, _pack(ts, us, last, steps, solver))
        steps += 1
        if stride:
            if next_sample <= solver.t:
                dense = solver.dense_output()
                while next_sample <= solver.t and next_sample < t_bound:
                    ts.append(next_sample)
                    us.append(dense(next_sample))
                    next_sample += stride
        if config.steady_tol is not None and np.max(np.abs(solver.f)) < config.steady_tol:
            steady = True
            break
    final = PhaseState(solver.t, solver.y.copy())
    if ts[-1] != final.t:
        ts.append(final.t)
        us.append(final.u.copy())
    traj = _pack(ts, us, final, steps, solver)
    traj.steady = steady
    log.debug("integrated to t=%g in %d steps (%d fev)", final.t, steps, solver.nfev)
    return traj


def _pack(ts, us, final, steps, solver) -> Trajectory:
    return Trajectory(t=np.asarray(ts), u=np.asarray(us), final=final, steps=steps,
                      nfev=solver.nfev)


def initial_condition(mode: str, n: int, rng=None) -> PhaseState:
    """Independent uniform phases on [-pi, pi] (wide) or [-1e-3, 1e-3] (narrow)."""
    gen = rng if isinstance(rng, np.random.Generator) else make_rng(rng)
    if mode == WIDE:
        half = np.pi
    elif mode == NARROW:
        half = 1e-3
    else:
        raise ValueError(f"unknown initial condition mode {mode!r}")
    return PhaseState(0.0, gen.uniform(-half, half, size=n))


# --------------------------------------------------------------------------
# distances


def _wrap(x):
    return (np.asarray(x) + np.pi) % (2.0 * np.pi) - np.pi


def _sync_offsets(v: np.ndarray) -> np.ndarray:
    """Rms deviation of each row from its best constant on the circle."""
    theta0 = np.arctan2(np.sin(v).mean(axis=-1), np.cos(v).mean(axis=-1))
    dev = _wrap(v - theta0[..., None])
    dev = dev - dev.mean(axis=-1, keepdims=True)
    return np.sqrt(np.mean(_wrap(dev) ** 2, axis=-1))


def distance_to_sync(state) -> float:
    """Discrete L2 distance from the synchronized family ``{u = theta}``.

    ``theta`` starts at the circular mean and is refined by the mean of the
    wrapped deviations, which is the exact minimiser when the spread is below pi.
    """
    return float(_sync_offsets(_phases(state)))


def distance_to_family(state, reference) -> float:
    """Min over cyclic shifts ``l`` and offsets ``theta`` of ``||u - T^l ref - theta||``."""
    u = _phases(state)
    ref = _phases(reference)
    if u.shape != ref.shape:
        raise ValueError("state and reference differ in length")
    n = u.size
    best = np.inf
    chunk = max(1, 2_000_000 // n)
    for start in range(0, n, chunk):
        shifts = np.arange(start, min(n, start + chunk))
        idx = (np.arange(n)[None, :] + shifts[:, None]) % n
        best = min(best, float(_sync_offsets(u[None, :] - ref[idx]).min()))
    return best


# --------------------------------------------------------------------------
# continuum limit


def continuum_graphs(params: KmParams, m: int):
    """Midpoint-quadrature graphs of the continuum limit on an ``m``-point grid."""
    g1 = sample_deterministic_dense(Graphon.uniform(params.p), m)
    g2 = sample_deterministic_dense(Graphon.nearest_neighbor(params.kappa), m)
    return g1, g2


def cl_simulate(g0, params: KmParams, config: IntegratorConfig, m: Optional[int] = None) -> Trajectory:
    """Integrate the continuum limit from profile ``g0`` on the midpoint grid.

    ``g0`` is either an array of ``m`` samples or a callable evaluated on the
    grid.  The quadrature coincides with the network model on the
    deterministic dense graphs at ``n = m``.
    """
    if callable(g0):
        if m is None:
            m = params.n
        u0 = np.asarray(g0(grid(m)), dtype=float)
    else:
        u0 = np.asarray(g0, dtype=float)
        m = u0.size
    if m < 2.0 / params.kappa:
        raise ValueError(f"grid of {m} points does not resolve kappa={params.kappa}")
    p = KmParams(K=params.K, p=params.p, kappa=params.kappa, n=m, omega=params.omega)
    g1, g2 = continuum_graphs(p, m)
    return integrate(PhaseState(0.0, u0), TwoModeKM(g1, g2, p), config)


def amplitude_ode_solve(mu: float, beta: float, r0: float, t) -> float:
    """Closed-form solution of ``dr/dt = mu r - beta r^3``."""
    if r0 < 0:
        raise ValueError("r0 must be non-negative")
    if beta <= 0:
        raise ValueError("beta must be positive")
    t = np.asarray(t, dtype=float)
    r02 = r0 * r0
    if mu == 0.0:
        r2 = r02 / (1.0 + 2.0 * beta * r02 * t)
    else:
        e = np.exp(2.0 * mu * t)
        r2 = mu * r02 * e / (mu + beta * r02 * (e - 1.0))
        if mu < 0:
            # e underflows cleanly; the formula stays finite
            r2 = np.where(np.isfinite(r2), r2, 0.0)
        else:
            r2 = np.where(np.isfinite(e), r2, mu / beta)
    r = np.sqrt(r2)
    return float(r) if r.ndim == 0 else r
