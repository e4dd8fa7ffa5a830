"""Closed-form linear and weakly nonlinear analysis of the continuum limit.

Everything here is a pure function of ``(p, kappa, K, ell)``.  The linearised
operator about the synchronised state has eigenfunctions ``cos/sin 2 pi l x``
with eigenvalue ``lambda_l = 4 K kappa - p - 2 K delta_l`` where
``delta_l = sin(2 pi l kappa) / (pi l)``.  Near the smallest critical coupling
the pattern amplitude obeys ``dr/dt = mu r - beta r^3``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

DEFAULT_ELL_MAX = 64
TIE_TOL = 1e-12


@dataclass(frozen=True)
class SpectralParams:
    p: float
    kappa: float
    K: float

    def __post_init__(self):
        if self.p <= 0:
            raise ValueError("p must be positive")
        if not 0.0 < self.kappa < 0.5:
            raise ValueError("kappa must lie in (0, 1/2)")


@dataclass
class BifurcationPrediction:
    ell: int
    K_crit: float
    mu: float
    beta: float
    r_pred: float
    is_minimal: bool
    beta_transverse: dict = field(default_factory=dict)

    def as_row(self, params: SpectralParams) -> dict:
        return {"kappa": params.kappa, "p": params.p, "K": params.K, "ell": self.ell,
                "K_crit": self.K_crit, "mu": self.mu, "beta": self.beta,
                "r_pred": self.r_pred}


def delta(j, kappa):
    j = np.asarray(j)
    if np.any(j < 1):
        raise ValueError("mode index must be >= 1")
    out = np.sin(2.0 * np.pi * j * kappa) / (np.pi * j)
    return float(out) if out.ndim == 0 else out


def eigenvalue(ell, params: SpectralParams):
    return 4.0 * params.K * params.kappa - params.p - 2.0 * params.K * delta(ell, params.kappa)


def critical_coupling(ell, kappa, p=1.0):
    """Coupling ``K_l = pi l p / (2 (2 pi l kappa - sin 2 pi l kappa))``."""
    ell = np.asarray(ell)
    if np.any(ell < 1):
        raise ValueError("mode index must be >= 1")
    z = 2.0 * np.pi * ell * kappa
    out = np.pi * ell * p / (2.0 * (z - np.sin(z)))
    return float(out) if out.ndim == 0 else out


def min_critical(kappa, p=1.0, ell_max=None):
    """Return ``(ell*, K_ell*, unique)`` minimising ``K_j`` over ``1 <= j <= ell_max``.

    With ``ell_max=None`` the scan starts at 64 and doubles until no mode
    beyond it can undercut the minimum found; the tail bound is
    ``K_j >= p / (4 kappa (1 + 1/(2 pi j kappa)))``.  Ties within 1e-12 are
    reported as ``unique=False`` and the smallest tied index is returned.
    """
    if ell_max is None:
        ell_max = DEFAULT_ELL_MAX
        while not _tail_certified(kappa, p, ell_max):
            ell_max *= 2
    elif ell_max < 2:
        raise ValueError("ell_max must be at least 2")
    js = np.arange(1, ell_max + 1)
    kj = critical_coupling(js, kappa, p)
    k_min = float(kj.min())
    near = np.flatnonzero(kj <= k_min + TIE_TOL * max(1.0, abs(k_min)))
    return int(js[near[0]]), k_min, near.size == 1


def _tail_certified(kappa, p, ell_max):
    js = np.arange(1, ell_max + 1)
    k_min = critical_coupling(js, kappa, p).min()
    z = 2.0 * np.pi * (ell_max + 1) * kappa
    return p / (4.0 * kappa * (1.0 + 1.0 / z)) > k_min


@lru_cache(maxsize=1)
def zeta0_phi0():
    """First local minimum ``zeta0`` of ``sin(z)/z`` and ``phi0 = -sin(zeta0)/zeta0``.

    ``zeta0`` is the root of ``tan z = z`` in ``(pi, 3 pi/2)``, found as a root
    of ``sin z - z cos z`` (no pole in the bracket).
    """
    z0 = brentq(lambda z: math.sin(z) - z * math.cos(z), math.pi, 1.5 * math.pi,
                xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return z0, -math.sin(z0) / z0


def mu(K, kappa, ell, p=1.0):
    return 2.0 * (2.0 * kappa - delta(ell, kappa)) * (K - critical_coupling(ell, kappa, p))


def beta_coeff(kappa, ell, p=1.0):
    k_l = critical_coupling(ell, kappa, p)
    return 13.0 / 8.0 * p - k_l * (kappa - delta(2 * ell, kappa))


def beta_transverse(j, kappa, ell, p=1.0, check=True):
    """Decay rate of mode ``j != ell`` at ``K = K_ell``.

    Both closed forms are evaluated; with ``check`` they must agree to 1e-12.
    """
    if j == ell:
        raise ValueError("transverse rate undefined for j == ell")
    k_l = critical_coupling(ell, kappa, p)
    direct = p - 2.0 * k_l * (2.0 * kappa - delta(j, kappa))
    via_delta = 2.0 * k_l * (delta(j, kappa) - delta(ell, kappa))
    if check and abs(direct - via_delta) > 1e-12 * max(1.0, abs(direct)):
        raise ArithmeticError(f"transverse rate forms disagree: {direct} vs {via_delta}")
    return via_delta


def predict(params: SpectralParams, ell=None, ell_max=None, transverse_max=DEFAULT_ELL_MAX):
    """Leading-order pattern prediction at coupling ``params.K``.

    ``ell`` defaults to the mode with the smallest critical coupling.
    """
    star, _, unique = min_critical(params.kappa, params.p, ell_max)
    if ell is None:
        ell = star
    k_l = critical_coupling(ell, params.kappa, params.p)
    m = mu(params.K, params.kappa, ell, params.p)
    b = beta_coeff(params.kappa, ell, params.p)
    r = math.sqrt(m / b) if m > 0 and b > 0 else 0.0
    bt = {j: beta_transverse(j, params.kappa, ell, params.p)
          for j in range(1, transverse_max + 1) if j != ell}
    return BifurcationPrediction(ell=ell, K_crit=k_l, mu=m, beta=b, r_pred=r,
                                 is_minimal=(ell == star and unique), beta_transverse=bt)


def kernel_mode_integral(ell, kappa, x, quadrature_m, kind="sin"):
    """Midpoint-rule value of ``int_0^1 W2(x, y) f(2 pi l y) dy`` with f = sin or cos."""
    if quadrature_m < 4.0 / kappa:
        raise ValueError("quadrature grid too coarse for kappa")
    y = (np.arange(quadrature_m) + 0.5) / quadrature_m
    f = np.sin if kind == "sin" else np.cos
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = np.abs(x[:, None] - y[None, :])
    w = (d <= kappa) | (d >= 1.0 - kappa)
    out = (w * f(2.0 * np.pi * ell * y)[None, :]).mean(axis=1)
    return float(out[0]) if out.size == 1 else out


def linear_operator_matrix(m, params: SpectralParams) -> np.ndarray:
    """Midpoint discretisation of ``phi -> int (p - 2K W2(x,y)) (phi(y) - phi(x)) dy``."""
    y = (np.arange(m) + 0.5) / m
    d = np.abs(y[:, None] - y[None, :])
    w = ((d <= params.kappa) | (d >= 1.0 - params.kappa)).astype(float)
    kern = (params.p - 2.0 * params.K * w) / m
    return kern - np.diag(kern.sum(axis=1))
