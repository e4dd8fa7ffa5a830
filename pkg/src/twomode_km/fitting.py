"""Least-squares fit of a steady state to ``r sin(2 pi l x + psi) + theta``.

Nodes are placed at cell midpoints ``x_i = (2i-1)/(2n)``, where the discrete
trigonometric basis is exactly orthogonal.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .dynamics import _phases, grid

DEFAULT_ELL_MAX = 32


@dataclass(frozen=True)
class SinusoidFit:
    ell: int
    r: float
    psi: float
    theta: float
    residual: float

    def __call__(self, x):
        """Fitted profile at abscissae ``x`` (theta taken mod 2 pi)."""
        return self.r * np.sin(2.0 * np.pi * self.ell * np.asarray(x) + self.psi) + self.theta

    def as_row(self) -> dict:
        return asdict(self)


def _wrap_pi(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    w = math.remainder(a, 2.0 * math.pi)
    return math.pi if w == -math.pi else w


def _design(n: int, ell: int) -> np.ndarray:
    arg = 2.0 * np.pi * ell * grid(n)
    return np.column_stack((np.cos(arg), np.sin(arg), np.ones(n)))


def reduce_phases(u) -> np.ndarray:
    """Bring unwrapped phases onto one branch around their circular mean."""
    u = np.asarray(u, dtype=float)
    centre = math.atan2(np.sin(u).mean(), np.cos(u).mean())
    dev = u - centre
    return centre + dev - 2.0 * np.pi * np.round(dev / (2.0 * np.pi))


def fit_sinusoid(state, ell: int) -> SinusoidFit:
    """Linear least squares of the phases on ``{cos 2 pi l x, sin 2 pi l x, 1}``.

    Phases are first reduced mod 2 pi around their circular mean, so states
    whose nodes sit on different branches still fit as one profile.  The
    returned ``psi`` satisfies ``r sin(2 pi l x + psi) = C cos + S sin``.
    """
    u = reduce_phases(_phases(state))
    n = u.size
    if n < 5:
        raise ValueError("need at least 5 nodes to fit")
    if ell < 1 or 2 * ell >= n:
        raise ValueError(f"mode {ell} outside 1 <= ell < n/2 for n={n}")
    a = _design(n, ell)
    coef, _, rank, _ = np.linalg.lstsq(a, u, rcond=None)
    if rank < 3:
        raise np.linalg.LinAlgError("degenerate design matrix")
    c, s, theta = coef
    resid = float(np.sqrt(np.mean((u - a @ coef) ** 2)))
    r = math.hypot(c, s)
    if r <= 1e-13 * max(1.0, float(np.max(np.abs(u)))):
        # round-off level: report the exact constant profile, psi = 0 by convention
        r, psi = 0.0, 0.0
    else:
        psi = math.atan2(c, s)
    return SinusoidFit(ell=ell, r=r, psi=psi, theta=_wrap_pi(theta), residual=resid)


def select_mode(state, ell_max: int = DEFAULT_ELL_MAX) -> SinusoidFit:
    """Best single-mode fit over ``1 <= ell <= ell_max``; ties go to the smaller mode."""
    u = reduce_phases(_phases(state))
    if ell_max < 1:
        raise ValueError("ell_max must be at least 1")
    top = min(ell_max, (u.size - 1) // 2)
    fits = [fit_sinusoid(u, ell) for ell in range(1, top + 1)]
    best = min(f.residual for f in fits)
    slack = 1e-12 * max(1.0, float(np.max(np.abs(u - u.mean()))))
    return next(f for f in fits if f.residual <= best + slack)
