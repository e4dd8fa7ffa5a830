"""Two-mode Kuramoto oscillators on a uniform graph and a nearest-neighbour graph."""

__version__ = "0.1.0"

from .graphs import Graphon, WeightedGraph, make_rng  # noqa: E402
from .dynamics import KmParams, PhaseState, IntegratorConfig, integrate  # noqa: E402
from .spectral import SpectralParams, critical_coupling, min_critical, predict  # noqa: E402
from .fitting import SinusoidFit, fit_sinusoid, select_mode  # noqa: E402

__all__ = [
    "Graphon", "WeightedGraph", "make_rng",
    "KmParams", "PhaseState", "IntegratorConfig", "integrate",
    "SpectralParams", "critical_coupling", "min_critical", "predict",
    "SinusoidFit", "fit_sinusoid", "select_mode",
]
