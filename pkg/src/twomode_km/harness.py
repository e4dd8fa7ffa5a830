"""Experiment configuration, presets and runners that write CSV outputs.

One :class:`ExperimentConfig` describes a single network simulation; it maps
to and from a JSON document.  A single integer seed feeds two independent
Philox streams (graph sampling and initial phases) spawned from one
``SeedSequence``.
"""

from __future__ import annotations

import copy
import csv
import datetime as _dt
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .dynamics import (
    NARROW,
    WIDE,
    IntegrationError,
    IntegratorConfig,
    KmParams,
    PhaseState,
    Trajectory,
    TwoModeKM,
    distance_to_sync,
    grid,
    initial_condition,
    integrate,
)
from .fitting import DEFAULT_ELL_MAX, SinusoidFit, fit_sinusoid, select_mode
from .graphs import (
    DETERMINISTIC,
    NEAREST_NEIGHBOR,
    RANDOM_DENSE,
    RANDOM_SPARSE,
    UNIFORM,
    Graphon,
    WeightedGraph,
    sample,
    write_graph_csv,
)
from .spectral import (
    BifurcationPrediction,
    SpectralParams,
    critical_coupling,
    min_critical,
    predict,
)

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# configuration


@dataclass
class Graph1Config:
    kind: str = UNIFORM
    p: float = 1.0
    sampling: str = DETERMINISTIC
    gamma: Optional[float] = None


@dataclass
class Graph2Config:
    kind: str = NEAREST_NEIGHBOR
    kappa: float = 1.0 / 3.0
    sampling: str = DETERMINISTIC


@dataclass
class ICConfig:
    mode: str = NARROW
    seed: int = 0


@dataclass
class FitConfig:
    ell_max: int = DEFAULT_ELL_MAX


@dataclass
class OutputConfig:
    dir: str = "out"
    node_stride: int = 50
    node_offset: int = 25


@dataclass
class ExperimentConfig:
    n: int = 500
    K: float = 0.65
    omega: float = 0.0
    graph1: Graph1Config = field(default_factory=Graph1Config)
    graph2: Graph2Config = field(default_factory=Graph2Config)
    ic: ICConfig = field(default_factory=ICConfig)
    integrator: IntegratorConfig = field(default_factory=lambda: IntegratorConfig(t_end=5000.0, sample_every=10.0))
    fit: FitConfig = field(default_factory=FitConfig)
    outputs: OutputConfig = field(default_factory=OutputConfig)
    name: str = "experiment"

    def __post_init__(self):
        self.validate()

    def validate(self):
        g1, g2 = self.graph1, self.graph2
        if g1.kind != UNIFORM:
            raise ValueError("graph1 must be a uniform graphon")
        if g2.kind != NEAREST_NEIGHBOR:
            raise ValueError("graph2 must be a nearest-neighbour graphon")
        if g2.sampling != DETERMINISTIC:
            raise ValueError("graph2 must be sampled deterministically")
        if g1.sampling not in (DETERMINISTIC, RANDOM_DENSE, RANDOM_SPARSE):
            raise ValueError(f"unknown graph1 sampling {g1.sampling!r}")
        if g1.sampling == RANDOM_SPARSE and (g1.gamma is None or not 0 < g1.gamma < 0.5):
            raise ValueError("random_sparse graph1 needs gamma in (0, 1/2)")
        if self.ic.mode not in (WIDE, NARROW):
            raise ValueError(f"unknown initial condition mode {self.ic.mode!r}")
        if self.fit.ell_max < 1:
            raise ValueError("fit.ell_max must be positive")
        self.km_params()  # checks n, p, kappa

    def km_params(self) -> KmParams:
        return KmParams(K=self.K, p=self.graph1.p, kappa=self.graph2.kappa, n=self.n,
                        omega=self.omega)

    def spectral_params(self) -> SpectralParams:
        return SpectralParams(p=self.graph1.p, kappa=self.graph2.kappa, K=self.K)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = copy.deepcopy(d)
        parts = {"graph1": Graph1Config, "graph2": Graph2Config, "ic": ICConfig,
                 "integrator": IntegratorConfig, "fit": FitConfig, "outputs": OutputConfig}
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for key, typ in parts.items():
            if key in d:
                sub = d[key]
                bad = set(sub) - {f.name for f in fields(typ)}
                if bad:
                    raise ValueError(f"unknown keys in {key}: {sorted(bad)}")
                d[key] = typ(**sub)
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_json(Path(path).read_text())

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    def with_(self, **changes) -> "ExperimentConfig":
        """Copy with top-level fields replaced; ``seed`` sets ``ic.seed``."""
        d = self.to_dict()
        seed = changes.pop("seed", None)
        d.update(changes)
        if seed is not None:
            d["ic"]["seed"] = int(seed)
        return ExperimentConfig.from_dict(d)


def _preset(name, *, K, kappa, p=1.0, sampling=DETERMINISTIC, gamma=None, n=500,
            t_end=5000.0, mode=NARROW):
    return ExperimentConfig(
        name=name, n=n, K=K,
        graph1=Graph1Config(p=p, sampling=sampling, gamma=gamma),
        graph2=Graph2Config(kappa=kappa),
        ic=ICConfig(mode=mode, seed=0),
        integrator=IntegratorConfig(t_end=t_end, sample_every=10.0),
    )


def _build_presets() -> dict:
    # wide initial phases where synchrony is predicted stable (K < K_ell), narrow otherwise
    k3, k8 = 1.0 / 3.0, 1.0 / 8.0
    dense = dict(p=0.5, sampling=RANDOM_DENSE)
    sparse = dict(p=1.0, sampling=RANDOM_SPARSE, gamma=0.3)
    ps = {
        # case (i): complete simple first graph
        "fig5b1a": _preset("fig5b1a", K=0.65, kappa=k3),
        "fig5b1b": _preset("fig5b1b", K=1.7, kappa=k8, t_end=10000.0),
        "fig5b1c": _preset("fig5b1c", K=0.6, kappa=k3, mode=WIDE),
        # case (ii): random dense, p = 0.5
        "fig5b2a": _preset("fig5b2a", K=0.325, kappa=k3, **dense),
        "fig5b2b": _preset("fig5b2b", K=0.85, kappa=k8, **dense),
        "fig5b2c": _preset("fig5b2c", K=0.3, kappa=k3, mode=WIDE, **dense),
        # case (iii): random sparse, p = 1, gamma = 0.3
        "fig5b3a": _preset("fig5b3a", K=0.65, kappa=k3, **sparse),
        "fig5b3b": _preset("fig5b3b", K=1.7, kappa=k8, **sparse),
        "fig5b3c": _preset("fig5b3c", K=0.54, kappa=k3, mode=WIDE, **sparse),
        # n = 2000 runs
        "fig5d1a": _preset("fig5d1a", K=0.325, kappa=k3, n=2000, t_end=1000.0, **dense),
        "fig5d1b": _preset("fig5d1b", K=0.85, kappa=k8, n=2000, t_end=1000.0, **dense),
        "fig5d2a": _preset("fig5d2a", K=0.65, kappa=k3, n=2000, t_end=1000.0, **sparse),
        "fig5d2b": _preset("fig5d2b", K=1.7, kappa=k8, n=2000, t_end=1000.0, **sparse),
        # bifurcation diagrams (K supplied by the sweep grid)
        "fig5e_a": _preset("fig5e_a", K=0.65, kappa=k3),
        "fig5e_b": _preset("fig5e_b", K=1.7, kappa=k8, t_end=10000.0),
        # weight-matrix pictures
        "fig5a_dense": _preset("fig5a_dense", K=0.325, kappa=k3, **dense),
        "fig5a_sparse": _preset("fig5a_sparse", K=0.65, kappa=k3, **sparse),
    }
    return ps


PRESETS = _build_presets()

PRESET_GROUPS = {
    "table1": ["fig5b1a", "fig5b1b", "fig5b2a", "fig5b2b", "fig5b3a", "fig5b3b"],
    "table2": ["fig5d1a", "fig5d1b", "fig5d2a", "fig5d2b"],
}

SWEEP_GRIDS = {
    "fig5e_a": [round(0.55 + 0.01 * i, 10) for i in range(21)],
    "fig5e_b": [round(1.55 + 0.01 * i, 10) for i in range(31)],
}


def get_preset(name: str) -> ExperimentConfig:
    try:
        return ExperimentConfig.from_dict(PRESETS[name].to_dict())
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {sorted(PRESETS)}") from None


# ---------------------------------------------------------------------------
# running


def seed_streams(seed: int):
    """Independent (graph, initial-condition) generators derived from one seed."""
    ss_graph, ss_ic = np.random.SeedSequence(seed).spawn(2)
    return (np.random.Generator(np.random.Philox(ss_graph)),
            np.random.Generator(np.random.Philox(ss_ic)))


def build_graphs(config: ExperimentConfig):
    rng_graph, _ = seed_streams(config.ic.seed)
    g1c = config.graph1
    g1 = sample(Graphon.uniform(g1c.p), config.n, g1c.sampling, gamma=g1c.gamma, rng=rng_graph)
    g2 = sample(Graphon.nearest_neighbor(config.graph2.kappa), config.n, DETERMINISTIC)
    for g in (g1, g2):
        g.seed = config.ic.seed
    return g1, g2


@dataclass
class SimulationResult:
    config: ExperimentConfig
    trajectory: Trajectory
    fit: SinusoidFit
    prediction: BifurcationPrediction
    distance_to_sync: float
    ic: PhaseState

    @property
    def final(self) -> PhaseState:
        return self.trajectory.final


def simulate(config: ExperimentConfig) -> SimulationResult:
    """Sample graphs, draw the initial phases, integrate, fit and predict (no I/O)."""
    g1, g2 = build_graphs(config)
    _, rng_ic = seed_streams(config.ic.seed)
    u0 = initial_condition(config.ic.mode, config.n, rng_ic)
    traj = integrate(u0, TwoModeKM(g1, g2, config.km_params()), config.integrator)
    final = traj.final.u
    return SimulationResult(
        config=config,
        trajectory=traj,
        fit=select_mode(final, config.fit.ell_max),
        prediction=predict(config.spectral_params()),
        distance_to_sync=distance_to_sync(final),
        ic=u0,
    )


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    return repr(float(x))  # shortest string that round-trips exactly


def write_csv(path, header: Sequence[str], rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o)}")


def sampled_nodes(n: int, stride: int, offset: int) -> np.ndarray:
    """1-based node indices offset, offset+stride, ... up to n."""
    if stride <= 0:
        return np.arange(1, n + 1)
    start = offset if 1 <= offset <= n else 1
    return np.arange(start, n + 1, stride)


def write_trajectory_csv(path, traj: Trajectory, nodes) -> Path:
    nodes = np.asarray(nodes)
    rows = ((t, int(i), u[i - 1]) for t, u in zip(traj.t, traj.u) for i in nodes)
    return write_csv(path, ["t", "node", "phase"], rows)


def write_final_state_csv(path, u) -> Path:
    u = np.asarray(u)
    x = grid(u.size)
    return write_csv(path, ["i", "x", "phase"], ((i + 1, x[i], u[i]) for i in range(u.size)))


def read_final_state_csv(path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    order = np.argsort(data[:, 0])
    return data[order, 2]


FIT_HEADER = ["ell", "r", "psi", "theta", "residual"]
PREDICTION_HEADER = ["kappa", "p", "K", "ell", "K_crit", "mu", "beta", "r_pred"]


def write_fit_csv(path, fit: SinusoidFit, meta: Optional[dict] = None) -> Path:
    write_csv(path, FIT_HEADER, [[getattr(fit, k) for k in FIT_HEADER]])
    if meta is not None:
        write_json(Path(path).with_suffix(".json"), meta)
    return Path(path)


def write_prediction_csv(path, rows) -> Path:
    return write_csv(path, PREDICTION_HEADER, ([r[k] for k in PREDICTION_HEADER] for r in rows))


def _run_metadata(config: ExperimentConfig, **extra) -> dict:
    return {
        "package_version": __version__,
        "config": config.to_dict(),
        "seed": config.ic.seed,
        "rng": "numpy Philox, SeedSequence(seed).spawn(2) -> (graph, initial condition)",
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        **extra,
    }


def run_simulation(config: ExperimentConfig, out_dir=None) -> SimulationResult:
    """Run one experiment and write its CSV outputs to ``out_dir``.

    Files: ``trajectory.csv``, ``final_state.csv``, ``fit.csv`` (+ ``fit.json``),
    ``prediction.csv`` and ``metadata.json``.  On integration failure the
    partial trajectory and the last good state are written before re-raising.
    """
    out = Path(out_dir if out_dir is not None else config.outputs.dir)
    out.mkdir(parents=True, exist_ok=True)
    nodes = sampled_nodes(config.n, config.outputs.node_stride, config.outputs.node_offset)
    try:
        res = simulate(config)
    except IntegrationError as exc:
        if exc.trajectory is not None:
            write_trajectory_csv(out / "trajectory.csv", exc.trajectory, nodes)
        write_final_state_csv(out / "final_state.csv", exc.state.u)
        write_json(out / "metadata.json", _run_metadata(config, status="numerical_failure",
                                                        error=str(exc), t_failed=exc.state.t))
        raise
    traj = res.trajectory
    write_trajectory_csv(out / "trajectory.csv", traj, nodes)
    write_final_state_csv(out / "final_state.csv", res.final.u)
    meta = _run_metadata(
        config, status="ok", t_final=res.final.t, steps=traj.steps, nfev=traj.nfev,
        steady=traj.steady, distance_to_sync=res.distance_to_sync,
    )
    write_fit_csv(out / "fit.csv", res.fit, meta)
    write_prediction_csv(out / "prediction.csv", [res.prediction.as_row(config.spectral_params())])
    write_json(out / "metadata.json", meta)
    log.info("%s: ell=%d r=%.5f (pred %.5f) d_sync=%.3g", config.name, res.fit.ell,
             res.fit.r, res.prediction.r_pred, res.distance_to_sync)
    return res


BIFURCATION_HEADER = ["K", "ell", "r_fit", "psi", "theta", "residual", "r_pred"]


def _sweep_point(args):
    cfg_dict, K, seed = args
    cfg = ExperimentConfig.from_dict(cfg_dict).with_(K=K, seed=seed)
    pred = predict(cfg.spectral_params())
    try:
        res = simulate(cfg)
    except IntegrationError as exc:
        return {"K": K, "error": str(exc), "r_pred": pred.r_pred}
    f = res.fit
    return {"K": K, "ell": f.ell, "r_fit": f.r, "psi": f.psi, "theta": f.theta,
            "residual": f.residual, "r_pred": pred.r_pred,
            "distance_to_sync": res.distance_to_sync}


def run_bifurcation_sweep(config: ExperimentConfig, K_grid, out_dir=None, workers: int = 1,
                          independent_seeds: bool = False) -> list:
    """One simulation per coupling in ``K_grid``; rows are returned sorted by K.

    Failed points carry an ``error`` entry (and NaN fit values in the CSV);
    the sweep continues.  ``workers > 1`` dispatches points to a process pool.
    """
    K_grid = [float(k) for k in K_grid]
    if not K_grid:
        raise ValueError("K_grid is empty")
    base = config.ic.seed
    jobs = [(config.to_dict(), K, base + i if independent_seeds else base)
            for i, K in enumerate(K_grid)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    rows.sort(key=lambda r: r["K"])
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "bifurcation.csv", BIFURCATION_HEADER,
                  ([r.get(k, math.nan) for k in BIFURCATION_HEADER] for r in rows))
        write_json(out / "bifurcation.json", _run_metadata(
            config, K_grid=K_grid, independent_seeds=independent_seeds,
            failures=[{"K": r["K"], "error": r["error"]} for r in rows if "error" in r]))
    return rows


KCRIT_HEADER = ["kappa", "ell", "K_ell", "is_min"]


def run_kcrit_table(kappa_grid, p: float = 1.0, ell_range=range(1, 11), out_dir=None) -> list:
    """Tabulate ``K_ell(kappa)``; ``is_min`` marks the globally minimising mode per kappa."""
    rows = []
    for kappa in kappa_grid:
        kappa = float(kappa)
        if not 0.0 < kappa < 0.5:
            raise ValueError(f"kappa={kappa} outside (0, 1/2)")
        star, _, _ = min_critical(kappa, p)
        for ell in ell_range:
            rows.append({"kappa": kappa, "ell": int(ell),
                         "K_ell": critical_coupling(ell, kappa, p), "is_min": ell == star})
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "kcrit.csv", KCRIT_HEADER, ([r[k] for k in KCRIT_HEADER] for r in rows))
    return rows


def dump_graph_pixels(config: ExperimentConfig, out_dir=None, which: str = "graph1") -> WeightedGraph:
    """Sample the configured graph and write it as ``i,j,w`` triplets plus a JSON sidecar."""
    g1, g2 = build_graphs(config)
    graph = {"graph1": g1, "graph2": g2}[which]
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_graph_csv(graph, out / f"{which}.csv")
    return graph


def fit_final_state(path, ell: Optional[int] = None, ell_max: int = DEFAULT_ELL_MAX) -> SinusoidFit:
    u = read_final_state_csv(path)
    return fit_sinusoid(u, ell) if ell is not None else select_mode(u, ell_max)
