"""Command-line entry point ``twomode-km``.

Exit codes: 0 success, 1 usage or config error, 2 numerical failure,
3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .dynamics import IntegrationError
from .harness import (
    PRESET_GROUPS,
    PRESETS,
    SWEEP_GRIDS,
    ExperimentConfig,
    dump_graph_pixels,
    fit_final_state,
    get_preset,
    run_bifurcation_sweep,
    run_kcrit_table,
    run_simulation,
    write_fit_csv,
    write_prediction_csv,
)
from .spectral import SpectralParams, predict

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_grid(text: str) -> list:
    """``"a:b:step"`` (inclusive of b) or a comma-separated list."""
    if ":" in text:
        a, b, step = (float(v) for v in text.split(":"))
        if step <= 0:
            raise UsageError("grid step must be positive")
        count = int(np.floor((b - a) / step + 1e-9)) + 1
        return [round(a + i * step, 12) for i in range(count)]
    return [float(v) for v in text.split(",") if v.strip()]


def _load_config(args) -> ExperimentConfig:
    if args.config and args.preset:
        raise UsageError("use either --config or --preset, not both")
    if args.config:
        cfg = ExperimentConfig.load(args.config)
    elif args.preset:
        cfg = get_preset(args.preset)
    else:
        raise UsageError("a --config file or --preset is required")
    if args.seed is not None:
        cfg = cfg.with_(seed=args.seed)
    return cfg


def _out(args, cfg=None) -> Path:
    if args.out:
        return Path(args.out)
    if cfg is not None:
        return Path(cfg.outputs.dir)
    return Path("out")


def cmd_sample_graph(args):
    cfg = _load_config(args)
    g = dump_graph_pixels(cfg, _out(args, cfg), which=args.which)
    print(f"{args.which}: n={g.n} upper-triangle edges={g.upper_triangle_nonzeros()} "
          f"density={g.density():.6f}")


def cmd_simulate(args):
    if args.preset in PRESET_GROUPS:
        if args.config:
            raise UsageError("use either --config or --preset, not both")
        out = _out(args)
        for name in PRESET_GROUPS[args.preset]:
            cfg = get_preset(name)
            if args.seed is not None:
                cfg = cfg.with_(seed=args.seed)
            _report(run_simulation(cfg, out / name))
        return
    cfg = _load_config(args)
    _report(run_simulation(cfg, _out(args, cfg)))


def _report(res):
    f, pr = res.fit, res.prediction
    print(f"{res.config.name}: ell={f.ell} r={f.r:.5f} psi={f.psi:.5f} theta={f.theta:.3e} "
          f"r_pred={pr.r_pred:.5f} d_sync={res.distance_to_sync:.3e} t={res.final.t:g}")


def cmd_sweep(args):
    cfg = _load_config(args)
    if args.K_grid:
        grid = parse_grid(args.K_grid)
    elif args.preset in SWEEP_GRIDS:
        grid = SWEEP_GRIDS[args.preset]
    else:
        raise UsageError("--K-grid is required for this config")
    rows = run_bifurcation_sweep(cfg, grid, _out(args, cfg), workers=args.workers,
                                 independent_seeds=args.independent_seeds)
    failed = [r for r in rows if "error" in r]
    for r in rows:
        if "error" in r:
            print(f"K={r['K']:.6g} FAILED: {r['error']}")
        else:
            print(f"K={r['K']:.6g} ell={r['ell']} r_fit={r['r_fit']:.5f} r_pred={r['r_pred']:.5f}")
    if failed:
        return EXIT_NUMERICAL


def cmd_kcrit(args):
    if args.kappa:
        kappas = parse_grid(args.kappa)
    else:
        kappas = list(np.linspace(args.kappa_min, args.kappa_max, args.kappa_count))
    rows = run_kcrit_table(kappas, p=args.p, ell_range=range(args.ell_min, args.ell_max + 1),
                           out_dir=_out(args))
    print(f"wrote {len(rows)} rows to {_out(args) / 'kcrit.csv'}")


def cmd_predict(args):
    if args.config or args.preset:
        cfg = _load_config(args)
        params = cfg.spectral_params()
    else:
        if args.kappa is None or args.K is None:
            raise UsageError("predict needs --kappa and --K (or a config)")
        params = SpectralParams(p=args.p, kappa=args.kappa, K=args.K)
    pr = predict(params, ell=args.ell)
    row = pr.as_row(params)
    out = _out(args)
    out.mkdir(parents=True, exist_ok=True)
    write_prediction_csv(out / "prediction.csv", [row])
    print(json.dumps({**row, "is_minimal": pr.is_minimal}))


def cmd_fit(args):
    fit = fit_final_state(args.input, ell=args.ell, ell_max=args.ell_max)
    out = _out(args)
    out.mkdir(parents=True, exist_ok=True)
    write_fit_csv(out / "fit.csv", fit, {"input": str(args.input), "ell": args.ell,
                                         "ell_max": args.ell_max, "seed": args.seed})
    print(json.dumps(fit.as_row()))


def build_parser() -> argparse.ArgumentParser:
    def common_flags(default):
        # subcommands must not clobber flags given before the subcommand name
        c = argparse.ArgumentParser(add_help=False)
        c.add_argument("--config", default=default, help="experiment config (JSON)")
        c.add_argument("--preset", default=default,
                       help=f"named preset: {', '.join(sorted(PRESETS) + sorted(PRESET_GROUPS))}")
        c.add_argument("--seed", type=int, default=default, help="override the experiment seed")
        c.add_argument("--out", default=default, help="output directory")
        c.add_argument("-v", "--verbose", action="store_true", default=default or False)
        return c

    common = common_flags(argparse.SUPPRESS)

    parser = _Parser(prog="twomode-km", description="Two-mode Kuramoto simulations, predictions and fits.",
                     parents=[common_flags(None)])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sample-graph", parents=[common], help="dump a sampled weight matrix")
    p.add_argument("--which", choices=["graph1", "graph2"], default="graph1")
    p.set_defaults(func=cmd_sample_graph)

    p = sub.add_parser("simulate", parents=[common], help="run one experiment")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", parents=[common], help="bifurcation diagram over K")
    p.add_argument("--K-grid", dest="K_grid", help="'a:b:step' or comma list")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--independent-seeds", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("kcrit", parents=[common], help="critical couplings K_ell(kappa)")
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--kappa", help="'a:b:step' or comma list")
    p.add_argument("--kappa-min", type=float, default=0.01)
    p.add_argument("--kappa-max", type=float, default=0.49)
    p.add_argument("--kappa-count", type=int, default=97)
    p.add_argument("--ell-min", type=int, default=1)
    p.add_argument("--ell-max", type=int, default=10)
    p.set_defaults(func=cmd_kcrit)

    p = sub.add_parser("predict", parents=[common], help="leading-order bifurcation prediction")
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--kappa", type=float)
    p.add_argument("--K", type=float)
    p.add_argument("--ell", type=int)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("fit", parents=[common], help="fit a final-state CSV")
    p.add_argument("input", help="final_state.csv with header i,x,phase")
    p.add_argument("--ell", type=int)
    p.add_argument("--ell-max", type=int, default=32)
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        code = args.func(args)
    except IntegrationError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (UsageError, ValueError, KeyError, json.JSONDecodeError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return code or EXIT_OK
