"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import fock, metrics
from .dynamics import SystemParams, choose_cavity_dim, kpo_steady_state
from .errors import ConfigError, KpoError
from .harness import (
    FIGURE_IDS,
    FilterSpec,
    OptimizerConfig,
    SweepConfig,
    build_filter,
    default_workers,
    fit_gaussian_profile,
    optimize_filter,
    reproduce,
    run_sweep,
)
from .pulses import FilterFunction, output_mode_state

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _dump_state(path, rho: np.ndarray) -> None:
    payload = {
        "dim": rho.shape[0],
        "rho": [[[float(z.real), float(z.imag)] for z in row] for row in rho],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_state(path) -> np.ndarray:
    with open(path) as fh:
        payload = json.load(fh)
    try:
        rho = np.array(
            [[complex(re, im) for re, im in row] for row in payload["rho"]], dtype=complex
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path} is not a density-matrix dump: {exc}") from exc
    fock.validate_density_matrix(rho, name=str(path))
    return rho


def _cmd_steady(args) -> int:
    params = SystemParams(beta=args.beta, kerr=args.kerr, gamma=args.gamma)
    dim = args.dim or choose_cavity_dim(params)
    rho = kpo_steady_state(params, dim)
    _dump_state(args.out, rho)
    print(f"steady state (dim {dim}) written to {args.out}")
    return EXIT_OK


def _extract_filter(args) -> FilterFunction:
    if args.filter == "boxcar":
        if args.T is None:
            raise ConfigError("--filter boxcar requires --T")
        return build_filter(FilterSpec("boxcar", (args.T,)), args.T, args.steps_per_unit)
    if args.filter == "gaussian":
        if args.mu is None or args.sigma is None:
            raise ConfigError("--filter gaussian requires --mu and --sigma")
        from .pulses import TimeGrid, gaussian_filter

        t1 = args.mu + 5.0 * args.sigma
        grid = TimeGrid(0.0, t1, max(10, int(np.ceil(t1 * args.steps_per_unit))))
        return gaussian_filter(args.mu, args.sigma, 0.0, grid)
    if args.path is None:
        raise ConfigError("--filter file requires --path")
    return FilterFunction.from_csv(args.path)


def _cmd_extract(args) -> int:
    params = SystemParams(beta=args.beta, kerr=args.kerr, gamma=args.gamma)
    filt = _extract_filter(args)
    dim_c = args.dim or choose_cavity_dim(params, start=16)
    rho = output_mode_state(params, filt, dim_cavity=dim_c)
    _dump_state(args.out, rho)
    print(f"extracted mode state written to {args.out}")
    if args.metrics:
        rec = metrics.metrics_of(rho)
        with open(args.metrics, "w") as fh:
            json.dump(rec.to_json_dict(), fh)
        print(f"metrics written to {args.metrics}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config = SweepConfig.from_json(args.config)
    table = run_sweep(config, workers=args.workers)
    table.write_csv(args.out)
    failed = [r for r in table.records if r.metrics is None]
    print(f"{len(table.records)} records ({len(failed)} failed) written to {args.out}")
    return EXIT_OK


def _cmd_optimize_filter(args) -> int:
    params = SystemParams(beta=args.beta, kerr=args.kerr)
    opt = OptimizerConfig(
        n_points=args.points, seed=args.seed, restarts=args.restarts,
        max_iters=args.max_iters, window=args.window,
    )
    filt, wln_value = optimize_filter(params, opt)
    filt.to_csv(args.out)
    mu, sigma, rms = fit_gaussian_profile(filt)
    print(
        f"optimized filter written to {args.out}: WLN={wln_value:.4f}, "
        f"Gaussian fit mu={mu:.2f} sigma={sigma:.2f} rms={rms:.4f}"
    )
    return EXIT_OK


def _cmd_reproduce(args) -> int:
    files = reproduce(args.figure, args.outdir, workers=args.workers)
    for f in files:
        print(f)
    return EXIT_OK


def _cmd_wigner(args) -> int:
    rho = load_state(args.state)
    if args.grid:
        try:
            half_str, n_str = args.grid.split(",")
            grid = fock.QuadratureGrid.square(float(half_str), int(n_str))
        except ValueError as exc:
            raise ConfigError(f"--grid expects L,N (e.g. 6.0,201): {exc}") from exc
    else:
        grid = fock.default_grid(rho)
    field = fock.wigner(rho, grid)
    xs, ps = field.grid.mesh()
    with open(args.out, "w") as fh:
        fh.write("x,p,W\n")
        for i in range(field.grid.n_x):
            for j in range(field.grid.n_p):
                fh.write(f"{xs[i, j]:.10g},{ps[i, j]:.10g},{field.values[i, j]:.10g}\n")
    print(f"Wigner samples written to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kpo",
        description="Steady-state output of a driven Kerr parametric oscillator: "
        "temporal-mode extraction, nonclassicality metrics, sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("steady", help="cavity steady state to JSON")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--kerr", type=float, required=True)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_steady)

    p = sub.add_parser("extract", help="extract a wave-packet output mode")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--kerr", type=float, required=True)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--filter", choices=["boxcar", "gaussian", "file"], required=True)
    p.add_argument("--T", type=float, default=None, help="boxcar width")
    p.add_argument("--mu", type=float, default=None, help="gaussian center")
    p.add_argument("--sigma", type=float, default=None, help="gaussian width")
    p.add_argument("--path", default=None, help="CSV filter file")
    p.add_argument("--dim", type=int, default=None, help="cavity truncation")
    p.add_argument("--steps-per-unit", type=int, default=60)
    p.add_argument("--out", required=True)
    p.add_argument("--metrics", default=None)
    p.set_defaults(fn=_cmd_extract)

    p = sub.add_parser("sweep", help="run a parameter sweep from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=default_workers())
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("optimize-filter", help="maximize WLN over a filter array")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--kerr", type=float, required=True)
    p.add_argument("--points", type=int, default=18)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--max-iters", type=int, default=400)
    p.add_argument("--window", type=float, default=25.0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_optimize_filter)

    p = sub.add_parser("reproduce", help="emit the data behind a reference figure")
    p.add_argument("--figure", choices=list(FIGURE_IDS), required=True)
    p.add_argument("--outdir", required=True)
    p.add_argument("--workers", type=int, default=default_workers())
    p.set_defaults(fn=_cmd_reproduce)

    p = sub.add_parser("wigner", help="Wigner samples of a stored state")
    p.add_argument("--state", required=True)
    p.add_argument("--grid", default=None, help="half-width,points (e.g. 6.0,201)")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_wigner)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (KpoError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
