"""Parameter sweeps, filter optimization and figure-data reproduction.

Everything here is plumbing around the physics modules: deterministic sweep
tables with provenance, a derivative-free filter optimizer, and named
pipelines that emit the CSV data underlying the reference figures.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
from scipy.optimize import curve_fit, minimize

from . import fock, metrics
from .dynamics import SystemParams, choose_cavity_dim, kpo_steady_state
from .errors import ConfigError, KpoError, OptimizerStall
from .gaussian import (
    po_cavity_covariance,
    po_output_covariance_boxcar,
    covariance_to_fock_populations,
)
from .metrics import MetricsRecord
from .pulses import FilterFunction, TimeGrid, boxcar_filter, gaussian_filter, output_mode_state

SCHEMA_VERSION = "kpo-sweep-v1"
CSV_COLUMNS = (
    ["beta", "kerr", "filter_kind", "filter_param"]
    + ["s", "b2", "b4", "b6", "wln", "purity", "n_mean"]
    + [f"rho{i}" for i in range(10)]
    + ["error"]
)


@dataclass(frozen=True)
class FilterSpec:
    """One filter family in a sweep: kind plus a grid of width parameters.

    The parameter is the boxcar width T or the Gaussian sigma (with the
    center placed at t_on + 5 sigma and the window closing at the center
    plus 5 sigma).
    """

    kind: str
    params: tuple
    t_on: float = 0.0

    def __post_init__(self):
        if self.kind not in ("boxcar", "gaussian"):
            raise ConfigError(f"unknown filter kind {self.kind!r}")
        if not self.params:
            raise ConfigError("filter spec needs at least one width parameter")


@dataclass(frozen=True)
class SweepConfig:
    beta_grid: tuple
    kerr_grid: tuple
    filters: tuple
    steps_per_unit: int = 60
    rtol: float = 1e-6
    atol: float = 1e-9
    cavity_dim: int | None = None
    mode_dim: int = 12
    wigner_points: int = 201

    def __post_init__(self):
        if not self.beta_grid or not self.kerr_grid or not self.filters:
            raise ConfigError("sweep needs nonempty beta, kerr and filter grids")
        if any(k == 0 and b >= 0.5 for k in self.kerr_grid for b in self.beta_grid):
            raise ConfigError(
                "K = 0 with beta >= gamma/2 = 0.5 is beyond the linear instability threshold"
            )

    @staticmethod
    def from_json(path) -> "SweepConfig":
        with open(path) as fh:
            raw = json.load(fh)
        try:
            filters = tuple(
                FilterSpec(f["kind"], tuple(f["params"]), float(f.get("t_on", 0.0)))
                for f in raw["filters"]
            )
            return SweepConfig(
                beta_grid=tuple(raw["beta_grid"]),
                kerr_grid=tuple(raw["kerr_grid"]),
                filters=filters,
                steps_per_unit=int(raw.get("steps_per_unit", 60)),
                rtol=float(raw.get("rtol", 1e-6)),
                atol=float(raw.get("atol", 1e-9)),
                cavity_dim=raw.get("cavity_dim"),
                mode_dim=int(raw.get("mode_dim", 12)),
                wigner_points=int(raw.get("wigner_points", 201)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid sweep config {path}: {exc}") from exc

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["filters"] = [asdict(f) for f in self.filters]
        return d


@dataclass(frozen=True)
class SweepRecord:
    beta: float
    kerr: float
    filter_kind: str
    filter_param: float
    metrics: MetricsRecord | None = None
    error: str | None = None

    def csv_row(self) -> list:
        head = [f"{self.beta:.10g}", f"{self.kerr:.10g}", self.filter_kind,
                f"{self.filter_param:.10g}"]
        if self.metrics is None:
            return head + [""] * 17 + [self.error or "unknown error"]
        m = self.metrics
        body = [m.s, m.b(2), m.b(4), m.b(6), m.wln, m.purity, m.n_mean]
        body += [m.rho(i) for i in range(10)]
        return head + [f"{v:.10g}" for v in body] + [""]


@dataclass(frozen=True)
class ResultTable:
    records: tuple
    provenance: dict

    def write_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(f"# schema={SCHEMA_VERSION}\n")
            prov = " ".join(f"{k}={v}" for k, v in sorted(self.provenance.items()))
            fh.write(f"# {prov}\n")
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for rec in self.records:
                writer.writerow(rec.csv_row())

    def successful(self) -> list:
        return [r for r in self.records if r.metrics is not None]


def _git_hash() -> str:
    try:
        out = subprocess.run(
            ["git", "rev-parse", "HEAD"],
            cwd=Path(__file__).parent,
            capture_output=True,
            text=True,
            timeout=10,
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def _config_hash(config: SweepConfig) -> str:
    blob = json.dumps(config.to_json_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def build_filter(spec: FilterSpec, param: float, steps_per_unit: int) -> FilterFunction:
    """Filter plus integration grid for one sweep point."""
    if spec.kind == "boxcar":
        t1 = spec.t_on + param
        grid = TimeGrid(0.0, t1, max(10, int(np.ceil(t1 * steps_per_unit))))
        return boxcar_filter(param, spec.t_on, grid)
    mu = spec.t_on + 5.0 * param
    t1 = mu + 5.0 * param
    grid = TimeGrid(0.0, t1, max(10, int(np.ceil(t1 * steps_per_unit))))
    return gaussian_filter(mu, param, spec.t_on, grid)


def evaluate_point(
    beta: float,
    kerr: float,
    spec: FilterSpec,
    param: float,
    config: SweepConfig,
) -> SweepRecord:
    """One sweep record; numerical failures are captured, not raised."""
    try:
        params = SystemParams(beta=beta, kerr=kerr)
        dim_c = config.cavity_dim or choose_cavity_dim(params, start=16)
        filt = build_filter(spec, param, config.steps_per_unit)
        rho = output_mode_state(
            params, filt, dim_cavity=dim_c, dim_mode=config.mode_dim,
            rtol=config.rtol, atol=config.atol,
        )
        rec = metrics.metrics_of(rho, wigner_points=config.wigner_points)
        return SweepRecord(beta, kerr, spec.kind, param, metrics=rec)
    except (KpoError, ValueError) as exc:
        return SweepRecord(beta, kerr, spec.kind, param,
                           error=f"{type(exc).__name__}: {exc}")


def _evaluate_star(args) -> SweepRecord:
    return evaluate_point(*args)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("KPO_WORKERS", "1")))
    except ValueError:
        return 1


def run_sweep(config: SweepConfig, workers: int | None = None) -> ResultTable:
    """All parameter tuples of the config, in deterministic order.

    Records are computed by a process pool (size from the workers argument or
    the KPO_WORKERS environment variable) and assembled in task order
    regardless of completion order.
    """
    workers = workers if workers is not None else default_workers()
    started = time.strftime("%Y-%m-%dT%H:%M:%S")
    tasks = [
        (beta, kerr, spec, param, config)
        for kerr in config.kerr_grid
        for beta in config.beta_grid
        for spec in config.filters
        for param in spec.params
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_evaluate_star, tasks))
    else:
        records = [_evaluate_star(t) for t in tasks]
    provenance = {
        "git": _git_hash(),
        "config_sha256": _config_hash(config),
        "started": started,
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    return ResultTable(records=tuple(records), provenance=provenance)


@dataclass(frozen=True)
class OptimizerConfig:
    """Simplex search over the free interior samples of a filter array."""

    n_points: int = 18
    seed: int = 0
    max_iters: int = 400
    restarts: int = 5
    objective: str = "wln"
    window: float = 25.0
    rtol: float = 1e-5
    atol: float = 1e-8
    mode_dim: int = 12

    def __post_init__(self):
        if self.n_points < 8:
            raise ConfigError(f"optimizer needs >= 8 filter points, got {self.n_points}")
        if self.restarts < 1:
            raise ConfigError("optimizer needs >= 1 restart")
        if self.objective != "wln":
            raise ConfigError(f"unsupported objective {self.objective!r}")


def filter_from_control_points(
    values: np.ndarray, window: float, steps_per_unit: int = 20
) -> FilterFunction:
    """Filter whose samples interpolate an n-point control array on [0, window].

    Endpoints of the array are forced to zero and the profile is normalized.
    """
    control = np.asarray(values, dtype=float).copy()
    control[0] = 0.0
    control[-1] = 0.0
    t_control = np.linspace(0.0, window, len(control))
    grid = TimeGrid(0.0, window, max(10, int(np.ceil(window * steps_per_unit))))
    samples = np.interp(grid.times, t_control, control)
    return FilterFunction.normalized(grid, samples, t_on=0.0)


def optimize_filter(
    params: SystemParams,
    opt: OptimizerConfig,
    dim_cavity: int | None = None,
) -> tuple[FilterFunction, float]:
    """Derivative-free maximization of the WLN over the filter array.

    Free variables are the interior control points; endpoint zeroing and unit
    normalization are applied inside the objective, matching a projected
    simplex search.  Each restart starts from a seeded multiplicative
    perturbation of a broad central bump — uniform random noise profiles are
    poor simplex starting points in filter space.  The best of all restarts
    is returned.
    """
    dim_c = dim_cavity or choose_cavity_dim(params, start=16)

    def negative_wln(x: np.ndarray) -> float:
        control = np.concatenate(([0.0], x, [0.0]))
        if np.sqrt(np.sum(control**2)) < 1e-9:
            return 0.0
        filt = filter_from_control_points(control, opt.window)
        rho = output_mode_state(
            params, filt, dim_cavity=dim_c, dim_mode=opt.mode_dim,
            rtol=opt.rtol, atol=opt.atol,
        )
        field = fock.wigner(rho)
        return -metrics.wln(field)

    n_free = opt.n_points - 2
    t_free = np.linspace(0.0, opt.window, opt.n_points)[1:-1]
    bump = np.exp(-((t_free - 0.5 * opt.window) ** 2) / (2 * (opt.window / 8.0) ** 2))
    best_x, best_val, best_initial = None, 0.0, 0.0
    for restart in range(opt.restarts):
        rng = np.random.default_rng(opt.seed + restart)
        x0 = bump * rng.uniform(0.6, 1.4, n_free)
        initial = negative_wln(x0)
        best_initial = min(best_initial, initial)
        sol = minimize(
            negative_wln,
            x0,
            method="Nelder-Mead",
            options={
                "maxiter": opt.max_iters,
                "xatol": 0.01,
                "fatol": 5e-4,
                "adaptive": True,
            },
        )
        if sol.fun < best_val:
            best_x, best_val = sol.x, float(sol.fun)
    if best_x is None or best_val >= best_initial - 1e-6:
        raise OptimizerStall(
            f"no improvement over the initial random filters "
            f"(best {-best_val:.4f} vs initial {-best_initial:.4f})"
        )
    best_filter = filter_from_control_points(
        np.concatenate(([0.0], best_x, [0.0])), opt.window
    )
    return best_filter, -best_val


def fit_gaussian_profile(filt: FilterFunction) -> tuple[float, float, float]:
    """Least-squares Gaussian fit a exp(-(t-mu)²/2σ²); returns (mu, sigma, rms)."""
    t = filt.grid.times
    f = filt.samples
    weight = f**2 / np.trapezoid(f**2, t)
    mu0 = float(np.trapezoid(t * weight, t))
    var0 = max(float(np.trapezoid((t - mu0) ** 2 * weight, t)), 1e-6)

    def model(tt, a, mu, sigma):
        return a * np.exp(-((tt - mu) ** 2) / (2.0 * sigma**2))

    popt, _ = curve_fit(
        model, t, f, p0=[float(np.max(np.abs(f))), mu0, np.sqrt(var0)], maxfev=20000
    )
    a, mu, sigma = popt
    rms = float(np.sqrt(np.mean((model(t, a, mu, sigma) - f) ** 2)))
    return float(mu), float(abs(sigma)), rms


FIGURE_IDS = (
    "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "compare_filters",
)


def reproduce(figure_id: str, outdir, workers: int | None = None) -> list:
    """Emit the CSV data underlying one of the reference figures.

    Returns the list of files written.  compare_filters is the filter
    comparison underlying fig8 (boxcar T=5 vs Gaussian sigma=2.3 WLN curves).
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    dispatch = {
        "fig2": _reproduce_fig2,
        "fig3": _reproduce_fig3,
        "fig4": _reproduce_fig4,
        "fig5": _reproduce_fig5,
        "fig6": _reproduce_fig6,
        "fig7": _reproduce_fig7,
        "fig8": _reproduce_fig8,
        "fig9": _reproduce_fig9,
        "compare_filters": _reproduce_fig8,
    }
    if figure_id not in dispatch:
        raise ConfigError(f"unknown figure id {figure_id!r}; choose from {FIGURE_IDS}")
    return dispatch[figure_id](outdir, workers)


def _write_rows(path: Path, header: list, rows: list) -> Path:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{v:.10g}" if isinstance(v, float) else v for v in row])
    return path


def _reproduce_fig2(outdir: Path, workers) -> list:
    """Output squeezing, det V and populations vs boxcar width (analytic)."""
    t_grid = np.geomspace(0.01, 1000.0, 121)
    files = []
    for beta in (0.2, 0.4):
        cavity_s = metrics.squeezing_from_covariance(po_cavity_covariance(beta))
        rows = []
        for T in t_grid:
            V = po_output_covariance_boxcar(beta, T)
            pops = covariance_to_fock_populations(V, 256)
            rows.append(
                [float(T), metrics.squeezing_from_covariance(V), float(V.det), cavity_s]
                + [float(p) for p in pops[:6]]
            )
        files.append(_write_rows(
            outdir / f"fig2_beta{beta}.csv",
            ["T", "s", "detV", "s_cavity"] + [f"rho{i}" for i in range(6)],
            rows,
        ))
    return files


def _reproduce_fig3(outdir: Path, workers) -> list:
    """First 20 output populations for boxcar T = 4 and 500 (analytic)."""
    files = []
    for beta in (0.2, 0.4):
        for T in (4.0, 500.0):
            pops = covariance_to_fock_populations(po_output_covariance_boxcar(beta, T), 512)
            rows = [[n, float(pops[n])] for n in range(20)]
            files.append(_write_rows(
                outdir / f"fig3_beta{beta}_T{T:g}.csv", ["n", "rho_n"], rows
            ))
    return files


def _sweep_table(outdir: Path, name: str, config: SweepConfig, workers) -> Path:
    table = run_sweep(config, workers=workers)
    path = outdir / name
    table.write_csv(path)
    return path


def _reproduce_fig4(outdir: Path, workers) -> list:
    """Two-photon population vs beta for K = 0.1 at T = 0.1, 0.5, 1.0."""
    config = SweepConfig(
        beta_grid=tuple(np.round(np.arange(0.6, 6.01, 0.2), 10)),
        kerr_grid=(0.1,),
        filters=(FilterSpec("boxcar", (0.1, 0.5, 1.0)),),
    )
    return [_sweep_table(outdir, "fig4.csv", config, workers)]


def _reproduce_fig5(outdir: Path, workers) -> list:
    """Two-photon population vs beta for K = 0.5 at T = 0.5, 2.0, 5.0."""
    config = SweepConfig(
        beta_grid=tuple(np.round(np.arange(0.3, 2.01, 0.05), 10)),
        kerr_grid=(0.5,),
        filters=(FilterSpec("boxcar", (0.5, 2.0, 5.0)),),
    )
    return [_sweep_table(outdir, "fig5.csv", config, workers)]


def _dump_state(path: Path, rho: np.ndarray) -> Path:
    payload = {
        "dim": rho.shape[0],
        "rho": [[[float(z.real), float(z.imag)] for z in row] for row in rho],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)
    return path


def _reproduce_fig6(outdir: Path, workers) -> list:
    """Wigner functions and density matrices: cavity, T=2.5 and T=5 output."""
    params = SystemParams(beta=0.65, kerr=0.5)
    dim_c = choose_cavity_dim(params, start=16)
    files = []
    states = {"cavity": kpo_steady_state(params, dim_c)}
    for T in (2.5, 5.0):
        filt = build_filter(FilterSpec("boxcar", (T,)), T, 60)
        states[f"T{T:g}"] = output_mode_state(params, filt, dim_cavity=dim_c)
    for label, rho in states.items():
        files.append(_dump_state(outdir / f"fig6_state_{label}.json", rho))
        field = fock.wigner(rho)
        xs, ps = field.grid.mesh()
        rows = [
            [float(xs[i, j]), float(ps[i, j]), float(field.values[i, j])]
            for i in range(0, field.grid.n_x, 2)
            for j in range(0, field.grid.n_p, 2)
        ]
        files.append(_write_rows(outdir / f"fig6_wigner_{label}.csv", ["x", "p", "W"], rows))
        rec = metrics.metrics_of(rho)
        with open(outdir / f"fig6_metrics_{label}.json", "w") as fh:
            json.dump(rec.to_json_dict(), fh)
        files.append(outdir / f"fig6_metrics_{label}.json")
    return files


def _fig7_config() -> SweepConfig:
    return SweepConfig(
        beta_grid=tuple(np.round(np.arange(0.1, 1.001, 0.05), 10)),
        kerr_grid=(0.5,),
        filters=(FilterSpec("boxcar", (5.0,)),),
    )


def _reproduce_fig7(outdir: Path, workers) -> list:
    """WLN and B2 vs beta at K = 0.5, boxcar T = 5."""
    return [_sweep_table(outdir, "fig7.csv", _fig7_config(), workers)]


def _reproduce_fig8(outdir: Path, workers) -> list:
    """WLN vs beta: boxcar T = 5 against Gaussian sigma = 2.3."""
    config = SweepConfig(
        beta_grid=tuple(np.round(np.arange(0.1, 1.001, 0.05), 10)),
        kerr_grid=(0.5,),
        filters=(FilterSpec("boxcar", (5.0,)), FilterSpec("gaussian", (2.3,))),
    )
    return [_sweep_table(outdir, "fig8.csv", config, workers)]


def _reproduce_fig9(outdir: Path, workers) -> list:
    """Filter-array optimization at K = 0.5, beta = 0.65 (18 points)."""
    params = SystemParams(beta=0.65, kerr=0.5)
    opt = OptimizerConfig(n_points=18, seed=1, restarts=5)
    filt, wln_value = optimize_filter(params, opt)
    filt.to_csv(outdir / "fig9_filter.csv")
    mu, sigma, rms = fit_gaussian_profile(filt)
    with open(outdir / "fig9_summary.json", "w") as fh:
        json.dump({"wln": wln_value, "mu": mu, "sigma": sigma, "fit_rms": rms}, fh)
    return [outdir / "fig9_filter.csv", outdir / "fig9_summary.json"]
