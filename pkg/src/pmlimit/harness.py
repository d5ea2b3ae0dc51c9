"""CLI entry point: configs, m-sweeps, refinement studies, report export.

Subcommands: run (single exponent), sweep, refine, check (operator and
identity suite), export-config.  Configs are JSON; see export-config for the
default scenario.  Exit codes: 0 success, 2 config error, 3 numerical
failure.

Determinism contract: identical config + seed produce byte-identical
summary.json and CSV files; wall-clock numbers go to a separate
timings.json so the canonical outputs stay reproducible.  Sweep runs are
independent and may execute in parallel (--threads) without changing any
output byte.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diagnostics, grid, model, potential, stepper
from .errors import ConfigInvalid, IoFailure, SimulationError

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

DEFAULT_CONFIG = {
    "grid": {"n": 2, "L": 4.0, "N": 128},
    "params": {
        "m": [8, 16, 32, 64],
        "growth": {"kind": "smooth_tanh", "max_rate": 4.0, "p_homeo": 1.0},
        "kernel": {"kind": "newtonian"},
        "p_ceiling": 2.0,
        "cfl": 0.4,
    },
    "initial": {
        "kind": "bump",
        "centers": [[0.0, 0.0]],
        "radius": 1.6,
        "amplitude": 0.9,
        "flat": 0.8,
    },
    "T": 0.25,
    "samples": 50,
    "snapshots": 3,
    "seed": 0,
}


@dataclass(frozen=True)
class RunConfig:
    """Validated, picklable run configuration (primitives only)."""

    n: int
    L: float
    N: int
    m_list: tuple
    growth_kind: str
    growth_max_rate: float
    growth_p_homeo: float
    kernel_kind: str
    p_ceiling: float | None
    cfl: float
    initial: dict
    T: float
    samples: int
    snapshots: int
    seed: int

    @staticmethod
    def from_dict(raw: dict) -> "RunConfig":
        errs = []

        def get(path, default=None, required=False):
            node = raw
            for key in path.split("."):
                if not isinstance(node, dict) or key not in node:
                    if required:
                        errs.append(f"{path}: missing")
                    return default
                node = node[key]
            return node

        n = get("grid.n", required=True)
        L = get("grid.L", required=True)
        N = get("grid.N", required=True)
        if n is not None and n not in (1, 2, 3):
            errs.append(f"grid.n: must be 1, 2 or 3, got {n}")
        if N is not None and (not isinstance(N, int) or N < 4):
            errs.append(f"grid.N: must be an integer >= 4, got {N}")
        if L is not None and not (isinstance(L, (int, float)) and L > 0):
            errs.append(f"grid.L: must be positive, got {L}")

        m_list = get("params.m", required=True)
        if m_list is not None:
            if not isinstance(m_list, list) or not m_list:
                errs.append("params.m: must be a nonempty list")
            else:
                if any(not isinstance(v, (int, float)) or v < 2 for v in m_list):
                    errs.append("params.m: every exponent must be a number >= 2")
                if any(b <= a for a, b in zip(m_list, m_list[1:])):
                    errs.append("params.m: must be strictly increasing")

        gkind = get("params.growth.kind", "off")
        if gkind not in ("off", "smooth_tanh"):
            errs.append(f"params.growth.kind: unknown kind {gkind!r}")
        max_rate = get("params.growth.max_rate", 0.0)
        p_homeo = get("params.growth.p_homeo", 1.0)
        if gkind == "smooth_tanh":
            if not (isinstance(max_rate, (int, float)) and max_rate > 0):
                errs.append("params.growth.max_rate: must be positive for smooth_tanh")
            if not (isinstance(p_homeo, (int, float)) and p_homeo > 0):
                errs.append("params.growth.p_homeo: must be positive for smooth_tanh")

        kkind = get("params.kernel.kind", "off")
        if kkind not in ("off", "newtonian"):
            errs.append(
                f"params.kernel.kind: {kkind!r} not available from config "
                "(custom kernels are API-only)"
            )
        if kkind == "newtonian" and n == 1:
            errs.append("params.kernel.kind: newtonian drift needs n in {2,3}")

        p_ceiling = get("params.p_ceiling")
        if p_ceiling is not None:
            if not (isinstance(p_ceiling, (int, float)) and p_ceiling > 1):
                errs.append(f"params.p_ceiling: must exceed 1, got {p_ceiling}")
            else:
                law = GrowthLawFactory(gkind, max_rate, p_homeo)()
                report = model.validate_growth_law(law, float(p_ceiling))
                if not report.passed:
                    errs.append(
                        "params.p_ceiling: growth law fails the ceiling check ("
                        + "; ".join(report.messages)
                        + ")"
                    )

        cfl = get("params.cfl", 0.4)
        if not (isinstance(cfl, (int, float)) and 0 < cfl <= 1):
            errs.append(f"params.cfl: must be in (0, 1], got {cfl}")

        initial = get("initial", required=True) or {}
        ikind = initial.get("kind")
        if ikind == "bump":
            centers = initial.get("centers")
            if not centers or not isinstance(centers, list):
                errs.append("initial.centers: need at least one center")
            elif n in (1, 2, 3) and any(len(c) != n for c in centers):
                errs.append(f"initial.centers: every center needs {n} coordinates")
            amp = initial.get("amplitude", 0.9)
            if not 0 < amp <= 1:
                errs.append(f"initial.amplitude: must be in (0, 1], got {amp}")
            if initial.get("radius", 1.6) <= 0:
                errs.append("initial.radius: must be positive")
            if not 0 <= initial.get("flat", 0.8) < 1:
                errs.append("initial.flat: must be in [0, 1)")
        elif ikind == "barenblatt":
            if initial.get("tau0", 1.0) <= 0:
                errs.append("initial.tau0: must be positive")
            if initial.get("profile_const", 0.2) <= 0:
                errs.append("initial.profile_const: must be positive")
        else:
            errs.append(f"initial.kind: expected 'bump' or 'barenblatt', got {ikind!r}")

        T = get("T", required=True)
        if T is not None and not (isinstance(T, (int, float)) and T >= 0):
            errs.append(f"T: must be nonnegative, got {T}")
        samples = get("samples", 50)
        if not isinstance(samples, int) or samples < 1:
            errs.append(f"samples: must be a positive integer, got {samples}")
        snapshots = get("snapshots", 0)
        if not isinstance(snapshots, int) or snapshots < 0:
            errs.append(f"snapshots: must be a nonnegative integer, got {snapshots}")
        seed = get("seed", 0)
        if not isinstance(seed, int):
            errs.append(f"seed: must be an integer, got {seed}")

        if errs:
            raise ConfigInvalid(errs)
        return RunConfig(
            n=int(n),
            L=float(L),
            N=int(N),
            m_list=tuple(float(v) for v in m_list),
            growth_kind=gkind,
            growth_max_rate=float(max_rate),
            growth_p_homeo=float(p_homeo),
            kernel_kind=kkind,
            p_ceiling=None if p_ceiling is None else float(p_ceiling),
            cfl=float(cfl),
            initial=dict(initial),
            T=float(T),
            samples=int(samples),
            snapshots=int(snapshots),
            seed=int(seed),
        )

    def to_dict(self) -> dict:
        return {
            "grid": {"n": self.n, "L": self.L, "N": self.N},
            "params": {
                "m": list(self.m_list),
                "growth": {
                    "kind": self.growth_kind,
                    "max_rate": self.growth_max_rate,
                    "p_homeo": self.growth_p_homeo,
                },
                "kernel": {"kind": self.kernel_kind},
                "p_ceiling": self.p_ceiling,
                "cfl": self.cfl,
            },
            "initial": dict(self.initial),
            "T": self.T,
            "samples": self.samples,
            "snapshots": self.snapshots,
            "seed": self.seed,
        }

    def grid_spec(self) -> grid.GridSpec:
        return grid.GridSpec(n=self.n, L=self.L, N=self.N)

    def growth_law(self) -> model.GrowthLaw:
        return GrowthLawFactory(
            self.growth_kind, self.growth_max_rate, self.growth_p_homeo
        )()

    def params_for(self, m: float) -> model.ModelParams:
        return model.ModelParams(
            m=m,
            growth=self.growth_law(),
            kernel=potential.DriftKernel(kind=self.kernel_kind),
            grid=self.grid_spec(),
            p_ceiling=self.p_ceiling,
            cfl=self.cfl,
        )

    def initial_field(self, m: float) -> grid.ScalarField:
        spec = self.grid_spec()
        init = self.initial
        if init["kind"] == "bump":
            return model.bump(
                spec,
                centers=init["centers"],
                radius=init.get("radius", 1.6),
                amplitude=init.get("amplitude", 0.9),
                flat=init.get("flat", 0.8),
            )
        return model.barenblatt(
            spec,
            tau=init.get("tau0", 1.0),
            exponent=m + 1.0,
            profile_const=init.get("profile_const", 0.2),
            center=init.get("center"),
        )


class GrowthLawFactory:
    def __init__(self, kind, max_rate, p_homeo):
        self.kind, self.max_rate, self.p_homeo = kind, max_rate, p_homeo

    def __call__(self) -> model.GrowthLaw:
        if self.kind == "off":
            return model.GrowthLaw(kind="off")
        return model.GrowthLaw(
            kind="smooth_tanh", max_rate=self.max_rate, p_homeo=self.p_homeo
        )


# ---------------------------------------------------------------------------
# sweep machinery
# ---------------------------------------------------------------------------


@dataclass
class SingleRun:
    """Everything one m-run contributes to a sweep report."""

    m: float
    records: list
    sample_times: np.ndarray
    grad_frac_stack: np.ndarray  # (samples, n, N, ...) gradients of rho^{m+1}
    grad_p_stack: np.ndarray  # gradients of p = rho^m
    snapshots: list  # (t, rho array, p array)
    sup_p_max: float
    excess_max: float
    boundary_flagged: bool
    mass0: float
    steps: int
    wall_time: float


def _snapshot_indices(samples: int, count: int):
    if count <= 0:
        return []
    count = min(count, samples)
    return sorted(set(int(round(i)) for i in np.linspace(0, samples - 1, count)))


def run_single(config: RunConfig, m: float) -> SingleRun:
    """One labelled run of the scenario at exponent m."""
    spec = config.grid_spec()
    params = config.params_for(m)
    init = config.initial_field(m)
    shape = spec.shape
    n_samples = config.samples if config.T > 0 else 1
    frac_stack = np.zeros((n_samples, spec.n) + shape)
    p_stack = np.zeros((n_samples, spec.n) + shape)
    snap_at = set(_snapshot_indices(n_samples, config.snapshots))
    snapshots = []
    counter = {"i": 0}

    def observer(st, record):
        i = counter["i"]
        counter["i"] += 1
        p = st.p
        frac = st.rho.values * p  # rho^{m+1}
        for axis in range(spec.n):
            frac_stack[i, axis] = grid.gradient_diff(frac, spec.h, axis)
            p_stack[i, axis] = grid.gradient_diff(p, spec.h, axis)
        if i in snap_at:
            snapshots.append((st.t, st.rho.values.copy(), p.copy()))

    result = stepper.run(
        init, params, config.T, observer=observer, samples=n_samples
    )
    return SingleRun(
        m=m,
        records=result.records,
        sample_times=result.sample_times,
        grad_frac_stack=frac_stack,
        grad_p_stack=p_stack,
        snapshots=snapshots,
        sup_p_max=result.sup_p_max,
        excess_max=result.excess_max,
        boundary_flagged=result.boundary_flagged,
        mass0=result.mass0,
        steps=result.steps,
        wall_time=result.wall_time,
    )


def _sweep_worker(config_dict: dict, m: float) -> SingleRun:
    try:  # keep pool workers from oversubscribing cores via torch intra-op threads
        import torch

        torch.set_num_threads(1)
    except ImportError:
        pass
    return run_single(RunConfig.from_dict(config_dict), m)


def _time_integral(times: np.ndarray, values) -> float:
    if len(times) < 2:
        return 0.0
    return float(np.trapezoid(np.asarray(values, dtype=np.float64), times))


def _cauchy_matrix(runs: list, stack_attr: str, cell_volume: float) -> np.ndarray:
    """L2((0,T) x box) distances between gradient trajectories, pairwise."""
    k = len(runs)
    out = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            a = getattr(runs[i], stack_attr)
            b = getattr(runs[j], stack_attr)
            diff = a - b
            axes = tuple(range(1, diff.ndim))
            spatial = (diff**2).sum(axis=axes) * cell_volume
            d = math.sqrt(_time_integral(runs[i].sample_times, spatial))
            out[i, j] = out[j, i] = d
    return out


@dataclass
class SweepReport:
    config: RunConfig
    runs: list  # SingleRun per m, in m order
    residual_avg: list
    residual_ratios: list
    proxies: dict
    uniform: dict
    cauchy_frac: np.ndarray
    cauchy_plain: np.ndarray

    @property
    def m_values(self):
        return [r.m for r in self.runs]


def run_m_sweep(config: RunConfig, threads: int = 1) -> SweepReport:
    """One run per exponent, aligned sample times, cross-m metrics.

    Run failures propagate with the offending exponent in the message.
    """
    def tagged(m, produce):
        try:
            return produce()
        except SimulationError as exc:
            exc.args = (f"run at m={m:g} failed: {exc}",)
            raise

    if threads > 1 and len(config.m_list) > 1:
        cfg_dict = config.to_dict()
        with ProcessPoolExecutor(max_workers=min(threads, len(config.m_list))) as pool:
            futures = [
                (m, pool.submit(_sweep_worker, cfg_dict, m)) for m in config.m_list
            ]
            runs = [tagged(m, fut.result) for m, fut in futures]
    else:
        runs = [tagged(m, lambda m=m: run_single(config, m)) for m in config.m_list]

    times = runs[0].sample_times
    T = max(config.T, 1e-300)
    residual_avg = [
        _time_integral(times, [rec.comp_residual for rec in r.records]) / T
        for r in runs
    ]
    ratios = [
        residual_avg[i + 1] / residual_avg[i] if residual_avg[i] > 0 else float("nan")
        for i in range(len(residual_avg) - 1)
    ]
    proxies = {
        "excess": [r.excess_max for r in runs],
        "p_times_onemrho": [
            _time_integral(times, [rec.p_times_onemrho for rec in r.records])
            for r in runs
        ],
        "rho_gradp_defect": [
            _time_integral(times, [rec.rho_gradp_defect for rec in r.records])
            for r in runs
        ],
    }
    uniform = {
        key: [
            _time_integral(times, [getattr(rec, key) for rec in r.records])
            for r in runs
        ]
        for key in (
            "grad_p_sq",
            "grad_p_frac_sq",
            "rho_pow_int",
            "stiff_energy",
            "hess_energy",
        )
    }
    vol = config.grid_spec().cell_volume
    return SweepReport(
        config=config,
        runs=runs,
        residual_avg=residual_avg,
        residual_ratios=ratios,
        proxies=proxies,
        uniform=uniform,
        cauchy_frac=_cauchy_matrix(runs, "grad_frac_stack", vol),
        cauchy_plain=_cauchy_matrix(runs, "grad_p_stack", vol),
    )


# ---------------------------------------------------------------------------
# refinement study
# ---------------------------------------------------------------------------


def _restrict(fine: np.ndarray, coarse_N: int) -> np.ndarray:
    """Conservative block-mean restriction onto a coarser nested grid."""
    factor = fine.shape[0] // coarse_N
    ndim = fine.ndim
    shape = []
    for _ in range(ndim):
        shape.extend([coarse_N, factor])
    view = fine.reshape(shape)
    return view.mean(axis=tuple(range(1, 2 * ndim, 2)))


def _order_fit(hs, errs):
    """Least-squares convergence order across a refinement ladder."""
    hs = np.asarray(hs, dtype=np.float64)
    errs = np.asarray(errs, dtype=np.float64)
    good = errs > 0
    if good.sum() < 2:
        return float("nan")
    slope = np.polyfit(np.log(hs[good]), np.log(errs[good]), 1)[0]
    return float(slope)


@dataclass
class RefinementReport:
    config: RunConfig
    N_list: list
    runs: list  # final SimState per N (single m)
    self_errs_rho: list
    self_errs_p: list
    self_order_rho: float
    self_order_p: float
    oracle_errs: list | None
    oracle_order: float | None
    fund1_rel: list
    fund1_order: float


def run_refinement_study(config: RunConfig, N_list) -> RefinementReport:
    """Self-convergence (and Barenblatt-oracle convergence) across grids.

    N_list must be strictly increasing with every entry a multiple of the
    coarsest so restriction-based comparison is exact.  Uses the first
    exponent of the m list.  fund1 identity errors on the Gaussian profile
    are measured on the same ladder.
    """
    N_list = list(N_list)
    errs = []
    if not N_list:
        errs.append("N_list: must not be empty")
    if any(not isinstance(N, int) or N < 4 for N in N_list):
        errs.append("N_list: entries must be integers >= 4")
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        errs.append("N_list: must be strictly increasing")
    if N_list and any(N % N_list[0] != 0 for N in N_list):
        errs.append("N_list: every N must be a multiple of the coarsest")
    if errs:
        raise ConfigInvalid(errs)

    m = config.m_list[0]
    finals = []
    for N in N_list:
        cfg = RunConfig.from_dict({**config.to_dict(), "grid": {"n": config.n, "L": config.L, "N": N}})
        params = cfg.params_for(m)
        init = cfg.initial_field(m)
        result = stepper.run(init, params, cfg.T, samples=2 if cfg.T > 0 else 1)
        finals.append(result.final)

    vol = [grid.GridSpec(config.n, config.L, N).cell_volume for N in N_list]
    self_rho, self_p = [], []
    for i in range(len(N_list) - 1):
        coarse = finals[i]
        fine = finals[i + 1]
        restricted = _restrict(fine.rho.values, N_list[i])
        self_rho.append(float(np.abs(coarse.rho.values - restricted).sum() * vol[i]))
        restricted_p = _restrict(fine.p, N_list[i])
        self_p.append(float(np.abs(coarse.p - restricted_p).sum() * vol[i]))
    hs = [2.0 * config.L / N for N in N_list]
    self_order_rho = _order_fit(hs[:-1], self_rho) if len(self_rho) >= 2 else float("nan")
    self_order_p = _order_fit(hs[:-1], self_p) if len(self_p) >= 2 else float("nan")

    oracle_errs = None
    oracle_order = None
    if config.initial["kind"] == "barenblatt":
        tau0 = config.initial.get("tau0", 1.0)
        tau_end = tau0 + (m / (m + 1.0)) * config.T
        oracle_errs = []
        for state, N, v in zip(finals, N_list, vol):
            spec = grid.GridSpec(config.n, config.L, N)
            exact = model.barenblatt(
                spec,
                tau=tau_end,
                exponent=m + 1.0,
                profile_const=config.initial.get("profile_const", 0.2),
                center=config.initial.get("center"),
            )
            oracle_errs.append(float(np.abs(state.rho.values - exact.values).sum() * v))
        oracle_order = _order_fit(hs, oracle_errs)

    fund1_rel = []
    for N in N_list:
        spec = grid.GridSpec(config.n, 6.0, N)
        p = grid.from_function(
            spec, lambda *coords: np.exp(-sum(c**2 for c in coords))
        )
        fund1_rel.append(diagnostics.identity_check_fund1(p).rel_err)
    fund1_order = _order_fit([12.0 / N for N in N_list], fund1_rel)

    return RefinementReport(
        config=config,
        N_list=N_list,
        runs=finals,
        self_errs_rho=self_rho,
        self_errs_p=self_p,
        self_order_rho=self_order_rho,
        self_order_p=self_order_p,
        oracle_errs=oracle_errs,
        oracle_order=oracle_order,
        fund1_rel=fund1_rel,
        fund1_order=fund1_order,
    )


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def _json_dump(obj, path: Path):
    try:
        with open(path, "w") as fh:
            json.dump(obj, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"write failed ({exc})", path) from exc


def export(report, directory) -> list:
    """Write CSVs, summary.json, snapshots (and timings.json) for a report.

    Returns the list of written paths.  Snapshot round-trips are bit-exact;
    CSV floats carry 17 significant digits (value-exact for float64).
    """
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create output directory ({exc})", directory) from exc

    written = []
    if isinstance(report, SweepReport):
        cfg = report.config
        summary = {
            "schema_version": SCHEMA_VERSION,
            "kind": "sweep",
            "config": cfg.to_dict(),
            "g_zero": cfg.growth_law().at_zero(),
            "out_of_scope_dimension": cfg.n == 1,  # 1D is a testing convenience
            "m_values": report.m_values,
            "sample_times": [float(t) for t in report.runs[0].sample_times],
            "series": {},
            "mass0": {},
            "sup_p_max": {},
            "excess_max": {},
            "steps": {},
            "boundary_flagged": {},
            "residual_decay": {
                "m": report.m_values,
                "time_avg": report.residual_avg,
                "ratios": report.residual_ratios,
            },
            "proxies": report.proxies,
            "uniform_bounds": report.uniform,
            "cauchy": {
                "m": report.m_values,
                "frac": report.cauchy_frac.tolist(),
                "plain": report.cauchy_plain.tolist(),
            },
            "snapshots": {},
            "refinement": None,
        }
        timings = {"wall_time": {}, "written_at": time.strftime("%Y-%m-%dT%H:%M:%S")}
        for run in report.runs:
            key = f"{run.m:g}"
            csv_path = directory / f"diagnostics_m{key}.csv"
            try:
                with open(csv_path, "w") as fh:
                    fh.write(diagnostics.csv_header() + "\n")
                    for rec in run.records:
                        fh.write(diagnostics.csv_row(rec) + "\n")
            except OSError as exc:
                raise IoFailure(f"CSV write failed ({exc})", csv_path) from exc
            written.append(csv_path)
            summary["series"][key] = {"csv": csv_path.name, "rows": len(run.records)}
            summary["mass0"][key] = run.mass0
            summary["sup_p_max"][key] = run.sup_p_max
            summary["excess_max"][key] = run.excess_max
            summary["steps"][key] = run.steps
            summary["boundary_flagged"][key] = run.boundary_flagged
            timings["wall_time"][key] = run.wall_time
            snaps = []
            spec = cfg.grid_spec()
            for idx, (t, rho_vals, p_vals) in enumerate(run.snapshots):
                rho_name = f"snap_m{key}_{idx:03d}_rho.pmef"
                p_name = f"snap_m{key}_{idx:03d}_p.pmef"
                grid.write_snapshot(
                    directory / rho_name, grid.ScalarField(spec, rho_vals), t=t, m=run.m
                )
                grid.write_snapshot(
                    directory / p_name, grid.ScalarField(spec, p_vals), t=t, m=run.m
                )
                written.extend([directory / rho_name, directory / p_name])
                snaps.append({"t": t, "rho": rho_name, "p": p_name})
            summary["snapshots"][key] = snaps
        summary_path = directory / "summary.json"
        _json_dump(summary, summary_path)
        written.append(summary_path)
        _json_dump(timings, directory / "timings.json")
        written.append(directory / "timings.json")
    elif isinstance(report, RefinementReport):
        summary = {
            "schema_version": SCHEMA_VERSION,
            "kind": "refine",
            "config": report.config.to_dict(),
            "N_list": report.N_list,
            "self_convergence": {
                "l1_errors_rho": report.self_errs_rho,
                "l1_errors_p": report.self_errs_p,
                "order_rho": report.self_order_rho,
                "order_p": report.self_order_p,
            },
            "oracle": None
            if report.oracle_errs is None
            else {"l1_errors": report.oracle_errs, "order": report.oracle_order},
            "fund1": {"rel_errors": report.fund1_rel, "order": report.fund1_order},
        }
        summary_path = directory / "summary.json"
        _json_dump(summary, summary_path)
        written.append(summary_path)
    else:
        raise TypeError(f"cannot export report of type {type(report).__name__}")
    return written


# ---------------------------------------------------------------------------
# operator / identity check suite
# ---------------------------------------------------------------------------


def _compact_bump_field(spec: grid.GridSpec, rng) -> np.ndarray:
    """Random smooth field vanishing on the outer quarter of the box."""
    coords = spec.meshgrid()
    envelope = np.ones(spec.shape)
    for c in coords:
        envelope *= np.maximum(0.0, 1.0 - (c / (0.5 * spec.L)) ** 2) ** 2
    noise = np.ones(spec.shape)
    for k, c in enumerate(coords):
        noise += 0.5 * np.sin((k + 1.5) * c + rng.uniform(0, 2 * np.pi))
    return envelope * noise


def run_check_suite(seed: int = 0, verbose: bool = True) -> list:
    """Operator and identity battery; returns (name, passed, detail) tuples."""
    rng = np.random.default_rng(seed)
    results = []

    def check(name, passed, detail):
        results.append((name, bool(passed), detail))
        if verbose:
            print(f"{'PASS' if passed else 'FAIL'}  {name}  [{detail}]")

    for n in (1, 2, 3):
        spec = grid.GridSpec(n=n, L=2.0, N=16 if n == 3 else 32)
        const = grid.ScalarField(spec, np.full(spec.shape, 3.25))
        gvec = grid.gradient(const)
        err = max(float(np.abs(c.values).max()) for c in gvec.components)
        check(f"gradient constant n={n}", err == 0.0, f"max |.| = {err:.1e}")

        coords = spec.meshgrid()
        lin = grid.ScalarField(spec, 1.75 * coords[0])
        gvec = grid.gradient(lin)
        interior = (slice(1, -1),) * n
        err = abs(gvec.components[0].values[interior] - 1.75).max()
        check(f"gradient linear n={n}", err < 1e-13, f"max err = {err:.1e}")

        vec = grid.VectorField(
            spec, tuple(grid.ScalarField(spec, coords[k].copy()) for k in range(n))
        )
        div = grid.divergence(vec)
        err = abs(div.values[interior] - n).max()
        check(f"divergence linear n={n}", err < 1e-12, f"max err = {err:.1e}")

        quad = grid.ScalarField(spec, spec.radius_sq())
        lap = grid.laplacian(quad)
        wide_interior = (slice(2, -2),) * n
        err = abs(lap.values[wide_interior] - 2 * n).max()
        check(f"laplacian |x|^2 n={n}", err < 1e-11, f"max err = {err:.1e}")

        f = grid.ScalarField(spec, _compact_bump_field(spec, rng))
        comp = grid.laplacian(f).values - grid.divergence(grid.gradient(f)).values
        err = float(np.abs(comp).max())
        check(f"laplacian composition n={n}", err == 0.0, f"max |.| = {err:.1e}")

        fv = _compact_bump_field(spec, rng)
        vv = [_compact_bump_field(spec, rng) for _ in range(n)]
        ffield = grid.ScalarField(spec, fv)
        vfield = grid.VectorField(
            spec, tuple(grid.ScalarField(spec, v) for v in vv)
        )
        lhs = grid.integrate(
            grid.ScalarField(spec, fv * grid.divergence(vfield).values)
        )
        rhs = -grid.dot_integral(grid.gradient(ffield), vfield)
        scale = max(abs(lhs), abs(rhs), 1.0)
        check(
            f"adjointness n={n}",
            abs(lhs - rhs) / scale < 1e-12,
            f"|lhs-rhs|/scale = {abs(lhs - rhs) / scale:.1e}",
        )

        ones = grid.ScalarField(spec, np.ones(spec.shape))
        vol_exact = (2 * spec.L) ** n
        err = abs(grid.integrate(ones) - vol_exact) / vol_exact
        check(f"integrate ones n={n}", err < 1e-14, f"rel err = {err:.1e}")

    spec = grid.GridSpec(n=2, L=6.0, N=128)
    gauss = grid.from_function(spec, lambda x, y: np.exp(-(x**2 + y**2)))
    err = abs(grid.integrate(gauss) - np.pi) / np.pi
    check("integrate gaussian 2D", err < 1e-6, f"rel err = {err:.1e}")

    defects = []
    for N in (64, 128):
        spec = grid.GridSpec(n=2, L=4.0, N=N)
        rho = grid.from_function(
            spec, lambda x, y: np.exp(-2.0 * (x**2 + y**2))
        )
        phi, _ = potential.solve_newtonian(rho)
        interior = (slice(2, -2),) * 2
        defect = grid.laplacian(phi).values + rho.values
        num = math.sqrt(float((defect[interior] ** 2).sum()))
        den = math.sqrt(float((rho.values[interior] ** 2).sum()))
        defects.append(num / den)
    ratio = defects[0] / defects[1]
    check(
        "poisson defect O(h^2)",
        defects[1] < 1.5e-2 and ratio > 3.0,
        f"defects = {defects[0]:.2e}/{defects[1]:.2e} (constant reported), "
        f"ratio = {ratio:.2f}",
    )

    spec = grid.GridSpec(n=2, L=4.0, N=64)
    r1 = grid.from_function(spec, lambda x, y: np.exp(-3 * ((x - 0.5) ** 2 + y**2)))
    r2 = grid.from_function(spec, lambda x, y: np.exp(-2 * (x**2 + (y + 0.7) ** 2)))
    solver = potential.solver_for(spec)
    a, b = 0.7, 0.3
    phi_lin = solver.solve_raw(a * r1.values + b * r2.values)
    phi_sep = a * solver.solve_raw(r1.values) + b * solver.solve_raw(r2.values)
    err = float(np.abs(phi_lin - phi_sep).max()) / max(float(np.abs(phi_lin).max()), 1e-300)
    check("poisson linearity", err < 1e-12, f"rel err = {err:.1e}")

    spec = grid.GridSpec(n=2, L=6.0, N=128)
    p = grid.from_function(spec, lambda x, y: np.exp(-(x**2 + y**2)))
    res = diagnostics.identity_check_fund1(p)
    check(
        "fund1 identity N=128",
        res.rel_err <= 1e-3,
        f"rel_err = {res.rel_err:.2e}",
    )
    return results


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


def _load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigInvalid([f"config file not found: {path}"])
    except json.JSONDecodeError as exc:
        raise ConfigInvalid([f"config is not valid JSON: {exc}"])
    return RunConfig.from_dict(raw)


def _dump_failure(out_dir, exc):
    if out_dir is None:
        return
    try:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        _json_dump(
            {"error": type(exc).__name__, "message": str(exc)},
            Path(out_dir) / "failure.json",
        )
    except Exception:
        pass  # the dump is best-effort; the exit code carries the signal


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pmlimit",
        description="Porous-medium + chemotaxis + growth simulator and "
        "stiff-limit verification harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single run at one exponent")
    p_run.add_argument("config", help="JSON config path")
    p_run.add_argument("--m", type=float, default=None, help="override exponent")
    p_run.add_argument("--out", default="out", help="output directory")
    p_run.add_argument("--seed", type=int, default=None)

    p_sweep = sub.add_parser("sweep", help="full m-sweep with cross-m metrics")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--out", default="out")
    p_sweep.add_argument("--threads", type=int, default=1)
    p_sweep.add_argument("--seed", type=int, default=None)

    p_refine = sub.add_parser("refine", help="grid refinement study")
    p_refine.add_argument("config")
    p_refine.add_argument(
        "--n-list", default="64,128,256", help="comma-separated grid sizes"
    )
    p_refine.add_argument("--out", default="out")

    p_check = sub.add_parser("check", help="operator/identity test battery")
    p_check.add_argument("--seed", type=int, default=0)
    p_check.add_argument("--out", default=None)

    p_export = sub.add_parser("export-config", help="emit the default config")
    p_export.add_argument("path", nargs="?", default=None)

    args = parser.parse_args(argv)

    try:
        if args.command == "export-config":
            text = json.dumps(DEFAULT_CONFIG, indent=2) + "\n"
            if args.path:
                Path(args.path).write_text(text)
            else:
                sys.stdout.write(text)
            return 0

        if args.command == "check":
            results = run_check_suite(seed=args.seed)
            failed = [name for name, ok, _ in results if not ok]
            if args.out:
                _json_dump(
                    {
                        "passed": not failed,
                        "results": [
                            {"name": n, "passed": ok, "detail": d}
                            for n, ok, d in results
                        ],
                    },
                    Path(args.out) / "check.json"
                    if Path(args.out).is_dir()
                    else Path(args.out),
                )
            return 0 if not failed else 3

        config = _load_config(args.config)
        if getattr(args, "seed", None) is not None:
            config = RunConfig.from_dict({**config.to_dict(), "seed": args.seed})

        if args.command == "run":
            if args.m is not None:
                config = RunConfig.from_dict(
                    {
                        **config.to_dict(),
                        "params": {**config.to_dict()["params"], "m": [args.m]},
                    }
                )
            else:
                config = RunConfig.from_dict(
                    {
                        **config.to_dict(),
                        "params": {
                            **config.to_dict()["params"],
                            "m": [config.m_list[0]],
                        },
                    }
                )
            report = run_m_sweep(config, threads=1)
            export(report, args.out)
            print(f"run complete: m={config.m_list[0]:g}, outputs in {args.out}")
            return 0

        if args.command == "sweep":
            report = run_m_sweep(config, threads=args.threads)
            export(report, args.out)
            print(
                f"sweep complete: m in {list(config.m_list)}, outputs in {args.out}"
            )
            return 0

        if args.command == "refine":
            n_list = [int(tok) for tok in args.n_list.split(",") if tok.strip()]
            report = run_refinement_study(config, n_list)
            export(report, args.out)
            print(f"refinement study complete: N in {n_list}, outputs in {args.out}")
            return 0
    except ConfigInvalid as exc:
        for msg in exc.messages:
            print(f"config error: {msg}", file=sys.stderr)
        return 2
    except SimulationError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        _dump_failure(getattr(args, "out", None), exc)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
