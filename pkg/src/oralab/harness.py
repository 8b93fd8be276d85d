"""Sweep orchestration and output emission.

A run directory holds one CSV per logical table, each with a run_id column,
plus manifest.json. Floats are written with 17 significant digits and nothing
time-dependent is recorded, so a rerun with the same config and seed produces
byte-identical files.
"""
from __future__ import annotations

import csv
import json
import logging
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import ora_residual_rab, ora_residual_raq, series_from_trace
from .metrics import levy_distance, tail_sup_distance
from .particles import empirical_tail, replica_seeds, simulate_rab, simulate_raq, write_trace_csv
from .rab import solve
from .raq import solve_raq
from .scenario import Scenario, load_scenario

log = logging.getLogger(__name__)


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_csv(path: Path, header: list, rows) -> Path:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def map_jobs(fn, jobs: list, threads: int = 1) -> list:
    """Apply fn to every job on a bounded pool; results come back in job order."""
    if threads <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, jobs))


# ---------------------------------------------------------------- solver cells

def solver_cells(sc: Scenario) -> list[tuple[float, float]]:
    return sorted((D, d) for D in sc.solver.Delta for d in sc.solver.delta)


def cell_id(sc: Scenario, Delta: float, delta: float) -> str:
    return f"{sc.name}:{sc.model}:Delta={Delta:g}:delta={delta:g}"


def run_solver(sc: Scenario, Delta: float, delta: float, data=None, stride: int | None = None):
    data = sc.build_data() if data is None else data
    stride = sc.solver.stride if stride is None else stride
    if sc.model == "rab":
        return solve(data, Delta, delta, stride=stride)
    return solve_raq(data, Delta, delta, stride=stride)


def _snapshot_stride(sc: Scenario, delta: float) -> int:
    """Stride that lands on every requested snapshot time."""
    steps = [int(round(t / delta)) for t in sc.outputs.snapshot_times if t > 0]
    g = sc.solver.stride
    for s in steps:
        g = int(np.gcd(g, s))
    return max(g, 1)


# ---------------------------------------------------------------- reports

@dataclass
class ComparisonReport:
    scenario: str
    gap: dict = field(default_factory=dict)          # run_id -> (t, bound, measured) at snapshots
    convergence: list = field(default_factory=list)  # rows (run_id, N, replica, t, sup_dist, levy)
    summary: dict = field(default_factory=dict)      # N -> {t -> mean/std of sup_dist and levy}
    ora: dict = field(default_factory=dict)          # run_id -> residual value(s)

    def to_json(self) -> dict:
        return {"scenario": self.scenario, "gap": self.gap, "summary": self.summary, "ora": self.ora}


def _rows_convergence(sc: Scenario, run, reference_id: str, threads: int) -> tuple[list, dict, dict]:
    data = run.data
    times = [t for t in sc.outputs.snapshot_times if t > 0]
    r_grid = sc.r_grid()
    jobs = []
    for N in sc.simulation.N:
        for k, s in enumerate(replica_seeds(sc.simulation.seed + N, sc.simulation.replicas)):
            jobs.append((N, k, s))

    def one(job):
        N, k, s = job
        sim = simulate_rab if sc.model == "rab" else simulate_raq
        tr = sim(data, N, times, seed=s, r_grid=r_grid)
        rows = []
        for t in times:
            e = empirical_tail(tr, t)
            mid = run.mid_at(t).tail()
            rows.append((f"{sc.name}:N={N}:rep={k}", N, k, t, tail_sup_distance(e, mid),
                         levy_distance(e, mid, resolution=data.u0.grid.h)))
        if sc.model == "rab":
            res = ora_residual_rab(series_from_trace(tr), tr.removal_measure()).value
        else:
            p, m = ora_residual_raq(series_from_trace(tr), tr.removal_measure(), data.q)
            res = max(p.value, m.value)
        return rows, tr, res

    out = map_jobs(one, jobs, threads)
    rows, summary, ora = [], {}, {}
    for (N, k, _), (r, tr, res) in zip(jobs, out):
        rows.extend(r)
        ora[f"{sc.name}:N={N}:rep={k}"] = res
    for N in sc.simulation.N:
        summary[str(N)] = {}
        for t in times:
            d = np.array([r[4] for r in rows if r[1] == N and r[3] == t])
            lv = np.array([r[5] for r in rows if r[1] == N and r[3] == t])
            summary[str(N)][fmt(t)] = {"reference": reference_id,
                                       "sup_dist_mean": float(d.mean()), "sup_dist_std": float(d.std(ddof=1)) if d.size > 1 else 0.0,
                                       "levy_mean": float(lv.mean()), "levy_std": float(lv.std(ddof=1)) if lv.size > 1 else 0.0}
    return rows, summary, {"traces": out, "ora": ora}


def compare_models(config, threads: int = 1) -> ComparisonReport:
    """Barrier-versus-simulation table for the scenario's first solver cell."""
    sc = load_scenario(config)
    data = sc.build_data()
    Delta, delta = solver_cells(sc)[0]
    run = run_solver(sc, Delta, delta, data, stride=_snapshot_stride(sc, delta))
    rid = cell_id(sc, Delta, delta)
    rep = ComparisonReport(sc.name)
    rep.gap[rid] = [(fmt(t), float(run.gap_bound[int(round(t / delta))]), float(run.measured_gap[int(round(t / delta))]))
                    for t in sc.outputs.snapshot_times]
    if sc.simulation.N:
        rows, summary, extra = _rows_convergence(sc, run, rid, threads)
        rep.convergence, rep.summary = rows, summary
        rep.ora.update(extra["ora"])
    return rep


# ---------------------------------------------------------------- full runs

def _density_rows(rid, run, t):
    lo, up = run.lower_at(t), run.upper_at(t)
    x = lo.grid.centers
    mid = 0.5 * (lo.values + up.values)
    return [(rid, t, xi, a, b, m) for xi, a, b, m in zip(x, lo.values, up.values, mid)]


def _removal_rows(rid, run):
    rows = []
    for t, p in zip(run.removal_lower.times, run.removal_lower.payloads):
        s = p.support()
        if s is not None:
            rows.append((rid, t, s[0], s[1], p.total_mass))
    return rows


def run_scenario(config, out_dir, threads: int = 1, seed: int | None = None,
                 parts: tuple = ("solve", "simulate", "ora")) -> Path:
    """Execute solver sweeps, simulations and diagnostics; write CSVs and a manifest."""
    sc = load_scenario(config)
    if seed is not None:
        sc = sc.model_copy(update={"simulation": sc.simulation.model_copy(update={"seed": seed})})
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = sc.build_data()
    cells = solver_cells(sc)
    log.info("scenario %s: %d solver cells", sc.name, len(cells))

    r_ora = sc.r_grid()

    def solve_cell(cell):
        D, d = cell
        stride = _snapshot_stride(sc, d)
        if sc.model == "rab":
            return solve(data, D, d, stride=stride, ora_grid=r_ora if "ora" in parts else None)
        return solve_raq(data, D, d, stride=stride)

    runs = map_jobs(solve_cell, cells, threads)
    files = []
    times = sc.outputs.snapshot_times
    if "solve" in parts:
        gap_rows, rem_rows = [], []
        for (D, d), run in zip(cells, runs):
            rid = cell_id(sc, D, d)
            for n in sorted(set(range(0, run.n_steps + 1, sc.solver.stride)) | {run.n_steps}):
                gap_rows.append((rid, n * d, run.gap_bound[n], run.measured_gap[n]))
            rem_rows.extend(_removal_rows(rid, run))
        files.append(write_csv(out / "gap.csv", ["run_id", "t", "bound", "measured"], gap_rows))
        files.append(write_csv(out / "removal.csv", ["run_id", "t", "x_min", "x_max", "mass"], rem_rows))
        if sc.outputs.density_csv:
            for t in times:
                rows = []
                for (D, d), run in zip(cells, runs):
                    rows.extend(_density_rows(cell_id(sc, D, d), run, t))
                files.append(write_csv(out / f"density_t{fmt(t)}.csv",
                                       ["run_id", "t", "x", "lower", "upper", "mid"], rows))
    ora_rows = []
    if "ora" in parts:
        for (D, d), run in zip(cells, runs):
            rid = cell_id(sc, D, d)
            if sc.model == "rab":
                ora_rows.extend((rid, "barrier", ri, v) for ri, v in zip(r_ora, run.diagnostics["ora_per_r"]))
    report = None
    if "simulate" in parts and sc.simulation.N:
        run0 = runs[0]
        rid0 = cell_id(sc, *cells[0])
        rows, summary, extra = _rows_convergence(sc, run0, rid0, threads)
        report = summary
        files.append(write_csv(out / "convergence.csv", ["run_id", "N", "replica", "t", "sup_dist", "levy"], rows))
        for key, res in sorted(extra["ora"].items()):
            ora_rows.append((key, "trace", float("nan"), res))
        if sc.outputs.traces_csv:
            tdir = out / "traces"
            tdir.mkdir(exist_ok=True)
            jobs = [(N, k) for N in sc.simulation.N for k in range(sc.simulation.replicas)]
            for (N, k), (_, tr, _) in zip(jobs, extra["traces"]):
                files.append(write_trace_csv(tr, tdir / f"trace_N{N}_rep{k}.csv", f"{sc.name}:N={N}:rep={k}"))
    if "ora" in parts:
        files.append(write_csv(out / "ora.csv", ["run_id", "side", "r", "residual"], ora_rows))
    files.extend(emit_plots(out))
    manifest = {
        "scenario": sc.model_dump(mode="json"),
        "config_sha256": sc.digest(),
        "seeds": {"simulation": sc.simulation.seed,
                  "replica_streams": "SeedSequence(seed + N).spawn(replicas)"},
        "cells": [cell_id(sc, D, d) for D, d in cells],
        "certified": {cell_id(sc, D, d): bool(run.measured_gap.max() <= run.gap_bound.max())
                      for (D, d), run in zip(cells, runs)},
        "summary": report,
        "versions": _versions(),
        "files": sorted(p.name for p in files),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out


def _versions() -> dict:
    import pydantic
    import scipy
    return {"oralab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "pydantic": pydantic.VERSION, "python": platform.python_version()}


def emit_plots(run_dir) -> list[Path]:
    """Long-format plot data (series, key, x, y) assembled from the run's CSVs."""
    run_dir = Path(run_dir)
    rows = []
    for f in sorted(run_dir.glob("density_t*.csv")):
        with f.open() as fh:
            for rec in csv.DictReader(fh):
                rows.append(("density_mid", f"{rec['run_id']}@t={rec['t']}", rec["x"], rec["mid"]))
    gap = run_dir / "gap.csv"
    if gap.exists():
        with gap.open() as fh:
            for rec in csv.DictReader(fh):
                rows.append(("gap_measured", rec["run_id"], rec["t"], rec["measured"]))
                rows.append(("gap_bound", rec["run_id"], rec["t"], rec["bound"]))
    conv = run_dir / "convergence.csv"
    if conv.exists():
        acc: dict = {}
        with conv.open() as fh:
            for rec in csv.DictReader(fh):
                acc.setdefault((rec["t"], int(rec["N"])), []).append(float(rec["sup_dist"]))
        for (t, N), v in sorted(acc.items()):
            rows.append(("sup_dist_vs_N", f"t={t}", fmt(np.log10(N)), fmt(np.log10(np.mean(v)))))
    if not rows:
        return []
    return [write_csv(run_dir / "plot_data.csv", ["series", "key", "x", "y"], rows)]

