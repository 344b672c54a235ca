"""Batch experiments: spectrum scans, single runs, period and position sweeps.

Each experiment writes plot-ready CSV plus a JSON summary into an output
directory.  Files carry the configuration hash and contain no timestamps or
runtimes, so identical inputs give identical files.  Sweeps append finished
grid points to ``points.jsonl`` and skip them when rerun with the same hash.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from . import __version__
from .config import RunConfig
from .core import Polarization
from .coupling import snapshot_matrix
from .evolution import EvolutionConfig, evolve
from .pulse import potential, potential_rate
from .spectrum import average_frequency, eigenvalue_trace, solve_spectrum

log = logging.getLogger(__name__)

SCENARIOS = ("spectrum_scan", "evolve", "period_sweep", "position_sweep")


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return "" if x is None else str(x)


def _csv_text(header, rows, meta: dict) -> str:
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, allow_nan=True) + "\n"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


@dataclass(frozen=True)
class SweepSpec:
    """Grid definition for one experiment; ``base`` supplies everything not swept."""

    scenario: str
    base: EvolutionConfig
    polarizations: tuple = ("TE",)
    periods_ps: tuple = (111.1,)
    etas: tuple = (0.5,)
    vmax_lz: tuple = (5000.0,)
    modes: tuple = ("multi",)
    refine: str = "golden"
    refine_tol_ps: float = 0.05
    workers: int = 1
    out_dir: str | None = None
    config_hash: str = ""
    report_modes: int = 5
    spectrum_ell_max: int = 5
    spectrum_samples: int = 2000

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        for name in ("polarizations", "periods_ps", "etas", "vmax_lz", "modes"):
            if not getattr(self, name):
                raise ValueError(f"{name} grid is empty")
        if any(not 0 < e < 1 for e in self.etas) or any(T <= 0 for T in self.periods_ps):
            raise ValueError("eta must lie in (0, 1) and periods must be positive")

    @classmethod
    def from_config(cls, cfg: RunConfig, scenario: str, out_dir=None) -> SweepSpec:
        ev = cfg.evolution
        sw = cfg.sweep
        if scenario == "spectrum_scan":
            pols, vmax = cfg.spectrum.polarizations, cfg.spectrum.vmax_lz
        elif scenario == "evolve":
            pols, vmax = (ev.pol.value,), (ev.profile.vmax_lz,)
        else:
            pols, vmax = sw.polarizations, sw.vmax_lz
        return cls(
            scenario=scenario, base=ev, polarizations=tuple(pols), periods_ps=sw.periods_ps,
            etas=sw.etas, vmax_lz=tuple(vmax), modes=sw.modes, refine=sw.refine,
            refine_tol_ps=sw.refine_tol_ps, workers=sw.workers,
            out_dir=None if out_dir is None else str(out_dir), config_hash=cfg.hash(),
            report_modes=cfg.report_modes, spectrum_ell_max=cfg.spectrum.ell_max,
            spectrum_samples=cfg.spectrum.n_samples,
        )

    @property
    def meta(self) -> dict:
        return {"config_hash": self.config_hash, "sheetdce_version": __version__,
                "scenario": self.scenario}


@dataclass
class SweepResult:
    spec: SweepSpec
    records: list
    runtimes: list = field(default_factory=list)

    @property
    def n_failed(self) -> int:
        return sum(r["status"] != "ok" for r in self.records)

    @property
    def ok(self) -> bool:
        return self.n_failed == 0

    def summary(self) -> dict:
        return {**self.spec.meta, "n_points": len(self.records), "n_failed": self.n_failed,
                "records": self.records}


# ---------------------------------------------------------------- evaluation


def point_config(base: EvolutionConfig, pol, eta, vmax, period, mode="multi") -> EvolutionConfig:
    """Evolution config for one sweep point; samples only at period boundaries."""
    return replace(
        base, pol=Polarization.parse(pol), geometry=base.geometry.with_eta(eta),
        profile=replace(base.profile, vmax_lz=float(vmax), period=float(period)),
        single_mode=(base.single_mode or "zero_coupling") if mode == "single" else None,
        sample_ps=float(period),
    )


def n111_at_end(cfg: EvolutionConfig) -> tuple[float, float]:
    """(N_111 after n_pulses periods, max unitarity deviation over the run)."""
    tr = evolve(cfg)
    return float(tr.N_final[0]), float(tr.unitarity_dev.max())


def _period_point(args):
    key, base, pol, eta, vmax, T, mode = args
    t0 = time.perf_counter()
    try:
        n, dev = n111_at_end(point_config(base, pol, eta, vmax, T, mode))
        rec = {"N111": n, "unitarity_dev": dev, "status": "ok", "error": ""}
    except Exception as exc:  # recorded per point, never dropped
        rec = {"N111": float("nan"), "unitarity_dev": float("nan"), "status": "error",
               "error": f"{type(exc).__name__}: {exc}"}
    return key, rec, time.perf_counter() - t0


def optimize_period(cfg: EvolutionConfig, periods, refine="golden", tol_ps=0.05):
    """Coarse scan of N_111 over ``periods`` then bounded golden-section refinement.

    Returns (T_opt, N_opt, dev, scan) where scan lists (T, N) of the coarse grid.
    """
    periods = sorted(periods)
    scan = []
    cache = {}

    def run(T):
        T = float(T)
        if T not in cache:
            cache[T] = n111_at_end(replace(cfg, profile=replace(cfg.profile, period=T),
                                           sample_ps=T))
        return cache[T]

    for T in periods:
        scan.append((T, run(T)[0]))
    i = int(np.argmax([n for _, n in scan]))
    best_T = periods[i]
    if refine == "golden" and len(periods) > 1:
        lo = periods[max(i - 1, 0)]
        hi = periods[min(i + 1, len(periods) - 1)]
        res = minimize_scalar(lambda T: -run(T)[0], bounds=(lo, hi), method="bounded",
                              options={"xatol": tol_ps})
        if -res.fun > run(best_T)[0]:
            best_T = float(res.x)
    n, dev = run(best_T)
    return best_T, n, dev, scan


def _position_point(args):
    key, base, pol, eta, vmax, periods, refine, tol = args
    t0 = time.perf_counter()
    try:
        cfg = point_config(base, pol, eta, vmax, periods[0])
        T, n, dev, _ = optimize_period(cfg, periods, refine, tol)
        rec = {"T_opt_ps": T, "N111": n, "unitarity_dev": dev, "status": "ok", "error": ""}
    except Exception as exc:
        rec = {"T_opt_ps": float("nan"), "N111": float("nan"), "unitarity_dev": float("nan"),
               "status": "error", "error": f"{type(exc).__name__}: {exc}"}
    return key, rec, time.perf_counter() - t0


# ---------------------------------------------------------------- resumable driver


def _load_done(path: Path | None, config_hash: str) -> dict:
    done = {}
    if path is None or not path.exists():
        return done
    for line in path.read_text(encoding="utf-8").splitlines():
        try:
            item = json.loads(line)
        except json.JSONDecodeError:
            continue  # torn last line of an interrupted run
        if item.get("config_hash") == config_hash and item["record"]["status"] == "ok":
            done[item["key"]] = item["record"]
    return done


def _run_points(spec: SweepSpec, jobs, worker):
    """Evaluate ``jobs`` = [(key, args...)] with resume, returning records in job order."""
    out = Path(spec.out_dir) if spec.out_dir else None
    ledger = out / "points.jsonl" if out else None
    done = _load_done(ledger, spec.config_hash)
    todo = [j for j in jobs if j[0] not in done]
    if done:
        log.info("resuming: %d of %d points already complete", len(jobs) - len(todo), len(jobs))
    results = dict(done)
    runtimes = {}
    if ledger:
        ledger.parent.mkdir(parents=True, exist_ok=True)
    fh = open(ledger, "a", encoding="utf-8") if ledger else None
    try:
        if spec.workers > 1 and len(todo) > 1:
            pool = ProcessPoolExecutor(max_workers=spec.workers)
            it = pool.map(worker, todo)
        else:
            pool = None
            it = map(worker, todo)
        for key, rec, dt in it:
            results[key] = rec
            runtimes[key] = dt
            log.info("%s -> %s (%.1f s)", key, rec.get("N111"), dt)
            if fh:
                fh.write(json.dumps({"key": key, "config_hash": spec.config_hash,
                                     "record": rec}, sort_keys=True) + "\n")
                fh.flush()
        if pool:
            pool.shutdown()
    finally:
        if fh:
            fh.close()
    if ledger:
        lines = [json.dumps({"key": j[0], "config_hash": spec.config_hash,
                             "record": results[j[0]]}, sort_keys=True) for j in jobs]
        _write(ledger, "\n".join(lines) + "\n")
    return [results[j[0]] for j in jobs], [runtimes.get(j[0], 0.0) for j in jobs]


def period_sweep(spec: SweepSpec) -> SweepResult:
    """N_111 after n_pulses periods for every (pol, eta, Vmax, mode, T) grid point."""
    grid = list(itertools.product(spec.polarizations, spec.etas, spec.vmax_lz, spec.modes,
                                  spec.periods_ps))
    jobs, meta = [], []
    for pol, eta, vmax, mode, T in grid:
        key = f"{Polarization.parse(pol).value}|eta={eta:.12g}|V={vmax:.12g}|{mode}|T={T:.12g}"
        jobs.append((key, spec.base, pol, eta, vmax, T, mode))
        meta.append({"pol": Polarization.parse(pol).value, "eta": eta, "vmax_lz": vmax,
                     "mode": mode, "T_ps": T})
    recs, rts = _run_points(spec, jobs, _period_point)
    records = [m | r for m, r in zip(meta, recs)]
    result = SweepResult(spec, records, rts)
    if spec.out_dir:
        header = ["pol", "eta", "vmax_lz", "mode", "T_ps", "N111", "unitarity_dev", "status", "error"]
        rows = [[r[h] for h in header] for r in records]
        out = Path(spec.out_dir)
        _write(out / "sweep_period.csv", _csv_text(header, rows, spec.meta))
        summary = result.summary()
        summary["optima"] = period_optima(records)
        _write(out / "summary.json", _json_text(summary))
    return result


def period_optima(records) -> list[dict]:
    """Best T per (pol, eta, Vmax, mode) among successful points."""
    best = {}
    for r in records:
        if r["status"] != "ok":
            continue
        k = (r["pol"], r["eta"], r["vmax_lz"], r["mode"])
        if k not in best or r["N111"] > best[k]["N111"]:
            best[k] = r
    return [{"pol": k[0], "eta": k[1], "vmax_lz": k[2], "mode": k[3],
             "T_opt_ps": v["T_ps"], "N111": v["N111"]} for k, v in best.items()]


def position_sweep(spec: SweepSpec) -> SweepResult:
    """N_111 at the per-eta optimum period for every (pol, Vmax, eta)."""
    grid = list(itertools.product(spec.polarizations, spec.vmax_lz, spec.etas))
    jobs, meta = [], []
    for pol, vmax, eta in grid:
        p = Polarization.parse(pol).value
        key = f"{p}|V={vmax:.12g}|eta={eta:.12g}"
        jobs.append((key, spec.base, pol, eta, vmax, tuple(spec.periods_ps), spec.refine,
                     spec.refine_tol_ps))
        meta.append({"pol": p, "vmax_lz": vmax, "eta": eta})
    recs, rts = _run_points(spec, jobs, _position_point)
    records = [m | r for m, r in zip(meta, recs)]
    result = SweepResult(spec, records, rts)
    if spec.out_dir:
        header = ["pol", "vmax_lz", "eta", "T_opt_ps", "N111", "unitarity_dev", "status", "error"]
        rows = [[r[h] for h in header] for r in records]
        out = Path(spec.out_dir)
        _write(out / "sweep_position.csv", _csv_text(header, rows, spec.meta))
        _write(out / "summary.json", _json_text(result.summary()))
    return result


# ---------------------------------------------------------------- single runs


def evolve_experiment(spec: SweepSpec) -> SweepResult:
    """One evolution with the dense trajectory (t, N_1..N_k) and per-sample records."""
    cfg = spec.base
    t0 = time.perf_counter()
    try:
        tr = evolve(cfg)
    except Exception as exc:
        rec = {"status": "error", "error": f"{type(exc).__name__}: {exc}"}
        result = SweepResult(spec, [rec], [time.perf_counter() - t0])
        if spec.out_dir:
            _write(Path(spec.out_dir) / "summary.json", _json_text(result.summary()))
        return result
    k = min(spec.report_modes, tr.N.shape[1])
    rec = {
        "status": "ok", "error": "", "pol": cfg.pol.value, "eta": cfg.eta,
        "vmax_lz": cfg.profile.vmax_lz, "T_ps": cfg.profile.period, "ell_max": cfg.ell_max,
        "single_mode": cfg.single_mode or "off", "step_ps": tr.step_ps,
        "N111": float(tr.N_final[0]), "N_final": [float(x) for x in tr.N_final],
        "unitarity_dev": float(tr.unitarity_dev.max()),
    }
    result = SweepResult(spec, [rec], [time.perf_counter() - t0])
    if spec.out_dir:
        out = Path(spec.out_dir)
        header = ["t_ps", "V_Lz", "in_pulse", "unitarity_dev"] + [f"N_{m}" for m in range(1, k + 1)] + ["N_total"]
        rows = [[t, v, p, u, *n[:k], n.sum()]
                for t, v, p, u, n in zip(tr.t_ps, tr.V, tr.in_pulse, tr.unitarity_dev, tr.N)]
        _write(out / "trajectory.csv", _csv_text(header, rows, spec.meta))
        summary = result.summary()
        summary["snapshots"] = tr.records()
        _write(out / "summary.json", _json_text(summary))
    return result


def spectrum_scan(spec: SweepSpec) -> SweepResult:
    """k_n(t) over one period for each polarization and peak potential."""
    base = spec.base
    records = []
    for pol, vmax in itertools.product(spec.polarizations, spec.vmax_lz):
        p = Polarization.parse(pol)
        prof = replace(base.profile, vmax_lz=float(vmax))
        try:
            t, V, k = eigenvalue_trace(prof, base.eta, p, base.k_perp, spec.spectrum_ell_max,
                                       spec.spectrum_samples, base.scale)
            n = np.arange(1, k.shape[1] + 1)
            excursion = np.abs(k - n * np.pi).max(axis=0)
            avg = [average_frequency(prof, base.eta, p, base.k_perp, m, scale=base.scale)
                   for m in n]
            rec = {"pol": p.value, "vmax_lz": float(vmax), "status": "ok", "error": "",
                   "k_excursion": [float(x) for x in excursion],
                   "half_period_ps": [a.half_period_ps for a in avg],
                   "frequency_shift_rad_s": [a.shift for a in avg]}
            if spec.out_dir:
                # k_n is per Lz; c*k_n in rad/s is what gets plotted
                ck = base.scale.frequency_to_physical(k)
                header = (["t_ps", "V_Lz"] + [f"k_{m}" for m in n]
                          + [f"ck_{m}_rad_s" for m in n])
                rows = [[ti, vi, *ki, *ci] for ti, vi, ki, ci in zip(t, V, k, ck)]
                _write(Path(spec.out_dir) / f"spectrum_{p.value}_V{vmax:g}.csv",
                       _csv_text(header, rows, spec.meta))
        except Exception as exc:
            rec = {"pol": p.value, "vmax_lz": float(vmax), "status": "error",
                   "error": f"{type(exc).__name__}: {exc}"}
        records.append(rec)
    result = SweepResult(spec, records)
    if spec.out_dir:
        _write(Path(spec.out_dir) / "summary.json", _json_text(result.summary()))
    return result


def coupling_trace(cfg: EvolutionConfig, n_modes: int = 4, n_samples: int = 2000):
    """M_mn(t) for m < n <= n_modes over one period: (t_ps, V, labels, values)."""
    prof = cfg.profile
    t = np.linspace(0.0, prof.period, n_samples, endpoint=False)
    V = potential(t, prof)
    dV = potential_rate(t, prof) * cfg.scale.time_unit_ps
    pairs = [(m, n) for m in range(1, n_modes + 1) for n in range(m + 1, n_modes + 1)]
    vals = np.empty((t.size, len(pairs)))
    for i, (v, dv) in enumerate(zip(V, dV)):
        M = snapshot_matrix(solve_spectrum(v, cfg.eta, cfg.pol, cfg.k_perp, n_modes), dv)
        vals[i] = [M[m - 1, n - 1] for m, n in pairs]
    return t, V, [f"M_{m}_{n}" for m, n in pairs], vals


def run(spec: SweepSpec) -> SweepResult:
    return {"spectrum_scan": spectrum_scan, "evolve": evolve_experiment,
            "period_sweep": period_sweep, "position_sweep": position_sweep}[spec.scenario](spec)
