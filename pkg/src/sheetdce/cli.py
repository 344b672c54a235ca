"""``dce`` command line.

    dce spectrum [scan] --config run.ini [--out DIR]
    dce evolve --config run.ini [--out DIR] [--pol TM --eta 0.3 ...]
    dce sweep-period --config run.ini [--out DIR]
    dce sweep-position --config run.ini [--out DIR]
    dce pulse dump [--config run.ini] [--out FILE]
    dce coupling dump [--config run.ini] [--out FILE]

Exit status is 0 only when every grid point succeeded.
"""
from __future__ import annotations

import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import click

from . import __version__, kernels
from .config import ConfigError, RunConfig, default_config, load_config
from .core import Polarization
from .experiments import SweepSpec, _csv_text, coupling_trace, run
from .pulse import dump_csv


def _load(path) -> RunConfig:
    try:
        return load_config(path) if path else default_config()
    except (ConfigError, OSError) as exc:
        raise click.UsageError(f"config: {exc}") from None


def _finish(result, out) -> None:
    n = len(result.records)
    click.echo(json.dumps({"scenario": result.spec.scenario, "config_hash": result.spec.config_hash,
                           "points": n, "failed": result.n_failed,
                           "out": str(out) if out else None}, sort_keys=True))
    for r in result.records:
        if r["status"] != "ok":
            click.echo(f"failed: {r}", err=True)
    sys.exit(0 if result.ok else 1)


config_opt = click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                          help="INI run configuration.")
out_opt = click.option("--out", "out_dir", type=click.Path(file_okay=False),
                       help="Output directory (created if missing).")


@click.group()
@click.version_option(__version__)
@click.option("-v", "--verbose", count=True, help="Log progress (-vv for debug).")
def main(verbose):
    """Photon creation in a cavity with a laser-pulsed plasma sheet."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger(__name__).debug("kernel backend: %s", kernels.BACKEND)


def _spectrum(config_path, out_dir):
    cfg = _load(config_path)
    out = Path(out_dir or "dce_out/spectrum")
    _finish(run(SweepSpec.from_config(cfg, "spectrum_scan", out)), out)


@main.group(invoke_without_command=True)
@config_opt
@out_opt
@click.pass_context
def spectrum(ctx, config_path, out_dir):
    """k_n(t) over one period and frequency shifts (runs `scan` by default)."""
    if ctx.invoked_subcommand is None:
        _spectrum(config_path, out_dir)


@spectrum.command("scan")
@config_opt
@out_opt
def spectrum_scan_cmd(config_path, out_dir):
    """k_n(t) CSV per polarization and peak potential."""
    _spectrum(config_path, out_dir)


@main.command()
@config_opt
@out_opt
@click.option("--pol", type=click.Choice(["TE", "TM"], case_sensitive=False))
@click.option("--eta", type=float, help="Sheet position d/Lz.")
@click.option("--period", "T", type=float, help="Driving period T in ps.")
@click.option("--vmax", type=float, help="Peak potential Vmax*Lz.")
@click.option("--ell-max", type=int)
@click.option("--step", "h", type=float, help="RK4 step in ps.")
@click.option("--n-pulses", type=int)
@click.option("--sample", type=float, help="Sampling interval in ps.")
@click.option("--single-mode/--multimode", default=None, help="Switch inter-mode coupling off.")
@click.option("--single-mode-kind", type=click.Choice(["zero_coupling", "truncate"]),
              default=None, help="M = 0 with all modes, or mode 1 alone.")
def evolve(config_path, out_dir, pol, eta, T, vmax, ell_max, h, n_pulses, sample,
           single_mode, single_mode_kind):
    """Photon numbers N_m(t) over n_pulses periods."""
    cfg = _load(config_path)
    ev = cfg.evolution
    prof = ev.profile
    try:
        prof = replace(prof, **{k: v for k, v in
                                {"period": T, "vmax_lz": vmax, "n_pulses": n_pulses}.items()
                                if v is not None})
        kw = {"profile": prof}
        if pol:
            kw["pol"] = Polarization.parse(pol)
        if eta is not None:
            kw["geometry"] = ev.geometry.with_eta(eta)
        if ell_max is not None:
            kw["ell_max"] = ell_max
        if h is not None:
            kw["step_ps"] = h
        if sample is not None:
            kw["sample_ps"] = sample
        if single_mode is not None or single_mode_kind:
            on = single_mode if single_mode is not None else True
            kw["single_mode"] = (single_mode_kind or ev.single_mode or "zero_coupling") if on else None
        ev = replace(ev, **kw)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from None
    cfg = replace(cfg, evolution=ev)
    out = Path(out_dir or "dce_out/evolve")
    _finish(run(SweepSpec.from_config(cfg, "evolve", out)), out)


@main.command("sweep-period")
@config_opt
@out_opt
def sweep_period(config_path, out_dir):
    """N_111 after n_pulses periods versus driving period (resumable)."""
    cfg = _load(config_path)
    out = Path(out_dir or "dce_out/sweep_period")
    _finish(run(SweepSpec.from_config(cfg, "period_sweep", out)), out)


@main.command("sweep-position")
@config_opt
@out_opt
def sweep_position(config_path, out_dir):
    """N_111 at the optimum period versus sheet position (resumable)."""
    cfg = _load(config_path)
    out = Path(out_dir or "dce_out/sweep_position")
    _finish(run(SweepSpec.from_config(cfg, "position_sweep", out)), out)


def _emit(text: str, out_file) -> None:
    if out_file:
        Path(out_file).parent.mkdir(parents=True, exist_ok=True)
        Path(out_file).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


@main.group()
def pulse():
    """Pulse waveform tools."""


@pulse.command("dump")
@config_opt
@click.option("--out", "out_file", type=click.Path(dir_okay=False), help="CSV file (default stdout).")
@click.option("--samples", default=2000, show_default=True, help="Samples per period.")
@click.option("--periods", default=1, show_default=True)
def pulse_dump(config_path, out_file, samples, periods):
    """CSV of V(t)*Lz and its rate."""
    cfg = _load(config_path)
    _emit(dump_csv(cfg.evolution.profile, samples, periods), out_file)


@main.group()
def coupling():
    """Coupling-matrix tools."""


@coupling.command("dump")
@config_opt
@click.option("--out", "out_file", type=click.Path(dir_okay=False), help="CSV file (default stdout).")
@click.option("--modes", default=4, show_default=True, help="Pairs m < n <= modes.")
@click.option("--samples", default=2000, show_default=True)
def coupling_dump(config_path, out_file, modes, samples):
    """M_mn(t) over one period, in units of c/Lz."""
    cfg = _load(config_path)
    ev = cfg.evolution
    t, V, labels, vals = coupling_trace(ev, modes, samples)
    rows = [[ti, vi, *row] for ti, vi, row in zip(t, V, vals)]
    meta = {"config_hash": cfg.hash(), "sheetdce_version": __version__, "pol": ev.pol.value}
    _emit(_csv_text(["t_ps", "V_Lz", *labels], rows, meta), out_file)


if __name__ == "__main__":
    main()
