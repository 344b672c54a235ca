"""Laser-driven surface-density waveform ``V(t) * Lz``.

One period is a flat-top plateau between two half Gaussians of different
widths (fast rise, slower recombination tail).  Times are in picoseconds.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace

import numpy as np

# exp(-x) below this is flushed to zero to keep denormals out of the tables
_TAIL_FLOOR = 1e-30
_LOG_TAIL_FLOOR = -np.log(_TAIL_FLOOR)


@dataclass(frozen=True)
class PulseProfile:
    vmax_lz: float
    period: float = 111.1
    t_e: float = 35.0
    t_c: float = 7.0
    sigma1: float = 4.0
    sigma2: float = 8.0
    n_pulses: int = 11

    def __post_init__(self) -> None:
        if self.vmax_lz < 0:
            raise ValueError(f"vmax_lz must be non-negative, got {self.vmax_lz!r}")
        for name in ("period", "t_e", "t_c", "sigma1", "sigma2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if int(self.n_pulses) != self.n_pulses or self.n_pulses < 1:
            raise ValueError(f"n_pulses must be a positive integer, got {self.n_pulses!r}")
        if self.t_e + self.t_c + 3.0 * self.sigma2 >= self.period:
            raise ValueError(
                f"pulse does not relax within one period: t_e + t_c + 3*sigma2 = "
                f"{self.t_e + self.t_c + 3 * self.sigma2:g} ps >= T = {self.period:g} ps"
            )

    @property
    def duration(self) -> float:
        return self.n_pulses * self.period

    def with_period(self, period: float) -> PulseProfile:
        return replace(self, period=period)

    def with_vmax(self, vmax_lz: float) -> PulseProfile:
        return replace(self, vmax_lz=vmax_lz)


def _segments(t, profile: PulseProfile):
    tau = np.mod(np.asarray(t, dtype=float), profile.period)
    rise_end = profile.t_e
    fall_start = profile.t_e + profile.t_c
    x_rise = (tau - rise_end) / profile.sigma1
    x_fall = (tau - fall_start) / profile.sigma2
    rising = tau < rise_end
    falling = tau > fall_start
    expo = np.where(rising, 0.5 * x_rise**2, np.where(falling, 0.5 * x_fall**2, 0.0))
    shape = np.where(expo > _LOG_TAIL_FLOOR, 0.0, np.exp(-np.minimum(expo, _LOG_TAIL_FLOOR)))
    return tau, rising, falling, x_rise, x_fall, shape


def potential(t, profile: PulseProfile):
    """``V(t) * Lz`` at time(s) ``t`` in ps (periodic in ``profile.period``)."""
    shape = _segments(t, profile)[-1]
    out = profile.vmax_lz * shape
    return float(out) if np.ndim(out) == 0 else out


def potential_rate(t, profile: PulseProfile):
    """Time derivative of ``V(t) * Lz`` in 1/ps."""
    _, rising, falling, x_rise, x_fall, shape = _segments(t, profile)
    slope = np.where(
        rising, -x_rise / profile.sigma1, np.where(falling, -x_fall / profile.sigma2, 0.0)
    )
    out = profile.vmax_lz * shape * slope
    return float(out) if np.ndim(out) == 0 else out


def pulse_table(profile: PulseProfile, n_samples: int = 2000, n_periods: int = 1):
    t = np.linspace(0.0, n_periods * profile.period, n_samples * n_periods, endpoint=False)
    return t, potential(t, profile), potential_rate(t, profile)


def dump_csv(profile: PulseProfile, n_samples: int = 2000, n_periods: int = 1) -> str:
    """CSV text with columns ``t_ps, V_Lz, dV_Lz_dt_per_ps``."""
    t, v, dv = pulse_table(profile, n_samples, n_periods)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t_ps", "V_Lz", "dV_Lz_dt_per_ps"])
    for row in zip(t, v, dv):
        writer.writerow([f"{x:.10g}" for x in row])
    return buf.getvalue()
