"""Units, cavity geometry, mode labels and physical-parameter conversions.

Internally everything runs in scaled units: lengths in units of ``Lz``,
times in units of ``Lz / c`` (so ``c = 1``), and the sheet potential as the
dimensionless product ``V * Lz``.  Physical units only appear at the edges
(pulse timings in picoseconds, frequencies in rad/s).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

SPEED_OF_LIGHT = 299_792_458.0  # m/s

# Vmax*Lz per uJ/pulse; 50 uJ -> 5000 and 0.01 uJ -> 1 both lie on this line.
POTENTIAL_PER_MICROJOULE = 100.0


class Polarization(str, enum.Enum):
    TE = "TE"
    TM = "TM"

    @classmethod
    def parse(cls, value: str | Polarization) -> Polarization:
        if isinstance(value, Polarization):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise ValueError(f"unknown polarization {value!r}; expected TE or TM") from None


@dataclass(frozen=True)
class CavityGeometry:
    """Rectangular cavity ``Lx x Ly x Lz`` (meters) cut by a sheet at ``z = eta * Lz``."""

    Lx: float = 0.05
    Ly: float = 0.05
    Lz: float = 0.10
    eta: float = 0.5

    def __post_init__(self) -> None:
        for name in ("Lx", "Ly", "Lz"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if not 0.0 < self.eta < 1.0:
            raise ValueError(f"sheet position eta must lie in (0, 1), got {self.eta!r}")

    @property
    def d(self) -> float:
        """Sheet distance from the z = 0 wall in meters."""
        return self.eta * self.Lz

    def with_eta(self, eta: float) -> CavityGeometry:
        return CavityGeometry(self.Lx, self.Ly, self.Lz, eta)


@dataclass(frozen=True)
class ModeIndex:
    mx: int = 1
    my: int = 1
    mz: int = 1

    def __post_init__(self) -> None:
        for name in ("mx", "my", "mz"):
            value = getattr(self, name)
            if int(value) != value or value < 0:
                raise ValueError(f"mode index {name} must be a non-negative integer, got {value!r}")
        if self.mx == self.my == self.mz == 0:
            raise ValueError("mode (0, 0, 0) is not a cavity mode")

    def label(self, pol: Polarization | str | None = None) -> str:
        prefix = Polarization.parse(pol).value if pol is not None else ""
        return f"{prefix}{self.mx}{self.my}{self.mz}"


def stationary_frequency(mode: ModeIndex, geom: CavityGeometry) -> float:
    """Unperturbed angular frequency (rad/s) of cavity mode ``mode``."""
    return SPEED_OF_LIGHT * math.pi * math.sqrt(
        (mode.mx / geom.Lx) ** 2 + (mode.my / geom.Ly) ** 2 + (mode.mz / geom.Lz) ** 2
    )


def transverse_wavenumber(mx: int, my: int, geom: CavityGeometry) -> float:
    """``k_perp * Lz`` for the transverse family (mx, my), i.e. in scaled units."""
    return math.pi * geom.Lz * math.sqrt((mx / geom.Lx) ** 2 + (my / geom.Ly) ** 2)


def power_to_potential(laser_energy_uj: float) -> float:
    """Peak dimensionless potential ``Vmax * Lz`` for a laser energy in uJ/pulse.

    Linear interpolation through the two published operating points, so it is
    approximate away from them.
    """
    if laser_energy_uj < 0:
        raise ValueError(f"laser energy must be non-negative, got {laser_energy_uj!r}")
    return POTENTIAL_PER_MICROJOULE * laser_energy_uj


def potential_to_power(vmax_lz: float) -> float:
    if vmax_lz < 0:
        raise ValueError(f"potential must be non-negative, got {vmax_lz!r}")
    return vmax_lz / POTENTIAL_PER_MICROJOULE


def plasma_frequency(V: float, ds: float) -> float:
    """Plasma frequency (rad/s) of the sheet.

    ``V`` is the sheet potential in 1/m, which already absorbs
    ``e^2 n_s / (m* eps0 c^2)``; ``ds`` is the penetration depth in meters.
    """
    if not ds > 0:
        raise ValueError(f"penetration depth must be positive, got {ds!r}")
    if V < 0:
        raise ValueError(f"potential must be non-negative, got {V!r}")
    return SPEED_OF_LIGHT * math.sqrt(V / ds)


@dataclass(frozen=True)
class ScaledConfig:
    """Conversion between physical and scaled units for one geometry."""

    geometry: CavityGeometry = CavityGeometry()

    @property
    def time_unit_ps(self) -> float:
        """Length of one scaled time unit (``Lz / c``) in picoseconds."""
        return self.geometry.Lz / SPEED_OF_LIGHT * 1e12

    @property
    def frequency_unit(self) -> float:
        """One scaled angular frequency unit (``c / Lz``) in rad/s."""
        return SPEED_OF_LIGHT / self.geometry.Lz

    def time_to_scaled(self, t_ps):
        return t_ps / self.time_unit_ps

    def time_to_ps(self, t_scaled):
        return t_scaled * self.time_unit_ps

    def length_to_scaled(self, x_m):
        return x_m / self.geometry.Lz

    def length_to_m(self, x_scaled):
        return x_scaled * self.geometry.Lz

    def potential_to_scaled(self, V_per_m):
        """Sheet potential in 1/m -> dimensionless ``V * Lz``."""
        return V_per_m * self.geometry.Lz

    def potential_to_physical(self, V_Lz):
        return V_Lz / self.geometry.Lz

    def frequency_to_physical(self, omega_scaled):
        return omega_scaled * self.frequency_unit

    def frequency_to_scaled(self, omega):
        return omega / self.frequency_unit

    def k_perp(self, mx: int = 1, my: int = 1) -> float:
        return transverse_wavenumber(mx, my, self.geometry)
