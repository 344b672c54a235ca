"""Instantaneous axial spectrum of the cavity with a delta-like sheet.

For a frozen sheet potential ``V`` (dimensionless ``V * Lz``) the axial
problem on ``0 < z < 1`` has eigenfunctions

* TE: ``A sin(k z)/sqrt(d)`` left of the sheet, ``B sin(k (1-z))/sqrt(1-d)``
  right of it, with ``disc Psi = 0`` and ``disc Psi' = V Psi(d)``;
* TM: the same with cosines, ``disc Phi' = 0`` and
  ``disc Phi = (V / k_perp^2) Phi'(d)``.

Eigenvalues are located by a monotone counting phase inside the invariant
bracket of each mode and checked against the cleared characteristic function
(no quotient, so no poles).  All quantities are in scaled units (``Lz = 1``).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import Polarization, ScaledConfig
from .pulse import PulseProfile, potential


class SpectrumError(RuntimeError):
    pass


class BracketError(SpectrumError):
    pass


class DegenerateRootError(SpectrumError):
    pass


def characteristic(k, V, eta, pol, k_perp):
    """Cleared characteristic function; its positive roots are the eigenvalues."""
    pol = Polarization.parse(pol)
    k = np.asarray(k, dtype=float) if not np.iscomplexobj(k) else np.asarray(k)
    s = np.sin(k * eta) * np.sin(k * (1.0 - eta))
    if pol is Polarization.TE:
        return k * np.sin(k) + V * s
    return np.sin(k) - (V * k / k_perp**2) * s


def _characteristic_partials(k, V, eta, pol, k_perp):
    """(dG/dk, dG/dV) of the cleared characteristic function."""
    s1, c1 = np.sin(k * eta), np.cos(k * eta)
    s2, c2 = np.sin(k * (1.0 - eta)), np.cos(k * (1.0 - eta))
    ss = s1 * s2
    dss = eta * c1 * s2 + (1.0 - eta) * s1 * c2
    if pol is Polarization.TE:
        return np.sin(k) + k * np.cos(k) + V * dss, ss
    kp2 = k_perp**2
    return np.cos(k) - (V / kp2) * (ss + k * dss), -(k / kp2) * ss


def eigen_brackets(ell_max: int, pol) -> tuple[np.ndarray, np.ndarray]:
    """Invariant brackets [lo, hi] holding the n-th eigenvalue for every V >= 0."""
    return kernels._fallback.brackets(ell_max, Polarization.parse(pol) is Polarization.TM)


def _direction_error(k, a, b, da, db, scale):
    """Relative size of the direction error of (a, b) from rounding.

    Two sources: the root k is known to about one ulp (turn rate times k),
    and a, b themselves carry absolute rounding of order ``scale``.
    """
    k, a, b, da, db = (np.real(x) for x in (k, a, b, da, db))
    n2 = a * a + b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.abs(k) * np.abs(a * db - b * da) / n2 + scale / np.sqrt(n2)
    return np.where(np.isfinite(r), r, np.inf)


def _amplitudes(k, V, eta, pol, k_perp):
    """Normalized piecewise amplitudes (A, B) with the A > 0 gauge.

    Works elementwise on arrays and on complex input (used by the
    complex-step derivative checks).
    """
    d, e = eta, 1.0 - eta
    s1, c1 = np.sin(k * d), np.cos(k * d)
    s2, c2 = np.sin(k * e), np.cos(k * e)
    # A mode with a node at the sheet on both sides (e.g. at eta = 1/2) never
    # feels V; keep rounding noise in sin(k d) out of the V-weighted branch.
    tol = 1e-13 * (1.0 + np.abs(k))
    s1v = np.where((np.abs(s1) < tol) & (np.abs(s2) < tol), 0.0 * s1, s1)
    if pol is Polarization.TE:
        # continuity: a s1 = b s2 ; jump: -b k c2 - a k c1 = V a s1
        a1, b1 = s2, s1
        a2, b2 = -k * c2, k * c1 + V * s1v
        da1, db1 = e * c2, d * c1
        da2, db2 = -c2 + k * e * s2, c1 - k * d * s1 + V * d * c1
        scale2 = np.abs(np.real(k)) + abs(np.real(V))
        left = 0.5 - np.sin(2 * k * d) / (4 * k * d)
        right = 0.5 - np.sin(2 * k * e) / (4 * k * e)
    else:
        # derivative continuity: -a s1 = b s2 ; jump: b c2 - a c1 = -u k a s1
        u = V / k_perp**2
        a1, b1 = s2, -s1
        a2, b2 = c2, c1 - u * k * s1v
        da1, db1 = e * c2, -d * c1
        da2, db2 = -e * s2, -d * s1 - u * s1v - u * k * d * c1
        scale2 = 1.0 + np.abs(np.real(u * k))
        left = 0.5 + np.sin(2 * k * d) / (4 * k * d)
        right = 0.5 + np.sin(2 * k * e) / (4 * k * e)
    # Both pairs hold at an exact root; keep the better conditioned one.
    use_first = (_direction_error(k, a1, b1, da1, db1, 1.0)
                 <= _direction_error(k, a2, b2, da2, db2, scale2))
    a = np.where(use_first, a1, a2)
    b = np.where(use_first, b1, b2)
    A = a * np.sqrt(d)
    B = b * np.sqrt(e)
    norm = np.sqrt(A * A * left + B * B * right)
    sign = np.where(np.real(A) < 0, -1.0, 1.0)
    return sign * A / norm, sign * B / norm


def _sheet_amplitude(k, A, eta, pol):
    """Psi(d) for TE, Phi'(d) for TM: the quantity the sheet couples to."""
    if pol is Polarization.TE:
        return A * np.sin(k * eta) / np.sqrt(eta)
    return -A * k * np.sin(k * eta) / np.sqrt(eta)


@dataclass(frozen=True)
class SpectrumSnapshot:
    """Eigen-data of the first ``ell_max`` axial modes at one potential."""

    V_Lz: float
    eta: float
    pol: Polarization
    k_perp: float
    k: np.ndarray
    dk_dV: np.ndarray
    normA: np.ndarray
    normB: np.ndarray

    @property
    def ell_max(self) -> int:
        return int(self.k.size)

    @property
    def omega(self) -> np.ndarray:
        return np.sqrt(self.k_perp**2 + self.k**2)

    @property
    def sheet_amplitude(self) -> np.ndarray:
        return _sheet_amplitude(self.k, self.normA, self.eta, self.pol)

    def residual(self) -> np.ndarray:
        return characteristic(self.k, self.V_Lz, self.eta, self.pol, self.k_perp)


@dataclass(frozen=True)
class SpectrumTable:
    """Batch of spectra for many potentials; arrays have shape (n_V, ell_max)."""

    V_Lz: np.ndarray
    eta: float
    pol: Polarization
    k_perp: float
    k: np.ndarray
    dk_dV: np.ndarray
    normA: np.ndarray
    normB: np.ndarray

    @property
    def omega2(self) -> np.ndarray:
        return self.k_perp**2 + self.k**2

    @property
    def sheet_amplitude(self) -> np.ndarray:
        return _sheet_amplitude(self.k, self.normA, self.eta, self.pol)

    def snapshot(self, i: int) -> SpectrumSnapshot:
        return SpectrumSnapshot(
            float(self.V_Lz[i]), self.eta, self.pol, self.k_perp,
            self.k[i].copy(), self.dk_dV[i].copy(), self.normA[i].copy(), self.normB[i].copy(),
        )


def _validate(eta, ell_max):
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must lie in (0, 1), got {eta!r}")
    if int(ell_max) != ell_max or ell_max < 1:
        raise ValueError(f"ell_max must be a positive integer, got {ell_max!r}")


def solve_spectra(V, eta: float, pol, k_perp: float, ell_max: int) -> SpectrumTable:
    """Solve the first ``ell_max`` eigenvalues for every potential in ``V``."""
    pol = Polarization.parse(pol)
    _validate(eta, ell_max)
    V = np.atleast_1d(np.asarray(V, dtype=float))
    if np.any(V < 0) or not np.all(np.isfinite(V)):
        raise ValueError("potentials must be finite and non-negative")
    tm = pol is Polarization.TM
    k = kernels.phase_roots(V, float(eta), tm, float(k_perp) ** 2, int(ell_max))
    if np.isnan(k).any():
        i, n = np.argwhere(np.isnan(k))[0]
        raise BracketError(
            f"no sign change for {pol.value} mode n={n + 1} at V*Lz={V[i]!r}, eta={eta!r}"
        )
    Vb = V[:, None]
    g_k, g_v = _characteristic_partials(k, Vb, eta, pol, k_perp)
    scale = 1.0 + np.abs(k) + np.abs(Vb) * (1.0 if not tm else np.abs(k) / k_perp**2)
    degenerate = np.abs(g_k) < 1e-13 * scale
    if degenerate.any():
        i, n = np.argwhere(degenerate)[0]
        raise DegenerateRootError(
            f"dG/dk vanishes at {pol.value} mode n={n + 1}, V*Lz={V[i]!r}, eta={eta!r}"
        )
    dk_dV = -g_v / g_k
    A, B = _amplitudes(k, Vb, eta, pol, k_perp)
    return SpectrumTable(V, float(eta), pol, float(k_perp), k, dk_dV, A, B)


def solve_spectrum(V: float, eta: float, pol, k_perp: float, ell_max: int) -> SpectrumSnapshot:
    """Eigen-data of the first ``ell_max`` modes at potential ``V * Lz = V``."""
    if V < 0:
        raise ValueError(f"potential must be non-negative, got {V!r}")
    return solve_spectra([V], eta, pol, k_perp, ell_max).snapshot(0)


@dataclass(frozen=True)
class SpectrumRates:
    V_Lz: float
    dV_dt: float
    dk_dt: np.ndarray


def eigenvalue_rate(snapshot: SpectrumSnapshot, dV_dt: float) -> SpectrumRates:
    """Chain rule dk_n/dt = (dk_n/dV) (dV/dt)."""
    if not np.all(np.isfinite(snapshot.dk_dV)):
        raise DegenerateRootError("snapshot carries non-finite dk/dV")
    return SpectrumRates(snapshot.V_Lz, float(dV_dt), snapshot.dk_dV * dV_dt)


def mode_function(z, n: int, snapshot: SpectrumSnapshot):
    """Axial profile of mode ``n`` (1-based) at positions ``z`` in [0, 1]."""
    if not 1 <= n <= snapshot.ell_max:
        raise IndexError(f"mode {n} outside 1..{snapshot.ell_max}")
    z = np.asarray(z, dtype=float)
    if np.any((z < 0) | (z > 1)):
        raise ValueError("z must lie in [0, 1] (units of Lz)")
    k, A, B = snapshot.k[n - 1], snapshot.normA[n - 1], snapshot.normB[n - 1]
    d = snapshot.eta
    f = np.sin if snapshot.pol is Polarization.TE else np.cos
    return np.where(z <= d, A * f(k * z) / np.sqrt(d), B * f(k * (1.0 - z)) / np.sqrt(1.0 - d))


def instantaneous_frequency(snapshot: SpectrumSnapshot, n: int) -> float:
    """omega_n = sqrt(k_perp^2 + k_n^2) in units of c / Lz."""
    if not 1 <= n <= snapshot.ell_max:
        raise IndexError(f"mode {n} outside 1..{snapshot.ell_max}")
    return float(np.hypot(snapshot.k_perp, snapshot.k[n - 1]))


def eigenvalue_trace(profile: PulseProfile, eta, pol, k_perp, ell_max, n_samples=2000,
                     scale: ScaledConfig = ScaledConfig()):
    """k_n(t) over one driving period: returns (t_ps, V, k[n_samples, ell_max])."""
    t = np.linspace(0.0, profile.period, n_samples, endpoint=False)
    V = potential(t, profile)
    uniq, inv = np.unique(V, return_inverse=True)
    table = solve_spectra(uniq, eta, pol, k_perp, ell_max)
    return t, V, table.k[inv]


@dataclass(frozen=True)
class AverageFrequency:
    omega: float        # rad/s, period average of omega_n(t)
    omega0: float       # rad/s, unperturbed
    half_period_ps: float  # pi / omega, the resonant half driving period

    @property
    def shift(self) -> float:
        return self.omega - self.omega0


def average_frequency(profile: PulseProfile, eta, pol, k_perp, n: int = 1, n_samples: int = 4000,
                      scale: ScaledConfig = ScaledConfig()) -> AverageFrequency:
    """Time average of omega_n(t) over one period and its resonance half-period."""
    _, _, k = eigenvalue_trace(profile, eta, pol, k_perp, n, n_samples, scale)
    omega = np.sqrt(k_perp**2 + k[:, n - 1] ** 2).mean()
    kn0 = n * np.pi
    return AverageFrequency(
        omega=scale.frequency_to_physical(omega),
        omega0=scale.frequency_to_physical(np.hypot(k_perp, kn0)),
        half_period_ps=scale.time_to_ps(np.pi / omega),
    )
