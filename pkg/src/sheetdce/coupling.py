"""Inter-mode coupling ``M_mn = (d Psi_m / dt, Psi_n)`` of the instantaneous basis.

Differentiating the eigenproblem with respect to the sheet potential gives the
closed form

    M_mn = kappa * dV/dt * c_m c_n / (k_m^2 - k_n^2),   m != n,

with ``c = Psi(d)`` and ``kappa = 1`` for TE, ``c = Phi'(d)`` and
``kappa = -1 / k_perp^2`` for TM.  A Gauss-Legendre route that differentiates
the mode functions themselves (complex step) is kept as an independent check.

Times are scaled (units of ``Lz / c``) unless a name ends in ``_ps``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .core import Polarization, ScaledConfig
from .pulse import PulseProfile, potential, potential_rate
from .spectrum import (
    SpectrumRates,
    SpectrumSnapshot,
    _amplitudes,
    solve_spectra,
    solve_spectrum,
)

MDOT_STEP_PS = 1e-3


def coupling_gain(pol, k_perp: float) -> float:
    """Prefactor kappa multiplying dV/dt in the closed-form coupling."""
    return 1.0 if Polarization.parse(pol) is Polarization.TE else -1.0 / k_perp**2


def closed_form_matrix(k, coef, gain) -> np.ndarray:
    """``gain * c_m c_n / (k_m^2 - k_n^2)`` with a zero diagonal."""
    k = np.asarray(k, dtype=float)
    ksq = k * k
    denom = ksq[:, None] - ksq[None, :]
    np.fill_diagonal(denom, np.inf)
    return gain * np.outer(coef, coef) / denom


def _check_rates(snapshot: SpectrumSnapshot, rates: SpectrumRates) -> None:
    if rates.V_Lz != snapshot.V_Lz:
        raise ValueError(
            f"rates were computed at V*Lz={rates.V_Lz!r}, snapshot is at V*Lz={snapshot.V_Lz!r}"
        )
    expected = snapshot.dk_dV * rates.dV_dt
    if rates.dk_dt.shape != expected.shape or not np.allclose(
        rates.dk_dt, expected, rtol=1e-12, atol=1e-300
    ):
        raise ValueError("eigenvalue rates do not match the snapshot's dk/dV")


def gauss_legendre_nodes(eta: float, k_max: float, n_nodes: int | None = None):
    """Nodes and weights on [0, d] and [d, 1], enough to resolve ``k_max``."""
    out = []
    for lo, hi in ((0.0, eta), (eta, 1.0)):
        length = hi - lo
        n = n_nodes or (math.ceil(4 + k_max / math.pi) + math.ceil(k_max * length) + 8)
        x, w = np.polynomial.legendre.leggauss(n)
        out.append((lo + 0.5 * length * (x + 1.0), 0.5 * length * w))
    z = np.concatenate([o[0] for o in out])
    w = np.concatenate([o[1] for o in out])
    return z, w


def _profiles(z, k, A, B, eta, pol):
    """Mode profiles on nodes z for (possibly complex) k, A, B arrays; shape (ell, nz)."""
    f = np.sin if pol is Polarization.TE else np.cos
    k, A, B = (np.asarray(x)[:, None] for x in (k, A, B))
    left = A * f(k * z) / np.sqrt(eta)
    right = B * f(k * (1.0 - z)) / np.sqrt(1.0 - eta)
    return np.where(z <= eta, left, right)


def quadrature_matrix(snapshot: SpectrumSnapshot, dV_dt: float, n_nodes: int | None = None):
    """All ``M_mn`` by quadrature of dPsi_m/dV * Psi_n.

    dPsi/dV is taken by complex-step differentiation of the normalized mode
    function along the eigenvalue branch (k + i h dk/dV, V + i h), so it uses
    neither the closed form nor Hellmann-Feynman.
    """
    s = snapshot
    h = 1e-30
    kc = s.k + 1j * h * s.dk_dV
    Vc = s.V_Lz + 1j * h
    Ac, Bc = _amplitudes(kc, Vc, s.eta, s.pol, s.k_perp)
    z, w = gauss_legendre_nodes(s.eta, float(s.k.max()), n_nodes)
    dpsi = _profiles(z, kc, Ac, Bc, s.eta, s.pol).imag / h
    psi = _profiles(z, s.k, s.normA, s.normB, s.eta, s.pol)
    return dV_dt * (dpsi * w) @ psi.T


def coupling_element(m: int, n: int, snapshot: SpectrumSnapshot, rates: SpectrumRates,
                     method: str = "closed") -> float:
    """Single element ``M_mn`` (1-based mode indices) in units of 1/time of ``rates``."""
    _check_rates(snapshot, rates)
    ell = snapshot.ell_max
    if not (1 <= m <= ell and 1 <= n <= ell):
        raise IndexError(f"mode indices ({m}, {n}) outside 1..{ell}")
    if method == "closed":
        if m == n or rates.dV_dt == 0.0:
            return 0.0
        c = snapshot.sheet_amplitude
        k2 = snapshot.k**2
        gain = coupling_gain(snapshot.pol, snapshot.k_perp) * rates.dV_dt
        return float(gain * c[m - 1] * c[n - 1] / (k2[m - 1] - k2[n - 1]))
    if method == "quadrature":
        return float(quadrature_matrix(snapshot, rates.dV_dt)[m - 1, n - 1])
    raise ValueError(f"unknown method {method!r}")


def snapshot_matrix(snapshot: SpectrumSnapshot, dV_dt: float) -> np.ndarray:
    """Closed-form coupling matrix for a snapshot and potential rate."""
    gain = coupling_gain(snapshot.pol, snapshot.k_perp) * dV_dt
    if gain == 0.0:
        return np.zeros((snapshot.ell_max, snapshot.ell_max))
    return closed_form_matrix(snapshot.k, snapshot.sheet_amplitude, gain)


@dataclass(frozen=True)
class CouplingMatrix:
    """Coupling at time ``t_ps``; M in units of c/Lz, Mdot in (c/Lz)^2.

    ``Mdot`` is a centered difference with step ``MDOT_STEP_PS``;
    ``mdot_error`` is the Richardson estimate from the doubled step.
    """

    t_ps: float
    M: np.ndarray
    Mdot: np.ndarray
    mdot_error: float


def _matrix_at(t_ps, profile, eta, pol, k_perp, ell_max, scale):
    V = potential(t_ps, profile)
    dV = potential_rate(t_ps, profile) * scale.time_unit_ps
    snap = solve_spectrum(V, eta, pol, k_perp, ell_max)
    return snapshot_matrix(snap, dV)


def coupling_matrix(t_ps: float, profile: PulseProfile, eta: float, pol, k_perp: float,
                    ell_max: int, scale: ScaledConfig = ScaledConfig()) -> CouplingMatrix:
    """Assemble M and dM/dt at one instant from fresh spectrum solves."""
    h = MDOT_STEP_PS
    mats = {j: _matrix_at(t_ps + j * h, profile, eta, pol, k_perp, ell_max, scale)
            for j in (-2, -1, 0, 1, 2)}
    h_s = scale.time_to_scaled(h)
    d1 = (mats[1] - mats[-1]) / (2 * h_s)
    d2 = (mats[2] - mats[-2]) / (4 * h_s)
    err = float(np.abs(d1 - d2).max() / 3.0)
    return CouplingMatrix(float(t_ps), mats[0], d1, err)


@dataclass
class CouplingTable:
    """One driving period of spectrum data at half-step spacing.

    Row ``j`` belongs to ``t_j = j * period / n_phase``.  The coupling matrix
    is rebuilt on demand from ``k`` and ``coef`` (the sheet amplitudes), which
    is far cheaper to store than ``n_phase`` dense matrices.
    """

    profile: PulseProfile
    eta: float
    pol: Polarization
    k_perp: float
    scale: ScaledConfig
    t_ps: np.ndarray
    V: np.ndarray
    dV_dt: np.ndarray      # per scaled time
    k: np.ndarray          # (n_phase, ell)
    coef: np.ndarray       # (n_phase, ell)
    kappa: float
    _splines: tuple | None = field(default=None, repr=False)

    @property
    def n_phase(self) -> int:
        return self.t_ps.size

    @property
    def ell_max(self) -> int:
        return self.k.shape[1]

    @property
    def period(self) -> float:
        """Driving period in scaled time."""
        return self.scale.time_to_scaled(self.profile.period)

    @property
    def ksq(self) -> np.ndarray:
        return self.k * self.k

    @property
    def omega2(self) -> np.ndarray:
        return self.k_perp**2 + self.ksq

    @property
    def gain(self) -> np.ndarray:
        return self.kappa * self.dV_dt

    @property
    def omega0(self) -> np.ndarray:
        n = np.arange(1, self.ell_max + 1)
        return np.hypot(self.k_perp, n * np.pi)

    def active_modes(self, rel_tol: float = 1e-12) -> np.ndarray:
        """Modes that actually couple to the sheet somewhere in the period."""
        amp = np.abs(self.coef * np.sqrt(np.abs(self.gain))[:, None]).max(axis=0)
        top = amp.max()
        if top == 0.0:
            return np.zeros(self.ell_max, dtype=bool)
        return amp > rel_tol * top

    def matrix(self, j: int) -> np.ndarray:
        g = self.gain[j]
        if g == 0.0:
            return np.zeros((self.ell_max, self.ell_max))
        return closed_form_matrix(self.k[j], self.coef[j], g)

    # off-grid access, used by the adaptive integrator and by rhs()
    def _build_splines(self):
        t = np.append(self.t_ps, self.profile.period)
        k = np.vstack([self.k, self.k[:1]])
        c = np.vstack([self.coef, self.coef[:1]])
        self._splines = (CubicSpline(t, k, bc_type="periodic"),
                         CubicSpline(t, c, bc_type="periodic"))

    def interpolate(self, t_ps):
        """(k, coef, dV_dt) at arbitrary time via periodic cubic splines."""
        if self._splines is None:
            self._build_splines()
        tau = np.mod(t_ps, self.profile.period)
        ks, cs = self._splines
        dV = potential_rate(tau, self.profile) * self.scale.time_unit_ps
        return ks(tau), cs(tau), dV

    def omega2_at(self, t_ps) -> np.ndarray:
        k = self.interpolate(t_ps)[0]
        return self.k_perp**2 + k * k

    def matrix_at(self, t_ps) -> np.ndarray:
        k, c, dV = self.interpolate(t_ps)
        g = self.kappa * dV
        if g == 0.0:
            return np.zeros((self.ell_max, self.ell_max))
        return closed_form_matrix(k, c, g)

    def interpolation_error(self, n_holdout: int = 64) -> float:
        """Max spline error of M at held-out midpoints, relative to max |M|."""
        idx = np.linspace(0, self.n_phase - 1, n_holdout).astype(int)
        t_mid = self.t_ps[idx] + 0.5 * self.profile.period / self.n_phase
        V = potential(t_mid, self.profile)
        dV = potential_rate(t_mid, self.profile) * self.scale.time_unit_ps
        exact = solve_spectra(V, self.eta, self.pol, self.k_perp, self.ell_max)
        coef = exact.sheet_amplitude
        top = max(float(np.abs(self.gain).max()) * float(np.abs(self.coef).max()) ** 2, 1e-300)
        scale_m = 0.0
        err = 0.0
        for i, t in enumerate(t_mid):
            Me = closed_form_matrix(exact.k[i], coef[i], self.kappa * dV[i])
            Mi = self.matrix_at(t)
            err = max(err, float(np.abs(Me - Mi).max()))
            scale_m = max(scale_m, float(np.abs(Me).max()))
        return err / max(scale_m, top * 1e-300)


def build_period_table(profile: PulseProfile, eta: float, pol, k_perp: float, ell_max: int,
                       n_phase: int, scale: ScaledConfig = ScaledConfig()) -> CouplingTable:
    """Tabulate spectrum and coupling factors at ``n_phase`` equispaced times of one period."""
    pol = Polarization.parse(pol)
    t_ps = np.arange(n_phase) * (profile.period / n_phase)
    V = potential(t_ps, profile)
    dV = potential_rate(t_ps, profile) * scale.time_unit_ps
    uniq, inv = np.unique(V, return_inverse=True)
    spectra = solve_spectra(uniq, eta, pol, k_perp, ell_max)
    return CouplingTable(
        profile=profile, eta=float(eta), pol=pol, k_perp=float(k_perp), scale=scale,
        t_ps=t_ps, V=V, dV_dt=dV,
        k=spectra.k[inv], coef=spectra.sheet_amplitude[inv],
        kappa=coupling_gain(pol, k_perp),
    )


def refined_table(profile: PulseProfile, eta: float, pol, k_perp: float, ell_max: int,
                  scale: ScaledConfig = ScaledConfig(), min_samples: int = 2000,
                  tol: float = 1e-6, max_samples: int = 256_000) -> CouplingTable:
    """Table dense enough that spline-interpolated M meets ``tol`` on held-out points."""
    n = min_samples
    while True:
        table = build_period_table(profile, eta, pol, k_perp, ell_max, n, scale)
        if table.interpolation_error() < tol or n >= max_samples:
            return table
        n *= 2
