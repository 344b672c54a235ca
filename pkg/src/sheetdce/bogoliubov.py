"""Bogoliubov coefficients, photon numbers and the unitarity diagnostic.

With stationary frequencies ``w_m`` the out-mode projections are

    beta_mn  = sqrt(w_m/2) P_mn - i Q_mn / sqrt(2 w_m)
    alpha_mn = sqrt(w_m/2) P_mn + i Q_mn / sqrt(2 w_m)

where ``Q = dP/dt + M^T P`` is carried by the evolution, so no coupling
matrix is needed at extraction time.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .spectrum import SpectrumSnapshot

IN_PULSE_FRACTION = 1e-3


class InPulseExtractionWarning(UserWarning):
    """Extraction while the sheet is on; stationary and instantaneous bases differ."""


@dataclass(frozen=True)
class BogoliubovResult:
    t: float
    alpha: np.ndarray
    beta: np.ndarray
    N: np.ndarray
    N_total: float
    unitarity_dev: float


def stationary_omega(k_perp: float, ell_max: int) -> np.ndarray:
    """Empty-cavity frequencies ``sqrt(k_perp^2 + (n pi)^2)``, n = 1..ell_max (scaled)."""
    return np.hypot(k_perp, np.pi * np.arange(1, ell_max + 1))


def coefficients(P, Q, omega):
    """(alpha, beta) from stacked P, Q arrays (..., ell, ncols) and per-row omega."""
    w = np.asarray(omega, dtype=float)[:, None]
    wP = w * P
    iQ = 1j * Q
    r = 1.0 / np.sqrt(2.0 * w)
    return (wP + iQ) * r, (wP - iQ) * r


def _frequencies(spectrum, basis: str) -> np.ndarray:
    if isinstance(spectrum, SpectrumSnapshot):
        if basis == "instantaneous":
            return spectrum.omega
        return stationary_omega(spectrum.k_perp, spectrum.ell_max)
    return np.asarray(spectrum, dtype=float)


def _check_basis(spectrum, vmax_lz):
    if vmax_lz and isinstance(spectrum, SpectrumSnapshot):
        if spectrum.V_Lz > IN_PULSE_FRACTION * vmax_lz:
            warnings.warn(
                f"extracting at V*Lz={spectrum.V_Lz:.3g} > {IN_PULSE_FRACTION:g}*Vmax;"
                " stationary basis does not match the instantaneous one",
                InPulseExtractionWarning, stacklevel=3)


def beta_matrix(state, spectrum, vmax_lz: float | None = None,
                basis: str = "stationary") -> np.ndarray:
    """beta at the state's time.

    ``spectrum`` is the snapshot at that time (or an explicit frequency array).
    ``basis="instantaneous"`` projects on the frozen-V frequencies instead.
    """
    _check_basis(spectrum, vmax_lz)
    return coefficients(state.P, state.Q, _frequencies(spectrum, basis))[1]


def alpha_matrix(state, spectrum, vmax_lz: float | None = None,
                 basis: str = "stationary") -> np.ndarray:
    _check_basis(spectrum, vmax_lz)
    return coefficients(state.P, state.Q, _frequencies(spectrum, basis))[0]


def photon_numbers(beta) -> np.ndarray:
    """N_m = sum_n |beta_mn|^2 (vacuum initial state)."""
    beta = np.asarray(beta)
    return (beta.real**2 + beta.imag**2).sum(axis=-1)


def unitarity_deviation(alpha, beta):
    """max_m |1 - sum_n (|alpha_mn|^2 - |beta_mn|^2)|; batched over leading axes."""
    alpha = np.asarray(alpha)
    beta = np.asarray(beta)
    if alpha.shape != beta.shape:
        raise ValueError(f"shape mismatch {alpha.shape} vs {beta.shape}")
    norm = photon_numbers(alpha) - photon_numbers(beta)
    return np.abs(1.0 - norm).max(axis=-1)


def bogoliubov(state, spectrum, vmax_lz: float | None = None,
               basis: str = "stationary") -> BogoliubovResult:
    """All diagnostics for one state."""
    _check_basis(spectrum, vmax_lz)
    alpha, beta = coefficients(state.P, state.Q, _frequencies(spectrum, basis))
    N = photon_numbers(beta)
    return BogoliubovResult(
        t=float(state.t), alpha=alpha, beta=beta, N=N,
        N_total=float(N.sum()), unitarity_dev=float(unitarity_deviation(alpha, beta)),
    )
