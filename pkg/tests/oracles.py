"""Independent reference computations used only by the tests."""
from __future__ import annotations

import numpy as np

from sheetdce.core import ScaledConfig
from sheetdce.coupling import closed_form_matrix, coupling_gain
from sheetdce.pulse import potential, potential_rate
from sheetdce.spectrum import solve_spectra


def _coefficients(t_ps, profile, eta, pol, k_perp, ell, scale):
    V = potential(t_ps, profile)
    dV = potential_rate(t_ps, profile) * scale.time_unit_ps
    uniq, inv = np.unique(V, return_inverse=True)
    sp = solve_spectra(uniq, eta, pol, k_perp, ell)
    k = sp.k[inv]
    c = sp.sheet_amplitude[inv]
    g = coupling_gain(pol, k_perp) * dV
    ksq = k * k
    D = ksq[:, :, None] - ksq[:, None, :]
    idx = np.arange(ell)
    D[:, idx, idx] = np.inf
    M = g[:, None, None] * c[:, :, None] * c[:, None, :] / D
    return k_perp**2 + ksq, M


def second_order_period_map(profile, eta, pol, k_perp, ell, h_ps=1e-4,
                            scale: ScaledConfig = ScaledConfig(), chunk=65536):
    """One-period map of ``y = [P, dP/dt]`` under fixed-step RK4 with step ``h_ps``.

    Uses the second-order form  P'' = -W^2 P + 2 M P' + Mdot P - M^2 P  with
    Mdot from centered differences on a half-step grid.  Because the ODE is
    linear, each RK4 step is a matrix; steps are multiplied in batches.
    """
    T = profile.period
    n = int(round(T / h_ps))
    h = scale.time_to_scaled(T / n)
    d = 2 * ell
    eye = np.eye(d)
    total = np.eye(d)
    fine = 0.5 * T / n   # half-step spacing, also the Mdot stencil
    fine_s = scale.time_to_scaled(fine)

    def A_on(j):
        """A at half-step indices j (contiguous); the grid is padded by one each side for Mdot."""
        t = np.arange(j[0] - 1, j[-1] + 2) * fine
        w2, M = _coefficients(t, profile, eta, pol, k_perp, ell, scale)
        Md = (M[2:] - M[:-2]) / (2 * fine_s)
        w2, M = w2[1:-1], M[1:-1]
        A = np.zeros((j.size, d, d))
        A[:, :ell, ell:] = np.eye(ell)
        lower = Md - M @ M
        lower[:, np.arange(ell), np.arange(ell)] -= w2
        A[:, ell:, :ell] = lower
        A[:, ell:, ell:] = 2 * M
        return A

    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        A = A_on(np.arange(2 * start, 2 * stop + 1))
        A0, A1, A2 = A[0:-1:2], A[1::2], A[2::2]
        k1 = A0
        k2 = A1 @ (eye + 0.5 * h * k1)
        k3 = A1 @ (eye + 0.5 * h * k2)
        k4 = A2 @ (eye + h * k3)
        S = eye + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        while S.shape[0] > 1:
            if S.shape[0] % 2:
                S = np.concatenate([S, eye[None]])
            S = S[1::2] @ S[0::2]
        total = S[0] @ total
    return total


def brute_force_beta(profile, eta, pol, k_perp, ell, n_periods, h_ps=1e-4,
                     scale: ScaledConfig = ScaledConfig()):
    """|beta_mn|^2 after ``n_periods`` from the second-order brute-force integrator."""
    U = second_order_period_map(profile, eta, pol, k_perp, ell, h_ps, scale)
    w0 = np.hypot(k_perp, np.pi * np.arange(1, ell + 1))
    _, M0 = _coefficients(np.array([0.0]), profile, eta, pol, k_perp, ell, scale)
    M0 = M0[0]
    P = np.diag(1 / np.sqrt(2 * w0)).astype(complex)
    Q = np.diag(-1j * w0 / np.sqrt(2 * w0))
    y = np.vstack([P, Q - M0.T @ P])
    y = np.linalg.matrix_power(U, n_periods) @ y
    P, Pd = y[:ell], y[ell:]
    Q = Pd + M0.T @ P   # M(nT) = M(0)
    w = w0[:, None]
    beta = np.sqrt(w / 2) * P - 1j * Q / np.sqrt(2 * w)
    return np.abs(beta) ** 2


def central_difference(f, x, h):
    return (f(x + h) - f(x - h)) / (2 * h)
