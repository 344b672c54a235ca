"""Coupled mode-amplitude evolution from the in-vacuum through the pulse train.

Column ``s`` of ``P`` is the mode expansion of the field that started as
in-mode ``s``.  With ``Q = dP/dt + M^T P`` the equations of motion are

    dP/dt = Q - M^T P,        dQ/dt = -Omega^2 P + M Q,

which contain no dM/dt.  Eliminating Q recovers the familiar second-order form
``P'' + Omega^2 P = 2 M P' + (dM/dt) P - M^2 P``.

The coefficients are periodic, so by default one period's real propagator
``U(tau)`` is built with fixed-step RK4 and later periods follow from
``X(jT + tau) = U(tau) U(T)^j X(0)``.  The RK4 one-period map is the same
every period, so this reproduces step-by-step integration to rounding.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp

from . import kernels
from .bogoliubov import coefficients, photon_numbers, stationary_omega, unitarity_deviation
from .core import CavityGeometry, Polarization, ScaledConfig
from .coupling import CouplingTable, build_period_table, closed_form_matrix, refined_table
from .pulse import PulseProfile, potential
from .spectrum import SpectrumSnapshot

log = logging.getLogger(__name__)

IN_PULSE_FRACTION = 1e-3
_PROPAGATOR_BYTES = 512 * 2**20


class ConfigurationError(ValueError):
    pass


class EvolutionError(RuntimeError):
    pass


@dataclass
class EvolutionState:
    """Mode amplitudes at time ``t`` (ps); ``P`` and ``Q`` are (ell, ncols) complex."""

    t: float
    P: np.ndarray
    Q: np.ndarray

    def __add__(self, other: EvolutionState) -> EvolutionState:
        return EvolutionState(self.t, self.P + other.P, self.Q + other.Q)

    def __mul__(self, a) -> EvolutionState:
        return EvolutionState(self.t, a * self.P, a * self.Q)

    __rmul__ = __mul__


def initial_state(spectrum_at_0: SpectrumSnapshot, ell_max: int | None = None,
                  vmax_lz: float | None = None, columns=None) -> EvolutionState:
    """In-vacuum amplitudes ``P = 1/sqrt(2 w0)``, ``Q = -i w0 / sqrt(2 w0)`` on the diagonal."""
    ell = spectrum_at_0.ell_max if ell_max is None else int(ell_max)
    if ell < 1 or ell > spectrum_at_0.ell_max:
        raise ConfigurationError(f"ell_max={ell} outside 1..{spectrum_at_0.ell_max}")
    if vmax_lz is not None and spectrum_at_0.V_Lz > 1e-6 * vmax_lz:
        raise ConfigurationError(
            f"V(0)*Lz = {spectrum_at_0.V_Lz:.3g} exceeds 1e-6 * Vmax; "
            "the in-basis is not stationary at t = 0"
        )
    cols = np.arange(ell) if columns is None else np.asarray(columns, dtype=int)
    w0 = stationary_omega(spectrum_at_0.k_perp, ell)
    P = np.zeros((ell, cols.size), dtype=complex)
    Q = np.zeros((ell, cols.size), dtype=complex)
    amp = 1.0 / np.sqrt(2.0 * w0[cols])
    P[cols, np.arange(cols.size)] = amp
    Q[cols, np.arange(cols.size)] = -1j * (w0[cols] * amp)
    return EvolutionState(0.0, P, Q)


def rhs(t_ps: float, state: EvolutionState, table: CouplingTable,
        single_mode: bool = False) -> EvolutionState:
    """Time derivative (per scaled time) of ``state`` at ``t_ps``."""
    if table.ell_max < state.P.shape[0]:
        raise EvolutionError(f"coupling table has {table.ell_max} modes, state has {state.P.shape[0]}")
    ell = state.P.shape[0]
    k, c, dV = table.interpolate(t_ps)
    k, c = k[:ell], c[:ell]
    w2 = (table.k_perp**2 + k * k)[:, None]
    g = 0.0 if single_mode else table.kappa * dV
    if g == 0.0:
        return EvolutionState(t_ps, state.Q.copy(), -w2 * state.P)
    M = closed_form_matrix(k, c, g)
    return EvolutionState(t_ps, state.Q - M.T @ state.P, -w2 * state.P + M @ state.Q)


@dataclass(frozen=True)
class EvolutionConfig:
    """Run parameters.  Times in ps, potential as ``Vmax * Lz``.

    ``single_mode`` switches the coupling off: ``"zero_coupling"`` keeps all
    ``ell_max`` modes with ``M = 0``; ``"truncate"`` evolves mode 1 alone.
    ``propagation`` is ``"floquet"`` (one-period propagator, default) or
    ``"direct"`` (step every period).
    """

    profile: PulseProfile
    pol: Polarization = Polarization.TE
    geometry: CavityGeometry = field(default_factory=CavityGeometry)
    mx: int = 1
    my: int = 1
    ell_max: int = 51
    step_ps: float = 0.01
    sample_ps: float = 1.0
    single_mode: str | None = None
    integrator: str = "rk4"
    propagation: str = "floquet"
    columns: tuple | None = None
    unitarity_abort: float = 1e-2
    rtol: float = 1e-10
    atol: float = 1e-12

    def __post_init__(self) -> None:
        object.__setattr__(self, "pol", Polarization.parse(self.pol))
        if int(self.ell_max) != self.ell_max or self.ell_max < 1:
            raise ConfigurationError(f"ell_max must be a positive integer, got {self.ell_max!r}")
        if not self.step_ps > 0 or not self.sample_ps > 0:
            raise ConfigurationError("step_ps and sample_ps must be positive")
        if self.single_mode not in (None, "zero_coupling", "truncate"):
            raise ConfigurationError(f"unknown single_mode {self.single_mode!r}")
        if self.integrator not in ("rk4", "adaptive"):
            raise ConfigurationError(f"unknown integrator {self.integrator!r}")
        if self.propagation not in ("floquet", "direct"):
            raise ConfigurationError(f"unknown propagation {self.propagation!r}")
        if self.integrator == "adaptive" and self.propagation == "direct":
            raise ConfigurationError("the adaptive integrator only supports floquet propagation")

    @property
    def eta(self) -> float:
        return self.geometry.eta

    @property
    def scale(self) -> ScaledConfig:
        return ScaledConfig(self.geometry)

    @property
    def k_perp(self) -> float:
        return self.scale.k_perp(self.mx, self.my)

    @property
    def n_modes(self) -> int:
        return 1 if self.single_mode == "truncate" else int(self.ell_max)

    @property
    def coupled(self) -> bool:
        return self.single_mode is None

    def replace(self, **kw) -> EvolutionConfig:
        return replace(self, **kw)

    def grid(self) -> tuple[int, int]:
        """(steps per period, samples per period) with steps a multiple of samples."""
        T = self.profile.period
        S = max(1, int(round(T / self.sample_ps)))
        per = max(1, math.ceil(T / (self.step_ps * S) - 1e-9))
        return S * per, S


@dataclass
class Trajectory:
    """Photon numbers and diagnostics on the sample grid.

    ``boundary_states`` holds the full state at every period boundary
    (t = 0, T, ..., n_pulses T).
    """

    config: EvolutionConfig
    t_ps: np.ndarray
    V: np.ndarray
    N: np.ndarray
    unitarity_dev: np.ndarray
    in_pulse: np.ndarray
    boundary_states: list
    omega0: np.ndarray
    step_ps: float
    steps_per_period: int
    backend: str

    @property
    def final_state(self) -> EvolutionState:
        return self.boundary_states[-1]

    @property
    def N_final(self) -> np.ndarray:
        return self.N[-1]

    def bogoliubov(self, j: int = -1):
        """(alpha, beta) at period boundary ``j``."""
        s = self.boundary_states[j]
        return coefficients(s.P, s.Q, self.omega0)

    def records(self) -> list[dict]:
        return [
            {"t": float(t), "N": [float(x) for x in n], "unitarity_dev": float(u),
             "in_pulse": bool(p)}
            for t, n, u, p in zip(self.t_ps, self.N, self.unitarity_dev, self.in_pulse)
        ]


def _blocks(table: CouplingTable, cfg: EvolutionConfig, ell: int):
    """Index sets evolved together: coupled modes, and the rest (uncoupled)."""
    if cfg.coupled:
        active = table.active_modes()[:ell]
    else:
        active = np.zeros(ell, dtype=bool)
    idx = np.arange(ell)
    out = []
    if active.any():
        out.append((idx[active], True))
    if (~active).any():
        out.append((idx[~active], False))
    return out


def _block_inputs(table: CouplingTable, idx, coupled):
    sub = np.ix_(np.arange(table.n_phase), idx)
    omega2 = np.ascontiguousarray(table.omega2[sub])
    ksq = np.ascontiguousarray(table.ksq[sub])
    coef = np.ascontiguousarray(table.coef[sub])
    gain = table.gain.copy() if coupled else np.zeros(table.n_phase)
    return omega2, coef, ksq, gain


def _rk4_period_propagator(table, cfg, ell, h, n_steps, stride):
    """U(s * stride * h) for s = 0..n_steps/stride, shape (S+1, 2 ell, 2 ell)."""
    S = n_steps // stride
    U = np.zeros((S + 1, 2 * ell, 2 * ell))
    for idx, coupled in _blocks(table, cfg, ell):
        n = idx.size
        P0 = np.hstack([np.eye(n), np.zeros((n, n))])
        Q0 = np.hstack([np.zeros((n, n)), np.eye(n)])
        Ps, Qs = kernels.rk4_propagate(P0, Q0, *_block_inputs(table, idx, coupled),
                                       h, 0, n_steps, stride)
        rows_p, rows_q = idx, idx + ell
        cols = np.concatenate([idx, idx + ell])
        U[:, rows_p[:, None], cols[None, :]] = Ps
        U[:, rows_q[:, None], cols[None, :]] = Qs
    return U


def _adaptive_period_propagator(table, cfg, ell, sample_t):
    """Same as the RK4 propagator but from an embedded 8(5,3) pair on spline-cached M."""
    scale = table.scale
    idx_blocks = _blocks(table, cfg, ell)
    U = np.zeros((sample_t.size, 2 * ell, 2 * ell))
    t_s = scale.time_to_scaled(sample_t)
    for idx, coupled in idx_blocks:
        n = idx.size

        def f(t, y, idx=idx, coupled=coupled, n=n):
            k, c, dV = table.interpolate(scale.time_to_ps(t))
            k, c = k[idx], c[idx]
            Y = y.reshape(2 * n, 2 * n)
            P, Q = Y[:n], Y[n:]
            w2 = (table.k_perp**2 + k * k)[:, None]
            g = table.kappa * dV if coupled else 0.0
            if g == 0.0:
                return np.concatenate([Q, -w2 * P]).ravel()
            M = closed_form_matrix(k, c, g)
            return np.concatenate([Q - M.T @ P, -w2 * P + M @ Q]).ravel()

        sol = solve_ivp(f, (0.0, t_s[-1]), np.eye(2 * n).ravel(), method="DOP853",
                        t_eval=t_s, rtol=cfg.rtol, atol=cfg.atol)
        if not sol.success:
            raise EvolutionError(f"adaptive integration failed: {sol.message}")
        Ys = sol.y.T.reshape(-1, 2 * n, 2 * n)
        full = np.concatenate([idx, idx + ell])
        U[:, full[:, None], full[None, :]] = Ys
    return U


def _initial_vector(cfg: EvolutionConfig, ell: int, table: CouplingTable):
    snap0 = SpectrumSnapshot(
        float(table.V[0]), table.eta, table.pol, table.k_perp,
        table.k[0, :ell].copy(), np.zeros(ell), np.ones(ell), np.ones(ell),
    )
    st = initial_state(snap0, ell, vmax_lz=cfg.profile.vmax_lz or None, columns=cfg.columns)
    return st, np.vstack([st.P, st.Q])


def _diagnose(X, ell, omega0):
    """N (…, ell) and unitarity deviation (…) from stacked [P; Q] vectors.

    The unitarity sum runs over all in-modes, so it is NaN when only some
    columns are evolved; N is then the partial sum over those columns.
    """
    alpha, beta = coefficients(X[..., :ell, :], X[..., ell:, :], omega0)
    if X.shape[-1] != ell:
        return photon_numbers(beta), np.full(X.shape[:-2], np.nan)
    return photon_numbers(beta), unitarity_deviation(alpha, beta)


def _check_unitarity(cfg, t, dev):
    bad = np.nonzero(dev > cfg.unitarity_abort)[0]
    if bad.size:
        i = bad[0]
        raise EvolutionError(
            f"unitarity deviation {dev[i]:.3g} exceeds {cfg.unitarity_abort:g} at t = {t[i]:.4g} ps;"
            " reduce step_ps or tighten the integrator tolerances"
        )


def evolve(cfg: EvolutionConfig, table: CouplingTable | None = None) -> Trajectory:
    """Integrate 0 -> n_pulses * T and sample photon numbers every ``sample_ps``."""
    prof = cfg.profile
    ell = cfg.n_modes
    scale = cfg.scale
    n_steps, S = cfg.grid()
    stride = n_steps // S
    h_ps = prof.period / n_steps
    h = scale.time_to_scaled(h_ps)
    if table is None:
        if cfg.integrator == "adaptive":
            table = refined_table(prof, cfg.eta, cfg.pol, cfg.k_perp, cfg.ell_max, scale)
        else:
            table = build_period_table(prof, cfg.eta, cfg.pol, cfg.k_perp, cfg.ell_max,
                                       2 * n_steps, scale)
    elif cfg.integrator == "rk4" and table.n_phase != 2 * n_steps:
        raise EvolutionError(f"table has {table.n_phase} phases, RK4 grid needs {2 * n_steps}")
    omega0 = stationary_omega(cfg.k_perp, ell)
    st0, X0 = _initial_vector(cfg, ell, table)

    tau = np.arange(S + 1) * (prof.period / S)
    n_p = prof.n_pulses
    t_all = np.concatenate([j * prof.period + tau[:-1] for j in range(n_p)] + [[n_p * prof.period]])
    N_all = np.empty((t_all.size, ell))
    dev_all = np.empty(t_all.size)
    boundary = [st0]

    propagation = cfg.propagation
    if propagation == "floquet" and (S + 1) * (2 * ell) ** 2 * 8 > _PROPAGATOR_BYTES:
        log.info("sample grid too dense for a stored propagator; stepping directly")
        propagation = "direct"

    if propagation == "floquet":
        if cfg.integrator == "rk4":
            U = _rk4_period_propagator(table, cfg, ell, h, n_steps, stride)
        else:
            U = _adaptive_period_propagator(table, cfg, ell, tau)
        Y = X0
        for j in range(n_p):
            X = np.einsum("sab,bc->sac", U[:-1], Y)
            N, dev = _diagnose(X, ell, omega0)
            sl = slice(j * S, (j + 1) * S)
            N_all[sl], dev_all[sl] = N, dev
            _check_unitarity(cfg, t_all[sl], dev)
            Y = U[-1] @ Y
            boundary.append(EvolutionState((j + 1) * prof.period, Y[:ell].copy(), Y[ell:].copy()))
    else:
        Y = X0
        blocks = _blocks(table, cfg, ell)
        inputs = [_block_inputs(table, idx, c) for idx, c in blocks]
        for j in range(n_p):
            Xs = np.empty((S + 1,) + Y.shape, dtype=complex)
            for (idx, _), args in zip(blocks, inputs):
                P = np.hstack([Y[idx].real, Y[idx].imag])
                Q = np.hstack([Y[idx + ell].real, Y[idx + ell].imag])
                Ps, Qs = kernels.rk4_propagate(P, Q, *args, h, 0, n_steps, stride)
                p = Y.shape[1]
                Xs[:, idx] = Ps[..., :p] + 1j * Ps[..., p:]
                Xs[:, idx + ell] = Qs[..., :p] + 1j * Qs[..., p:]
            N, dev = _diagnose(Xs[:-1], ell, omega0)
            sl = slice(j * S, (j + 1) * S)
            N_all[sl], dev_all[sl] = N, dev
            _check_unitarity(cfg, t_all[sl], dev)
            Y = Xs[-1]
            boundary.append(EvolutionState((j + 1) * prof.period, Y[:ell].copy(), Y[ell:].copy()))

    N_last, dev_last = _diagnose(Y, ell, omega0)
    N_all[-1], dev_all[-1] = N_last, dev_last
    _check_unitarity(cfg, t_all[-1:], np.atleast_1d(dev_last))
    V = potential(t_all, prof)
    in_pulse = V > IN_PULSE_FRACTION * prof.vmax_lz if prof.vmax_lz > 0 else np.zeros(t_all.size, bool)
    return Trajectory(
        config=cfg, t_ps=t_all, V=np.asarray(V), N=N_all, unitarity_dev=dev_all,
        in_pulse=in_pulse, boundary_states=boundary, omega0=omega0,
        step_ps=h_ps, steps_per_period=n_steps, backend=kernels.BACKEND,
    )
