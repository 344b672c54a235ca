"""End-to-end acceptance criteria; one CRITERION line per criterion in the summary.

The physics scans are cached per session, so the whole module runs in about
ten minutes on one core.
"""
import functools
import time

import numpy as np
import pytest

from conftest import K_PERP, record_criterion
from oracles import brute_force_beta
from sheetdce.core import CavityGeometry, plasma_frequency
from sheetdce.coupling import snapshot_matrix
from sheetdce.evolution import EvolutionConfig, evolve
from sheetdce.experiments import optimize_period, point_config
from sheetdce.pulse import PulseProfile
from sheetdce.spectrum import (
    average_frequency, eigenvalue_trace, mode_function, solve_spectrum,
)

pytestmark = pytest.mark.slow

BASE = EvolutionConfig(PulseProfile(5000.0))
COARSE = tuple(np.arange(92.0, 124.01, 1.0))
TM_ETAS = (0.05, 0.2, 0.35, 0.5)


def report(n, ok, msg):
    record_criterion(f"CRITERION {n}: {'PASS' if ok else 'FAIL'}  {msg}")
    assert ok, msg


@functools.lru_cache(maxsize=None)
def optimum(pol, eta, vmax, mode="multi"):
    """(T_opt, N111) at 11 periods, ell_max = 51."""
    cfg = point_config(BASE, pol, eta, vmax, COARSE[0], mode)
    if mode == "single":
        cfg = cfg.replace(single_mode="truncate")
    T, n, _, _ = optimize_period(cfg, COARSE, "golden", 0.05)
    return T, n


@functools.lru_cache(maxsize=None)
def n111(pol, eta, vmax, T, ell=51, mode="multi", step=0.01):
    cfg = point_config(BASE, pol, eta, vmax, T, mode).replace(ell_max=ell, step_ps=step)
    return float(evolve(cfg).N_final[0])


def test_criterion_1_baseline_spectrum():
    t0 = time.perf_counter()
    n = np.arange(1, 52)
    err = max(float(np.max(np.abs(solve_spectrum(0.0, eta, pol, K_PERP, 51).k - n * np.pi)
                            / (n * np.pi)))
              for pol in ("TE", "TM") for eta in (0.05, 0.37, 0.5))
    dt = time.perf_counter() - t0
    report(1, err < 1e-12 and dt < 1.0,
           f"V=0 spectrum max rel error {err:.1e} (< 1e-12), {dt:.2f} s (< 1 s)")


def test_criterion_2_frequency_shifts():
    t0 = time.perf_counter()
    prof = PulseProfile(5000.0)
    te = average_frequency(prof, 0.5, "TE", K_PERP, 1)
    tm = average_frequency(prof, 0.5, "TM", K_PERP, 1)
    # even modes have a node at the midpoint: their shift must vanish (no sign)
    signs_ok = True
    for n in range(1, 6):
        for pol, sign in (("TE", 1.0), ("TM", -1.0)):
            a = average_frequency(prof, 0.5, pol, K_PERP, n)
            rel = a.shift / a.omega0
            signs_ok &= abs(rel) < 1e-12 if n % 2 == 0 else sign * rel > 0
    dt = time.perf_counter() - t0
    ok_te = abs(te.half_period_ps - 104.2) <= 2.0
    ok_tm = abs(tm.half_period_ps - 116.1) <= 2.0
    report(2, ok_te and ok_tm and signs_ok and dt < 10.0,
           f"half periods TE {te.half_period_ps:.2f} ps (104.2 +- 2), "
           f"TM {tm.half_period_ps:.2f} ps (116.1 +- 2); "
           f"shift TE>0, TM<0 for odd n<=5 and 0 for even n: {signs_ok}; {dt:.1f} s (< 10 s)")


def _k1_excursion(pol, vmax):
    _, _, k = eigenvalue_trace(PulseProfile(vmax), 0.5, pol, K_PERP, 1, 4000)
    return float(np.abs(k[:, 0] - np.pi).max())


def test_criterion_3_low_power_asymmetry():
    te = _k1_excursion("TE", 5000.0) / _k1_excursion("TE", 1.0)
    tm = _k1_excursion("TM", 5000.0) / _k1_excursion("TM", 1.0)
    report(3, te >= 50 and tm < 3,
           f"k1 excursion shrink 5000 -> 1: TE {te:.1f}x (>= 50), TM {tm:.1f}x (< 3)")


def _dense_unitarity(pol, T):
    cfg = point_config(BASE, pol, 0.5, 5000.0, T).replace(sample_ps=1.0)
    return float(evolve(cfg).unitarity_dev.max())


def test_criterion_4_unitarity():
    T_te, _ = optimum("TE", 0.5, 5000.0)
    T_tm, _ = optimum("TM", 0.5, 5000.0)
    te, tm = _dense_unitarity("TE", T_te), _dense_unitarity("TM", T_tm)
    report(4, te <= 2e-4 and tm <= 2e-4,
           f"max unitarity deviation over 11T, ell=51: TE {te:.1e}, TM {tm:.1e} (<= 2e-4)")


def test_criterion_5_te_optimum():
    T, n = optimum("TE", 0.5, 5000.0)
    ratio = n111("TE", 0.5, 5000.0, 105.0) / n111("TE", 0.5, 5000.0, 111.1)
    ok = abs(T - 105.0) <= 2.0 and abs(n - 4.3) <= 0.3 * 4.3 and 7.5 <= ratio <= 30
    report(5, ok, f"TE optimum T={T:.2f} ps (105 +- 2), N111={n:.3f} (4.3 +- 30%), "
                  f"N(105)/N(111.1)={ratio:.1f} (15 within 2x)")


def test_criterion_6_coupling_direction():
    Te, ne = optimum("TE", 0.5, 5000.0)
    Ts, ns = optimum("TE", 0.5, 5000.0, "single")
    Tm, nm = optimum("TM", 0.5, 5000.0)
    Tms, nms = optimum("TM", 0.5, 5000.0, "single")
    # truncation and zero coupling give the same N111; check once at the TE optimum
    zc = n111("TE", 0.5, 5000.0, Ts, mode="single")
    same = abs(zc - ns) <= 1e-9 * ns
    report(6, ne <= ns and nm >= nms and same,
           f"TE multimode {ne:.3f} (T={Te:.2f}) <= single {ns:.3f} (T={Ts:.2f}); "
           f"TM multimode {nm:.3f} (T={Tm:.2f}) >= single {nms:.3f} (T={Tms:.2f})")


def test_criterion_7_position_dependence():
    te = optimum("TE", 0.5, 5000.0)[1] / optimum("TE", 0.05, 5000.0)[1]
    tm = [optimum("TM", e, 5000.0)[1] for e in TM_ETAS]
    spread = max(tm) / min(tm)
    low = optimum("TM", 0.5, 5000.0)[1] / optimum("TM", 0.5, 1.0)[1]
    report(7, te >= 100 and spread < 10 and 1.5 <= low <= 4,
           f"TE N(0.5)/N(0.05)={te:.0f} (>= 100); TM spread over eta {TM_ETAS}="
           f"{spread:.1f}x (< 10); TM N(5000)/N(1)={low:.0f} (in [1.5, 4])")


def test_criterion_8_cutoff_saturation():
    cases = [("TE", 0.5, 5000.0), ("TM", 0.5, 5000.0), ("TE", 0.05, 5000.0),
             ("TM", 0.05, 5000.0), ("TM", 0.5, 1.0)]
    parts, worst = [], 0.0
    for pol, eta, v in cases:
        T, n51 = optimum(pol, eta, v)
        n41 = n111(pol, eta, v, T, ell=41)
        rel = abs(n41 - n51) / n51
        worst = max(worst, rel)
        parts.append(f"{pol} eta={eta:g} V={v:g}: {100 * rel:.2f}%")
    report(8, worst < 0.01, "N111 change ell 41 -> 51 (< 1%): " + "; ".join(parts))


def test_criterion_9_oracle():
    t0 = time.perf_counter()
    worst = 0.0
    for pol in ("TE", "TM"):
        prof = PulseProfile(5000.0, period=105.0, n_pulses=3)
        cfg = EvolutionConfig(prof, pol, geometry=CavityGeometry(eta=0.3), ell_max=2,
                              sample_ps=105.0)
        _, beta = evolve(cfg).bogoliubov()
        ref = brute_force_beta(prof, 0.3, pol, K_PERP, 2, 3, h_ps=1e-4)
        worst = max(worst, float(np.max(np.abs(np.abs(beta) ** 2 - ref) / ref)))
    dt = time.perf_counter() - t0
    report(9, worst < 1e-6 and dt < 30,
           f"ell=2 vs brute force h=1e-4 ps at 3T: max rel |beta|^2 diff {worst:.1e} "
           f"(< 1e-6), {dt:.1f} s (< 30 s)")


def _gl(eta, n):
    x, w = np.polynomial.legendre.leggauss(n)
    z = np.concatenate([0.5 * eta * (x + 1), eta + 0.5 * (1 - eta) * (x + 1)])
    return z, np.concatenate([0.5 * eta * w, 0.5 * (1 - eta) * w])


def test_criterion_10_property_suites():
    rng = np.random.default_rng(20240601)
    pols = ("TE", "TM")
    # antisymmetry / zero diagonal
    anti = 0.0
    for _ in range(1000):
        s = solve_spectrum(10 ** rng.uniform(-3, 4), rng.uniform(0.02, 0.98),
                           pols[rng.integers(2)], K_PERP, int(rng.integers(2, 52)))
        M = snapshot_matrix(s, rng.uniform(-1e4, 1e4))
        anti = max(anti, float(np.abs(M + M.T).max() / np.abs(M).max()),
                   float(np.abs(np.diag(M)).max()))
    # orthonormality
    ortho = 0.0
    for _ in range(1000):
        ell = int(rng.integers(2, 52))
        s = solve_spectrum(10 ** rng.uniform(-3, 4), rng.uniform(0.02, 0.98),
                           pols[rng.integers(2)], K_PERP, ell)
        z, w = _gl(s.eta, 24 + int(s.k.max() * 0.8))
        psi = np.array([mode_function(z, n, s) for n in range(1, ell + 1)])
        ortho = max(ortho, float(np.abs((psi * w) @ psi.T - np.eye(ell)).max()))
    # dk/dV implicit vs centered difference
    dk = 0.0
    for pol in pols:
        for V in (0.5, 20.0, 300.0, 5000.0):
            for eta in (0.1, 0.3, 0.5, 0.77):
                s = solve_spectrum(V, eta, pol, K_PERP, 20)
                h = 1e-5 * V
                fd = (solve_spectrum(V + h, eta, pol, K_PERP, 20).k
                      - solve_spectrum(V - h, eta, pol, K_PERP, 20).k) / (2 * h)
                scale = np.abs(s.dk_dV).max()
                dk = max(dk, float(np.abs(fd - s.dk_dV).max() / scale))
    # step halving at the TE optimum scenario
    T, _ = optimum("TE", 0.5, 5000.0)
    a = n111("TE", 0.5, 5000.0, T)
    b = n111("TE", 0.5, 5000.0, T, step=0.005)
    halving = abs(a - b) / b
    # plasma-frequency anchors, 2 significant figures
    wp1 = plasma_frequency(5e4, 5e-6)
    wp2 = plasma_frequency(10.0, 5e-6)
    anchors = float(f"{wp1:.2g}") == 3.0e13 and float(f"{wp2:.2g}") == 4.2e11
    ok = anti < 1e-9 and ortho < 1e-10 and dk < 1e-6 and halving < 1e-3 and anchors
    report(10, ok,
           f"antisym {anti:.1e} (< 1e-9), orthonormality {ortho:.1e} (< 1e-10), "
           f"dk/dV vs FD {dk:.1e} (< 1e-6), step halving {halving:.1e} (< 1e-3), "
           f"plasma anchors {wp1:.2g}/{wp2:.2g} s^-1")
