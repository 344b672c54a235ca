"""Pure numpy implementations of the hot kernels.

Same signatures and semantics as the compiled ``_kernels`` module; used when
the extension is not built or ``SHEETDCE_PURE=1`` is set.
"""
from __future__ import annotations

import numpy as np

_PI = np.pi


def _phase(k, V, eta, tm, kperp2):
    """Counting phase theta(k) and d theta / dk.

    theta increases strictly with k and the n-th eigenvalue solves
    theta(k) = n * pi.  The sheet only rotates the phase inside the current
    pi-sheet, so theta is continuous across branch cuts.
    """
    kd = k * eta
    m = np.floor(kd / _PI)
    r = kd - m * _PI
    s, c = np.sin(r), np.cos(r)
    if tm:
        u = V / kperp2
        y = s
        x = c - u * k * s
        dy = eta * c
        dx = -eta * s - u * s - u * k * eta * c
    else:
        y = k * s
        x = k * c + V * s
        dy = s + k * eta * c
        dx = c - k * eta * s + V * eta * c
    rho = x * x + y * y
    theta = m * _PI + np.arctan2(y, x) + k * (1.0 - eta)
    dtheta = (dy * x - dx * y) / rho + (1.0 - eta)
    return theta, dtheta


def brackets(ell, tm):
    n = np.arange(1, ell + 1, dtype=float)
    if tm:
        return (n - 1.0) * _PI, n * _PI
    return n * _PI, (n + 1.0) * _PI


def phase_roots(V, eta, tm, kperp2, ell, max_iter=200):
    """Eigenvalues k_1..k_ell for every potential in ``V``; shape (len(V), ell).

    Safeguarded Newton on the counting phase inside the invariant bracket
    ``[n pi, (n+1) pi]`` (TE) or ``[(n-1) pi, n pi]`` (TM).  Returns NaN where
    the bracket does not contain a sign change.
    """
    V = np.ascontiguousarray(V, dtype=float).reshape(-1)
    lo1, hi1 = brackets(ell, tm)
    target = np.arange(1, ell + 1, dtype=float) * _PI
    shape = (V.size, ell)
    lo = np.broadcast_to(lo1, shape).copy()
    hi = np.broadcast_to(hi1, shape).copy()
    Vb = np.broadcast_to(V[:, None], shape)
    tgt = np.broadcast_to(target, shape)
    out = np.full(shape, np.nan)

    baseline = (Vb == 0.0)
    out[baseline] = np.broadcast_to(target, shape)[baseline]

    f_lo = _phase(lo, Vb, eta, tm, kperp2)[0] - tgt
    f_hi = _phase(hi, Vb, eta, tm, kperp2)[0] - tgt
    at_lo = ~baseline & (f_lo >= 0.0)
    at_hi = ~baseline & ~at_lo & (f_hi <= 0.0)
    out[at_lo] = lo[at_lo]
    out[at_hi] = hi[at_hi]
    active = ~(baseline | at_lo | at_hi)
    bad = active & ~((f_lo < 0.0) & (f_hi > 0.0))
    active &= ~bad

    flat = np.flatnonzero(active)
    a, b = lo.ravel()[flat], hi.ravel()[flat]
    vv, tt = Vb.ravel()[flat], tgt.ravel()[flat]
    x = 0.5 * (a + b)
    dx_old = b - a
    res = out.ravel()
    for _ in range(max_iter):
        if flat.size == 0:
            break
        f, fp = _phase(x, vv, eta, tm, kperp2)
        f -= tt
        hit = f == 0.0
        neg = f < 0.0
        a = np.where(neg, x, a)
        b = np.where(neg | hit, b, x)
        xn = x - f / fp
        # bisect when Newton leaves the bracket or fails to halve the step
        slow = ~((xn > a) & (xn < b)) | (np.abs(xn - x) > 0.5 * dx_old)
        xn = np.where(hit, x, np.where(slow, 0.5 * (a + b), xn))
        dx_old = np.abs(xn - x)
        small = (np.abs(xn - x) <= 2e-16 * np.abs(x)) & (np.abs(f) <= 1e-13 * tt)
        conv = hit | small | (b - a <= 4e-16 * b)
        x = xn
        if conv.any():
            res[flat[conv]] = x[conv]
            keep = ~conv
            flat, a, b, vv, tt, x = flat[keep], a[keep], b[keep], vv[keep], tt[keep], x[keep]
            dx_old = dx_old[keep]
    res[flat] = x
    out = res.reshape(shape)
    return out


def rk4_propagate(P, Q, omega2, coef, ksq, gain, h, start, n_steps, stride):
    """Fixed-step RK4 for dP = Q - M^T P, dQ = -omega^2 P + M Q.

    ``omega2``, ``coef``, ``ksq`` have shape (n_phase, ell) and ``gain`` shape
    (n_phase,), tabulated at half-step spacing so that step ``i`` uses phases
    ``start + 2i``, ``+1``, ``+2`` (mod n_phase).  The coupling at phase j is
    ``M = gain_j * c c^T / (ksq_m - ksq_n)`` with zero diagonal.

    Returns ``(P_samples, Q_samples)`` of shape (n_samples, ell, p), sampled at
    step counts 0, stride, 2*stride, ... <= n_steps.
    """
    P = np.array(P, dtype=float, order="C")
    Q = np.array(Q, dtype=float, order="C")
    n_phase = omega2.shape[0]
    ell = P.shape[0]
    eye_inf = np.diag(np.full(ell, np.inf))

    def coupling(j):
        g = gain[j]
        if g == 0.0:
            return None
        c = coef[j]
        D = ksq[j][:, None] - ksq[j][None, :] + eye_inf
        return (g * np.outer(c, c)) / D

    def deriv(Pc, Qc, j):
        M = coupling(j)
        w2 = omega2[j][:, None]
        if M is None:
            return Qc.copy(), -w2 * Pc
        return Qc - M.T @ Pc, -w2 * Pc + M @ Qc

    n_samples = n_steps // stride + 1
    Ps = np.empty((n_samples,) + P.shape)
    Qs = np.empty((n_samples,) + Q.shape)
    Ps[0], Qs[0] = P, Q
    half = 0.5 * h
    sixth = h / 6.0
    for i in range(n_steps):
        j0 = (start + 2 * i) % n_phase
        j1 = (j0 + 1) % n_phase
        j2 = (j0 + 2) % n_phase
        k1p, k1q = deriv(P, Q, j0)
        k2p, k2q = deriv(P + half * k1p, Q + half * k1q, j1)
        k3p, k3q = deriv(P + half * k2p, Q + half * k2q, j1)
        k4p, k4q = deriv(P + h * k3p, Q + h * k3q, j2)
        P = P + sixth * (k1p + 2.0 * (k2p + k3p) + k4p)
        Q = Q + sixth * (k1q + 2.0 * (k2q + k3q) + k4q)
        if (i + 1) % stride == 0:
            Ps[(i + 1) // stride] = P
            Qs[(i + 1) // stride] = Q
    return Ps, Qs
