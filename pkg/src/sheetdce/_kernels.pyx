# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: eigenvalue root search and RK4 period propagation.

Mirrors ``sheetdce._fallback`` exactly; see there for the math.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, atan2, floor, fabs, M_PI, NAN
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


cdef inline void _phase(double k, double V, double eta, bint tm, double kperp2,
                        double* theta, double* dtheta) noexcept nogil:
    cdef double kd = k * eta
    cdef double m = floor(kd / M_PI)
    cdef double r = kd - m * M_PI
    cdef double s = sin(r), c = cos(r)
    cdef double x, y, dx, dy, u
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
    theta[0] = m * M_PI + atan2(y, x) + k * (1.0 - eta)
    dtheta[0] = (dy * x - dx * y) / (x * x + y * y) + (1.0 - eta)


cdef double _root(double V, double eta, bint tm, double kperp2, int n, int max_iter) noexcept nogil:
    cdef double target = n * M_PI
    cdef double a, b, x, xn, f, fp, f_lo, f_hi, dummy, dx_old
    cdef int it
    if tm:
        a = (n - 1) * M_PI
        b = n * M_PI
    else:
        a = n * M_PI
        b = (n + 1) * M_PI
    if V == 0.0:
        return target
    _phase(a, V, eta, tm, kperp2, &f_lo, &dummy)
    f_lo -= target
    if f_lo >= 0.0:
        return a
    _phase(b, V, eta, tm, kperp2, &f_hi, &dummy)
    f_hi -= target
    if f_hi <= 0.0:
        return b
    x = 0.5 * (a + b)
    dx_old = b - a
    for it in range(max_iter):
        _phase(x, V, eta, tm, kperp2, &f, &fp)
        f -= target
        if f == 0.0:
            return x
        if f < 0.0:
            a = x
        else:
            b = x
        xn = x - f / fp
        # bisect when Newton leaves the bracket or fails to halve the step
        if not (xn > a and xn < b) or fabs(xn - x) > 0.5 * dx_old:
            xn = 0.5 * (a + b)
        dx_old = fabs(xn - x)
        if (fabs(xn - x) <= 2e-16 * fabs(x) and fabs(f) <= 1e-13 * target) or b - a <= 4e-16 * b:
            return xn
        x = xn
    return x


def phase_roots(V, double eta, bint tm, double kperp2, int ell, int max_iter=200):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] Va = np.ascontiguousarray(V, dtype=np.float64).reshape(-1)
    cdef Py_ssize_t nV = Va.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((nV, ell), dtype=np.float64)
    cdef double[::1] vv = Va
    cdef double[:, ::1] oo = out
    cdef Py_ssize_t i
    cdef int n
    with nogil:
        for i in range(nV):
            for n in range(1, ell + 1):
                oo[i, n - 1] = _root(vv[i], eta, tm, kperp2, n, max_iter)
    return out


cdef void _deriv(double[:, ::1] P, double[:, ::1] Q, double[:, ::1] dP, double[:, ::1] dQ,
                 double[:, ::1] M, const double[::1] w2, const double[::1] c,
                 const double[::1] ksq, double g) noexcept nogil:
    """dP = Q - M^T P, dQ = -w2 P + M Q (row-major arrays, BLAS via transposes)."""
    cdef int ell = P.shape[0]
    cdef int p = P.shape[1]
    cdef int m, n
    cdef double one = 1.0, zero = 0.0
    cdef char tN = b'N', tT = b'T'
    if g != 0.0:
        for m in range(ell):
            M[m, m] = 0.0
            for n in range(m + 1, ell):
                M[m, n] = g * c[m] * c[n] / (ksq[m] - ksq[n])
                M[n, m] = -M[m, n]
        # column-major view: dP^T = P^T M   and   dQ^T = Q^T M^T
        dgemm(&tN, &tT, &p, &ell, &ell, &one, &P[0, 0], &p, &M[0, 0], &ell, &zero, &dP[0, 0], &p)
        dgemm(&tN, &tN, &p, &ell, &ell, &one, &Q[0, 0], &p, &M[0, 0], &ell, &zero, &dQ[0, 0], &p)
        for m in range(ell):
            for n in range(p):
                dP[m, n] = Q[m, n] - dP[m, n]
                dQ[m, n] = dQ[m, n] - w2[m] * P[m, n]
    else:
        for m in range(ell):
            for n in range(p):
                dP[m, n] = Q[m, n]
                dQ[m, n] = -w2[m] * P[m, n]


def rk4_propagate(P0, Q0, omega2, coef, ksq, gain, double h, Py_ssize_t start,
                  Py_ssize_t n_steps, Py_ssize_t stride):
    cdef double[:, ::1] P = np.array(P0, dtype=np.float64, order="C")
    cdef double[:, ::1] Q = np.array(Q0, dtype=np.float64, order="C")
    cdef const double[:, ::1] W2 = np.ascontiguousarray(omega2, dtype=np.float64)
    cdef const double[:, ::1] C = np.ascontiguousarray(coef, dtype=np.float64)
    cdef const double[:, ::1] K2 = np.ascontiguousarray(ksq, dtype=np.float64)
    cdef const double[::1] G = np.ascontiguousarray(gain, dtype=np.float64)
    cdef Py_ssize_t ell = P.shape[0], p = P.shape[1]
    cdef Py_ssize_t n_phase = W2.shape[0]
    cdef Py_ssize_t n_samples = n_steps // stride + 1
    Ps_arr = np.empty((n_samples, ell, p), dtype=np.float64)
    Qs_arr = np.empty((n_samples, ell, p), dtype=np.float64)
    cdef double[:, :, ::1] Ps = Ps_arr
    cdef double[:, :, ::1] Qs = Qs_arr
    cdef double[:, ::1] M = np.zeros((ell, ell))
    cdef double[:, ::1] Pt = np.empty((ell, p)), Qt = np.empty((ell, p))
    cdef double[:, ::1] k1p = np.empty((ell, p)), k1q = np.empty((ell, p))
    cdef double[:, ::1] k2p = np.empty((ell, p)), k2q = np.empty((ell, p))
    cdef double[:, ::1] k3p = np.empty((ell, p)), k3q = np.empty((ell, p))
    cdef double[:, ::1] k4p = np.empty((ell, p)), k4q = np.empty((ell, p))
    cdef double half = 0.5 * h, sixth = h / 6.0
    cdef Py_ssize_t i, a, b, j0, j1, j2

    Ps[0, :, :] = P
    Qs[0, :, :] = Q
    with nogil:
        for i in range(n_steps):
            j0 = (start + 2 * i) % n_phase
            j1 = (j0 + 1) % n_phase
            j2 = (j0 + 2) % n_phase
            _deriv(P, Q, k1p, k1q, M, W2[j0], C[j0], K2[j0], G[j0])
            for a in range(ell):
                for b in range(p):
                    Pt[a, b] = P[a, b] + half * k1p[a, b]
                    Qt[a, b] = Q[a, b] + half * k1q[a, b]
            _deriv(Pt, Qt, k2p, k2q, M, W2[j1], C[j1], K2[j1], G[j1])
            for a in range(ell):
                for b in range(p):
                    Pt[a, b] = P[a, b] + half * k2p[a, b]
                    Qt[a, b] = Q[a, b] + half * k2q[a, b]
            _deriv(Pt, Qt, k3p, k3q, M, W2[j1], C[j1], K2[j1], G[j1])
            for a in range(ell):
                for b in range(p):
                    Pt[a, b] = P[a, b] + h * k3p[a, b]
                    Qt[a, b] = Q[a, b] + h * k3q[a, b]
            _deriv(Pt, Qt, k4p, k4q, M, W2[j2], C[j2], K2[j2], G[j2])
            for a in range(ell):
                for b in range(p):
                    P[a, b] = P[a, b] + sixth * (k1p[a, b] + 2.0 * (k2p[a, b] + k3p[a, b]) + k4p[a, b])
                    Q[a, b] = Q[a, b] + sixth * (k1q[a, b] + 2.0 * (k2q[a, b] + k3q[a, b]) + k4q[a, b])
            if (i + 1) % stride == 0:
                Ps[(i + 1) // stride, :, :] = P
                Qs[(i + 1) // stride, :, :] = Q
    return Ps_arr, Qs_arr
