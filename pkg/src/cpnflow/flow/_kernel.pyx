# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled explicit graph-gauge step; same arithmetic as the numpy kernel, point by point."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, atan2, sqrt, hypot, isfinite, M_PI

cnp.import_array()

cdef enum:
    OK = 0
    NONFINITE = 1
    GRAPH_LOST = 2


cdef inline double dot6(double* a, double* b) noexcept nogil:
    return a[0]*b[0] + a[1]*b[1] + a[2]*b[2] + a[3]*b[3] + a[4]*b[4] + a[5]*b[5]


cdef inline void sphere_proj(double* v, double* p, double* q) noexcept nogil:
    cdef double a = v[0]*p[0] + v[1]*p[1] + v[2]*p[2]
    cdef double b = v[3]*q[0] + v[4]*q[1] + v[5]*q[2]
    cdef int i
    for i in range(3):
        v[i] -= a * p[i]
        v[3 + i] -= b * q[i]


cdef inline void normal_proj(double* v, double* Ft, double* Ff,
                             double Gi00, double Gi01, double Gi11) noexcept nogil:
    cdef double a = dot6(v, Ft)
    cdef double b = dot6(v, Ff)
    cdef double ca = Gi00 * a + Gi01 * b
    cdef double cb = Gi01 * a + Gi11 * b
    cdef int i
    for i in range(6):
        v[i] -= ca * Ft[i] + cb * Ff[i]


cdef int _step(const double* theta, double* Th, double* g, double* Tn, double* gn,
               int N, double h, double dt) noexcept nogil:
    cdef int j, i
    cdef double s, c, S, C, sg, cg, T1, T2, g1, g2, ih2, i2h
    cdef double p[3]
    cdef double q[3]
    cdef double qT[3]
    cdef double qP[3]
    cdef double qTP[3]
    cdef double qPP[3]
    cdef double Ft[6]
    cdef double Ff[6]
    cdef double Ftt[6]
    cdef double Ftf[6]
    cdef double Fff[6]
    cdef double H[6]
    cdef double G00, G01, G11, det, Gi00, Gi01, Gi11, alpha, beta, x, y, z, nrm, d
    ih2 = 1.0 / (h * h)
    i2h = 1.0 / (2.0 * h)
    for j in range(1, N):
        s = sin(theta[j]); c = cos(theta[j])
        S = sin(Th[j]); C = cos(Th[j])
        sg = sin(g[j]); cg = cos(g[j])
        T1 = (Th[j + 1] - Th[j - 1]) * i2h
        T2 = (Th[j + 1] - 2.0 * Th[j] + Th[j - 1]) * ih2
        g1 = (g[j + 1] - g[j - 1]) * i2h
        g2 = (g[j + 1] - 2.0 * g[j] + g[j - 1]) * ih2

        p[0] = s; p[1] = 0.0; p[2] = c
        q[0] = S * cg; q[1] = S * sg; q[2] = C
        qT[0] = C * cg; qT[1] = C * sg; qT[2] = -S
        qP[0] = -S * sg; qP[1] = S * cg; qP[2] = 0.0
        qTP[0] = -C * sg; qTP[1] = C * cg; qTP[2] = 0.0
        qPP[0] = -S * cg; qPP[1] = -S * sg; qPP[2] = 0.0

        Ft[0] = c; Ft[1] = 0.0; Ft[2] = -s
        Ff[0] = 0.0; Ff[1] = s; Ff[2] = 0.0
        Ftt[0] = -s; Ftt[1] = 0.0; Ftt[2] = -c
        Ftf[0] = 0.0; Ftf[1] = c; Ftf[2] = 0.0
        Fff[0] = -s; Fff[1] = 0.0; Fff[2] = 0.0
        for i in range(3):
            Ft[3 + i] = T1 * qT[i] + g1 * qP[i]
            Ff[3 + i] = qP[i]
            Ftt[3 + i] = (T2 * qT[i] + g2 * qP[i] - T1 * T1 * q[i]
                          + 2.0 * T1 * g1 * qTP[i] + g1 * g1 * qPP[i])
            Ftf[3 + i] = T1 * qTP[i] + g1 * qPP[i]
            Fff[3 + i] = qPP[i]

        G00 = dot6(Ft, Ft); G01 = dot6(Ft, Ff); G11 = dot6(Ff, Ff)
        det = G00 * G11 - G01 * G01
        Gi00 = G11 / det; Gi01 = -G01 / det; Gi11 = G00 / det

        sphere_proj(Ftt, p, q); normal_proj(Ftt, Ft, Ff, Gi00, Gi01, Gi11)
        sphere_proj(Ftf, p, q); normal_proj(Ftf, Ft, Ff, Gi00, Gi01, Gi11)
        sphere_proj(Fff, p, q); normal_proj(Fff, Ft, Ff, Gi00, Gi01, Gi11)
        for i in range(6):
            H[i] = Gi00 * Ftt[i] + 2.0 * Gi01 * Ftf[i] + Gi11 * Fff[i]

        alpha = H[0] * c - H[2] * s
        beta = H[1] * s / (s * s)
        x = q[0] + dt * (H[3] - alpha * Ft[3] - beta * Ff[3])
        y = q[1] + dt * (H[4] - alpha * Ft[4] - beta * Ff[4])
        z = q[2] + dt * (H[5] - alpha * Ft[5] - beta * Ff[5])
        nrm = sqrt(x * x + y * y + z * z)
        x /= nrm; y /= nrm; z /= nrm
        Tn[j] = atan2(hypot(x, y), z)
        d = atan2(y, x) - g[j]
        gn[j] = g[j] + atan2(sin(d), cos(d))
        if not (isfinite(Tn[j]) and isfinite(gn[j])):
            return NONFINITE
    Tn[0] = 0.0
    Tn[N] = M_PI
    gn[0] = (4.0 * gn[1] - gn[2]) / 3.0
    gn[N] = (4.0 * gn[N - 1] - gn[N - 2]) / 3.0
    if not (isfinite(gn[0]) and isfinite(gn[N])):
        return NONFINITE
    for j in range(N):
        if not (Tn[j + 1] > Tn[j]):
            return GRAPH_LOST
    return OK


def advance(theta, Theta, g, double dt, long nsteps):
    """Take ``nsteps`` steps in place. Returns ``(status, steps_done)``.

    On failure ``Theta`` and ``g`` hold the last good state.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] th = np.ascontiguousarray(theta, dtype=np.float64)
    cdef double[::1] Tv = Theta
    cdef double[::1] gv = g
    cdef int N = th.shape[0] - 1
    if Tv.shape[0] != N + 1 or gv.shape[0] != N + 1:
        raise ValueError("theta, Theta and g must have equal length")
    if N < 3:
        raise ValueError("grid too small")
    cdef double h = th[1] - th[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] Tn_arr = np.empty(N + 1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] gn_arr = np.empty(N + 1)
    cdef double* tp = &th[0]
    cdef double* Tp = &Tv[0]
    cdef double* gp = &gv[0]
    cdef double* Tn = &Tn_arr[0]
    cdef double* gn = &gn_arr[0]
    cdef double* tmp
    cdef long k
    cdef int status = OK
    cdef int j
    with nogil:
        for k in range(nsteps):
            status = _step(tp, Tp, gp, Tn, gn, N, h, dt)
            if status != OK:
                break
            for j in range(N + 1):
                Tp[j] = Tn[j]
                gp[j] = gn[j]
    if status != OK:
        return status, k
    return OK, nsteps
