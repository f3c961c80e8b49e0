# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops; see ``_pykernels`` for the reference."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fmin, fmax

cnp.import_array()


def vbap_locate(const double[:, :, ::1] inverses, const double[:, ::1] sources, double tol):
    cdef Py_ssize_t n = sources.shape[0], nt = inverses.shape[0]
    cdef Py_ssize_t s, t, i
    cdef double b0, b1, b2, x, y, z
    idx_arr = np.full(n, -1, dtype=np.intp)
    bary_arr = np.zeros((n, 3))
    cdef Py_ssize_t[::1] idx = idx_arr
    cdef double[:, ::1] bary = bary_arr
    for s in range(n):
        x = sources[s, 0]
        y = sources[s, 1]
        z = sources[s, 2]
        for t in range(nt):
            b0 = inverses[t, 0, 0] * x + inverses[t, 0, 1] * y + inverses[t, 0, 2] * z
            if b0 < -tol:
                continue
            b1 = inverses[t, 1, 0] * x + inverses[t, 1, 1] * y + inverses[t, 1, 2] * z
            if b1 < -tol:
                continue
            b2 = inverses[t, 2, 0] * x + inverses[t, 2, 1] * y + inverses[t, 2, 2] * z
            if b2 < -tol:
                continue
            idx[s] = t
            bary[s, 0] = b0
            bary[s, 1] = b1
            bary[s, 2] = b2
            break
    return idx_arr, bary_arr


def idhoa_cost_grad(const double[:, ::1] S, const double[:, ::1] U, const double[:, ::1] dirs,
                    const double[::1] w, const double[::1] alpha):
    cdef Py_ssize_t n = S.shape[0], ns = S.shape[1]
    cdef Py_ssize_t j, i, k
    cdef double s, c, E, P, Eph, vR, IR, IT2, vT2, wj, wi, neg, inv_e, g, iperp_i, iu
    cdef double v[3]
    cdef double I[3]
    cdef double Ip[3]
    cdef double t_p = 0, t_vr = 0, t_vt = 0, t_e = 0, t_ir = 0, t_it = 0, t_ph = 0
    G_arr = np.zeros((n, ns))
    cdef double[:, ::1] G = G_arr
    cdef double ipi
    for j in range(n):
        E = 0
        P = 0
        Eph = 0
        for k in range(3):
            v[k] = 0
            I[k] = 0
        for i in range(ns):
            s = S[j, i]
            E += s * s
            P += s
            neg = fmin(s, 0.0)
            Eph += neg * neg
            for k in range(3):
                v[k] += s * U[i, k]
                I[k] += s * s * U[i, k]
        vR = v[0] * dirs[j, 0] + v[1] * dirs[j, 1] + v[2] * dirs[j, 2]
        vT2 = fmax(v[0] * v[0] + v[1] * v[1] + v[2] * v[2] - vR * vR, 0.0)
        wj = w[j]
        if E > 0:
            inv_e = 1.0 / E
            wi = wj
        else:
            inv_e = 1.0
            wi = 0.0
        for k in range(3):
            I[k] *= inv_e
        IR = I[0] * dirs[j, 0] + I[1] * dirs[j, 1] + I[2] * dirs[j, 2]
        IT2 = fmax(I[0] * I[0] + I[1] * I[1] + I[2] * I[2] - IR * IR, 0.0)
        ipi = 0
        for k in range(3):
            Ip[k] = I[k] - IR * dirs[j, k]
            ipi += Ip[k] * I[k]
        t_p += wj * (1 - P) * (1 - P)
        t_vr += wj * (1 - vR) * (1 - vR)
        t_vt += wj * vT2
        t_e += wj * (1 - E) * (1 - E)
        t_ir += wi * (1 - IR) * (1 - IR)
        t_it += wi * IT2
        t_ph += wj * Eph * Eph
        for i in range(ns):
            s = S[j, i]
            c = U[i, 0] * dirs[j, 0] + U[i, 1] * dirs[j, 1] + U[i, 2] * dirs[j, 2]
            iu = Ip[0] * U[i, 0] + Ip[1] * U[i, 1] + Ip[2] * U[i, 2] - ipi
            g = alpha[0] * -2 * (1 - P) * wj
            g += alpha[1] * -2 * (1 - vR) * wj * c
            g += alpha[2] * wj * (2 * (v[0] * U[i, 0] + v[1] * U[i, 1] + v[2] * U[i, 2]) - 2 * vR * c)
            g += alpha[3] * -4 * (1 - E) * wj * s
            g += alpha[4] * -4 * (1 - IR) * wi * inv_e * s * (c - IR)
            g += alpha[5] * 4 * wi * inv_e * s * iu
            g += alpha[6] * 4 * Eph * wj * fmin(s, 0.0)
            G[j, i] = g / n
    terms = np.array([t_p, t_vr, t_vt, t_e, t_ir, t_it, t_ph]) / n
    cost = float(np.dot(np.asarray(alpha), terms))
    return cost, terms, G_arr
