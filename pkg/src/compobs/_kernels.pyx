# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled ADMM inner loops; same contract as ``_kernels_py``.

Matrices arrive C-contiguous.  A C-order ``(m, n)`` array is the Fortran
``(n, m)`` matrix with ``lda = n``, so ``Mat @ v`` is BLAS ``dgemv('T')``
and ``Mat.T @ v`` is ``dgemv('N')``.
"""

import numpy as np
from libc.math cimport sqrt, fabs
from scipy.linalg.cython_blas cimport dgemv, dnrm2

cdef double MU = 10.0
cdef double TAU = 2.0


cdef inline void _matvec(double[:, ::1] A, double* v, double* out, double beta) noexcept nogil:
    # out = A @ v + beta * out
    cdef int m = A.shape[0], n = A.shape[1], one = 1
    cdef double alpha = 1.0
    cdef char trans = b'T'
    dgemv(&trans, &n, &m, &alpha, &A[0, 0], &n, v, &one, &beta, out, &one)


cdef inline void _rmatvec(double[:, ::1] A, double* v, double* out, double beta) noexcept nogil:
    # out = A.T @ v + beta * out
    cdef int m = A.shape[0], n = A.shape[1], one = 1
    cdef double alpha = 1.0
    cdef char trans = b'N'
    dgemv(&trans, &n, &m, &alpha, &A[0, 0], &n, v, &one, &beta, out, &one)


cdef inline double _nrm(double* v, int n) noexcept nogil:
    cdef int one = 1
    return dnrm2(&n, v, &one)


cdef inline double _soft(double v, double t) noexcept nogil:
    if v > t:
        return v - t
    if v < -t:
        return v + t
    return 0.0


def bp_admm(double[:, ::1] P, double[::1] q, double[::1] x, double[::1] z, double[::1] u,
            double rho, int max_iter, double abs_tol, double rel_tol, int adapt_every):
    cdef int n = x.shape[0]
    cdef int it, i
    cdef double r_norm = np.inf, s_norm = np.inf, eps_pri, eps_dual
    cdef double nx, nz, nu, d, zi
    cdef double[::1] v = np.empty(n)
    cdef double[::1] pv = np.empty(n)
    cdef bint converged = False
    with nogil:
        for it in range(1, max_iter + 1):
            for i in range(n):
                v[i] = z[i] - u[i]
            _matvec(P, &v[0], &pv[0], 0.0)
            r_norm = 0.0
            s_norm = 0.0
            nx = 0.0
            nz = 0.0
            nu = 0.0
            for i in range(n):
                x[i] = v[i] - pv[i] + q[i]
                zi = _soft(x[i] + u[i], 1.0 / rho)
                d = zi - z[i]
                s_norm += d * d
                z[i] = zi
                d = x[i] - zi
                u[i] += d
                r_norm += d * d
                nx += x[i] * x[i]
                nz += zi * zi
                nu += u[i] * u[i]
            r_norm = sqrt(r_norm)
            s_norm = rho * sqrt(s_norm)
            eps_pri = abs_tol + rel_tol * sqrt(nx if nx > nz else nz)
            eps_dual = abs_tol + rel_tol * rho * sqrt(nu)
            if r_norm <= eps_pri and s_norm <= eps_dual:
                converged = True
                break
            if adapt_every > 0 and it % adapt_every == 0:
                if r_norm > MU * s_norm:
                    rho *= TAU
                    for i in range(n):
                        u[i] /= TAU
                elif s_norm > MU * r_norm:
                    rho /= TAU
                    for i in range(n):
                        u[i] *= TAU
    if not converged:
        it = max_iter
    return it, bool(converged), rho, r_norm, s_norm


def bpdn_admm(double[:, ::1] Minv, double[:, ::1] B, double[:, ::1] Phi, double[::1] y, double eta,
              double[::1] x, double[::1] z, double[::1] u, double[::1] w, double[::1] s,
              double rho, int max_iter, double abs_tol, double rel_tol, int adapt_every):
    cdef int n = x.shape[0], m = y.shape[0]
    cdef int it, i
    cdef double r_norm = np.inf, s_norm = np.inf, eps_pri, eps_dual
    cdef double y_norm, wn, d, zi, r1, r2, a1, a2
    cdef double[::1] v = np.empty(n)
    cdef double[::1] t = np.empty(m)
    cdef double[::1] phix = np.empty(m)
    cdef double[::1] dz = np.empty(n)
    cdef double[::1] dw = np.empty(m)
    cdef double[::1] g = np.empty(n)
    cdef bint converged = False
    with nogil:
        y_norm = _nrm(&y[0], m)
        for it in range(1, max_iter + 1):
            for i in range(n):
                v[i] = z[i] - u[i]
            for i in range(m):
                t[i] = y[i] + w[i] - s[i]
            _matvec(Minv, &v[0], &x[0], 0.0)
            _matvec(B, &t[0], &x[0], 1.0)
            _matvec(Phi, &x[0], &phix[0], 0.0)
            r_norm = 0.0
            a1 = 0.0
            a2 = 0.0
            for i in range(n):
                zi = _soft(x[i] + u[i], 1.0 / rho)
                dz[i] = zi - z[i]
                z[i] = zi
                d = x[i] - zi
                u[i] += d
                r_norm += d * d
                a1 += x[i] * x[i]
                a2 += zi * zi
            wn = 0.0
            for i in range(m):
                t[i] = phix[i] - y[i] + s[i]
                wn += t[i] * t[i]
            wn = sqrt(wn)
            for i in range(m):
                d = t[i] * (eta / wn) if wn > eta else t[i]
                dw[i] = d - w[i]
                w[i] = d
                d = phix[i] - y[i] - d
                s[i] += d
                r_norm += d * d
                a1 += phix[i] * phix[i]
                a2 += w[i] * w[i]
            r_norm = sqrt(r_norm)
            # dual residual rho * |dz + Phi^T dw|
            _rmatvec(Phi, &dw[0], &g[0], 0.0)
            s_norm = 0.0
            for i in range(n):
                d = dz[i] + g[i]
                s_norm += d * d
            s_norm = rho * sqrt(s_norm)
            _rmatvec(Phi, &s[0], &g[0], 0.0)
            d = 0.0
            for i in range(n):
                d += (u[i] + g[i]) * (u[i] + g[i])
            eps_dual = abs_tol + rel_tol * rho * sqrt(d)
            a1 = sqrt(a1)
            a2 = sqrt(a2)
            if a2 > a1:
                a1 = a2
            if y_norm > a1:
                a1 = y_norm
            eps_pri = abs_tol + rel_tol * a1
            if r_norm <= eps_pri and s_norm <= eps_dual:
                converged = True
                break
            if adapt_every > 0 and it % adapt_every == 0:
                if r_norm > MU * s_norm:
                    rho *= TAU
                    for i in range(n):
                        u[i] /= TAU
                    for i in range(m):
                        s[i] /= TAU
                elif s_norm > MU * r_norm:
                    rho /= TAU
                    for i in range(n):
                        u[i] *= TAU
                    for i in range(m):
                        s[i] *= TAU
    if not converged:
        it = max_iter
    return it, bool(converged), rho, r_norm, s_norm
