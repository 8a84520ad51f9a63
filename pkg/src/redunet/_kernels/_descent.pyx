# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled full-batch gradient descent for the penalized perceptron loss.

Same contract as ``_pydescent.descend``; the whole loop runs without the GIL.
"""

import numpy as np

from libc.math cimport exp, sqrt, isfinite
from libc.string cimport memcpy
from scipy.linalg.cython_blas cimport dgemm

cdef enum:
    MAX_ITERS = 0
    GRAD_TOL = 1
    DIVERGED = 2


cdef inline double _sig(double t) noexcept nogil:
    return 1.0 / (1.0 + exp(-t))


cdef inline void _gemm(char ta, char tb, int m, int n, int k, double* A, int lda,
                       double* B, int ldb, double* C, int ldc) noexcept nogil:
    # row-major C (m x n) = op(A) op(B); BLAS is column-major, so compute C^T = op(B)^T op(A)^T
    cdef double one = 1.0, zero = 0.0
    dgemm(&tb, &ta, &n, &m, &k, &one, B, &ldb, A, &lda, &zero, C, &ldc)


cdef double _evaluate(double[:, ::1] V, double[:, ::1] U,
                      const double[:, ::1] X, const double[:, ::1] Y,
                      const Py_ssize_t[::1] memb, const double[::1] coef, double eps,
                      double[:, ::1] H, double[:, ::1] O, double[:, ::1] G,
                      double[:, ::1] dU, double[:, ::1] dV, double[::1] gsq,
                      double* gnorm) noexcept nogil:
    cdef int h = <int>V.shape[0], p = <int>V.shape[1], c = <int>U.shape[0], N = <int>X.shape[1]
    cdef Py_ssize_t s = coef.shape[0]
    cdef Py_ssize_t k, j, l, n, g
    cdef double r, o, e0 = 0.0, pen = 0.0, Hg, sq = 0.0
    cdef double* Xp = <double*>&X[0, 0]

    _gemm(b"n", b"n", h, N, p, &V[0, 0], p, Xp, N, &H[0, 0], N)
    for k in range(h):
        for n in range(N):
            H[k, n] = _sig(H[k, n])
    _gemm(b"n", b"n", c, N, h, &U[0, 0], h, &H[0, 0], N, &O[0, 0], N)
    # residual -> output delta, stored in O
    for l in range(c):
        for n in range(N):
            o = _sig(O[l, n])
            r = o - Y[l, n]
            e0 += r * r
            O[l, n] = 2.0 * r * o * (1.0 - o)
    _gemm(b"n", b"t", c, h, N, &O[0, 0], N, &H[0, 0], N, &dU[0, 0], h)
    _gemm(b"t", b"n", h, N, c, &U[0, 0], h, &O[0, 0], N, &G[0, 0], N)
    for k in range(h):
        for n in range(N):
            G[k, n] *= H[k, n] * (1.0 - H[k, n])
    _gemm(b"n", b"t", h, p, N, &G[0, 0], N, Xp, N, &dV[0, 0], p)
    for l in range(c):
        for k in range(h):
            sq += dU[l, k] * dU[l, k]
    # group penalty
    for g in range(s):
        gsq[g] = 0.0
    for k in range(h):
        for j in range(p):
            gsq[memb[j]] += V[k, j] * V[k, j]
    for g in range(s):
        Hg = sqrt(gsq[g] + eps * eps)
        pen += coef[g] * Hg
        # reuse gsq as the gradient scale
        gsq[g] = coef[g] / Hg if Hg > 0.0 else 0.0
    for k in range(h):
        for j in range(p):
            dV[k, j] += gsq[memb[j]] * V[k, j]
            sq += dV[k, j] * dV[k, j]
    gnorm[0] = sqrt(sq)
    return e0 + pen


cdef void _group_norms(double[:, ::1] V, const Py_ssize_t[::1] memb, double[::1] out) noexcept nogil:
    cdef Py_ssize_t k, j, g
    for g in range(out.shape[0]):
        out[g] = 0.0
    for k in range(V.shape[0]):
        for j in range(V.shape[1]):
            out[memb[j]] += V[k, j] * V[k, j]
    for g in range(out.shape[0]):
        out[g] = sqrt(out[g])


def descend(V, U, X, Y, membership, coef, double eps, double eta, Py_ssize_t max_iters,
            double grad_tol=0.0, Py_ssize_t checkpoint_every=0):
    cdef double[:, ::1] Vm = np.array(V, dtype=np.float64, order="C")
    cdef double[:, ::1] Um = np.array(U, dtype=np.float64, order="C")
    cdef const double[:, ::1] Xm = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] Ym = np.ascontiguousarray(Y, dtype=np.float64)
    cdef const Py_ssize_t[::1] memb = np.ascontiguousarray(membership, dtype=np.intp)
    cdef const double[::1] cf = np.ascontiguousarray(coef, dtype=np.float64)
    cdef Py_ssize_t h = Vm.shape[0], p = Vm.shape[1], c = Um.shape[0], N = Xm.shape[1]
    cdef Py_ssize_t s = cf.shape[0]
    if Xm.shape[0] != p or Ym.shape[0] != c or Ym.shape[1] != N or Um.shape[1] != h or memb.shape[0] != p:
        raise ValueError("inconsistent array shapes")

    loss_a = np.empty(max_iters + 1)
    gnorm_a = np.empty(max_iters + 1)
    norms_a = np.empty((max_iters + 1, s))
    cdef double[::1] loss = loss_a
    cdef double[::1] gn_hist = gnorm_a
    cdef double[:, ::1] norms = norms_a
    cdef double[:, ::1] Hb = np.empty((h, N))
    cdef double[:, ::1] Ob = np.empty((c, N))
    cdef double[:, ::1] Gb = np.empty((h, N))
    cdef double[:, ::1] dU = np.empty((c, h))
    cdef double[:, ::1] dV = np.empty((h, p))
    cdef double[:, ::1] Vprev = np.empty((h, p))
    cdef double[:, ::1] Uprev = np.empty((c, h))
    cdef double[::1] gsq = np.empty(s)

    cdef Py_ssize_t n_ck = max_iters // checkpoint_every + 1 if checkpoint_every > 0 else 0
    ckV_a = np.empty((n_ck, h, p))
    ckU_a = np.empty((n_ck, c, h))
    cdef double[:, :, ::1] ckV = ckV_a
    cdef double[:, :, ::1] ckU = ckU_a

    cdef Py_ssize_t m, k, j, l, run = max_iters
    cdef int status = MAX_ITERS
    cdef double E, g

    with nogil:
        for m in range(max_iters + 1):
            E = _evaluate(Vm, Um, Xm, Ym, memb, cf, eps, Hb, Ob, Gb, dU, dV, gsq, &g)
            if not (isfinite(E) and isfinite(g)):
                if m == 0:
                    status = -1
                    break
                memcpy(&Vm[0, 0], &Vprev[0, 0], h * p * sizeof(double))
                memcpy(&Um[0, 0], &Uprev[0, 0], c * h * sizeof(double))
                status = DIVERGED
                run = m - 1
                break
            loss[m] = E
            gn_hist[m] = g
            _group_norms(Vm, memb, norms[m])
            if checkpoint_every > 0 and m % checkpoint_every == 0:
                memcpy(&ckV[m // checkpoint_every, 0, 0], &Vm[0, 0], h * p * sizeof(double))
                memcpy(&ckU[m // checkpoint_every, 0, 0], &Um[0, 0], c * h * sizeof(double))
            if g <= grad_tol:
                status = GRAD_TOL
                run = m
                break
            if m == max_iters:
                break
            memcpy(&Vprev[0, 0], &Vm[0, 0], h * p * sizeof(double))
            memcpy(&Uprev[0, 0], &Um[0, 0], c * h * sizeof(double))
            for k in range(h):
                for j in range(p):
                    Vm[k, j] -= eta * dV[k, j]
            for l in range(c):
                for k in range(h):
                    Um[l, k] -= eta * dU[l, k]

    if status == -1:
        raise FloatingPointError("non-finite loss at the initial weights")
    ckpt = {}
    if checkpoint_every > 0:
        for m in range(0, run + 1, checkpoint_every):
            ckpt[m] = (ckV_a[m // checkpoint_every].copy(), ckU_a[m // checkpoint_every].copy())
    n = run + 1
    return (np.asarray(Vm), np.asarray(Um), loss_a[:n], gnorm_a[:n], norms_a[:n], run, status, ckpt)
