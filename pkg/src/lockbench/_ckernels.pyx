# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; semantics mirror ``_pykernels``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def erm_error_counts(const double[:, ::1] X, y):
    cdef const long long[::1] lab = np.ascontiguousarray(y, dtype=np.int64)
    cdef Py_ssize_t m = X.shape[0], d = X.shape[1], i, j
    # pos[c, j] / neg[c, j]: samples of class c with x_j > 0 / x_j < 0
    cdef long long[:, ::1] pos = np.zeros((2, d), dtype=np.int64)
    cdef long long[:, ::1] neg = np.zeros((2, d), dtype=np.int64)
    cdef long long n1 = 0
    cdef long long *pp
    cdef long long *pn
    cdef const double *row
    cdef int c
    with nogil:
        for i in range(m):
            c = lab[i] != 0
            n1 += c
            pp = &pos[c, 0]
            pn = &neg[c, 0]
            row = &X[i, 0]
            for j in range(d):
                pp[j] += row[j] > 0
                pn[j] += row[j] < 0
    out = np.empty((d, 2), dtype=np.int64)
    cdef long long[:, ::1] cnt = out
    for j in range(d):
        # errors: class-1 samples predicted 0 plus class-0 samples predicted 1
        cnt[j, 0] = n1 - pos[1, j] + pos[0, j]
        cnt[j, 1] = n1 - neg[1, j] + neg[0, j]
    return out


def sgd_sequential(double[::1] flat, const long long[::1] sizes, const double[:, ::1] X,
                   const long long[::1] out_idx, const double[::1] targets, double lr):
    cdef Py_ssize_t L = sizes.shape[0] - 1
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t l, i, j, k, s, fi, fo, width = 0, off
    for l in range(L + 1):
        if sizes[l] > width:
            width = sizes[l]
    cdef long long[::1] woff = np.empty(L, dtype=np.int64)
    cdef long long[::1] boff = np.empty(L, dtype=np.int64)
    off = 0
    for l in range(L):
        woff[l] = off
        off += sizes[l] * sizes[l + 1]
        boff[l] = off
        off += sizes[l + 1]
    # acts[l] is the input of layer l; acts[L] the network output
    cdef double[:, ::1] acts = np.zeros((L + 1, width))
    cdef double[:, ::1] pres = np.zeros((L, width))
    cdef double[::1] delta = np.zeros(width)
    cdef double[::1] prev = np.zeros(width)
    cdef double z, dk
    for s in range(n):
        for j in range(sizes[0]):
            acts[0, j] = X[s, j]
        for l in range(L):
            fi = sizes[l]
            fo = sizes[l + 1]
            for k in range(fo):
                pres[l, k] = 0.0
            for j in range(fi):
                z = acts[l, j]
                if z != 0.0:
                    for k in range(fo):
                        pres[l, k] += z * flat[woff[l] + j * fo + k]
            for k in range(fo):
                z = pres[l, k] + flat[boff[l] + k]
                pres[l, k] = z
                if l < L - 1 and z < 0.0:
                    z = 0.0
                acts[l + 1, k] = z
        fo = sizes[L]
        for k in range(fo):
            delta[k] = 0.0
        k = out_idx[s]
        delta[k] = 2.0 * (acts[L, k] - targets[s])
        for l in range(L - 1, -1, -1):
            fi = sizes[l]
            fo = sizes[l + 1]
            if l < L - 1:
                for k in range(fo):
                    if pres[l, k] <= 0.0:
                        delta[k] = 0.0
            if l > 0:
                for j in range(fi):
                    z = 0.0
                    for k in range(fo):
                        z += flat[woff[l] + j * fo + k] * delta[k]
                    prev[j] = z
            for j in range(fi):
                z = lr * acts[l, j]
                if z != 0.0:
                    for k in range(fo):
                        flat[woff[l] + j * fo + k] -= z * delta[k]
            for k in range(fo):
                flat[boff[l] + k] -= lr * delta[k]
            if l > 0:
                for j in range(fi):
                    delta[j] = prev[j]


from libc.math cimport sqrt
from cython cimport floating


def adamw_update(floating[::1] theta, const floating[::1] grad, floating[::1] m, floating[::1] v,
                 double lr, double weight_decay, double beta1, double beta2, double eps, long step):
    cdef Py_ssize_t i, n = theta.shape[0]
    cdef double decay = 1.0 - lr * weight_decay
    cdef double bc1 = 1.0 - beta1 ** step
    cdef double bc2 = 1.0 - beta2 ** step
    cdef double g, mi, vi, th
    with nogil:
        for i in range(n):
            g = grad[i]
            th = theta[i]
            if weight_decay != 0.0:
                th = th * decay
            mi = beta1 * m[i] + (1.0 - beta1) * g
            vi = beta2 * v[i] + (1.0 - beta2) * (g * g)
            m[i] = mi
            v[i] = vi
            theta[i] = th - lr * (mi / bc1) / (sqrt(vi / bc2) + eps)
