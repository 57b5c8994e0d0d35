# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled MLP kernels, same contract and flat layout as ``_pykernels``.

Row-major buffers are handed to column-major BLAS as their transposes.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport pow
from scipy.linalg.cython_blas cimport dgemm

cdef extern from *:
    """
    #include <math.h>
    static inline double relu_d(double x) { return x > 0.0 ? x : 0.0; }
    static inline double clamp_d(double x, double lo, double hi) {
        x = x < lo ? lo : x;
        return x > hi ? hi : x;
    }
    static void colsum(const double *restrict g, double *restrict out, int n, int m) {
        for (int j = 0; j < m; j++) out[j] = 0.0;
        for (int i = 0; i < n; i++) {
            const double *restrict row = g + (Py_ssize_t) i * m;
            for (int j = 0; j < m; j++) out[j] += row[j];
        }
    }
    static void mask_inside(double *restrict g, const double *restrict raw, Py_ssize_t n,
                            double lo, double hi) {
        for (Py_ssize_t i = 0; i < n; i++) g[i] = (raw[i] > lo && raw[i] < hi) ? g[i] : 0.0;
    }
    static void mask_positive(double *restrict g, const double *restrict h, Py_ssize_t n) {
        for (Py_ssize_t i = 0; i < n; i++) g[i] = h[i] > 0.0 ? g[i] : 0.0;
    }
    static void adam_kernel(double *restrict th, const double *restrict g,
                            double *restrict m, double *restrict v, Py_ssize_t n,
                            double lr, double b1, double b2, double eps,
                            double c1, double c2) {
        double ic1 = 1.0 / c1, ic2 = 1.0 / c2;
        for (Py_ssize_t i = 0; i < n; i++) {
            double gi = g[i];
            double mi = b1 * m[i] + (1.0 - b1) * gi;
            double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
            m[i] = mi;
            v[i] = vi;
            th[i] -= lr * (mi * ic1) / (sqrt(vi * ic2) + eps);
        }
    }
    """
    void colsum(const double* g, double* out, int n, int m) nogil
    void mask_inside(double* g, const double* raw, Py_ssize_t n, double lo, double hi) nogil
    void mask_positive(double* g, const double* h, Py_ssize_t n) nogil
    double relu_d(double x) nogil
    double clamp_d(double x, double lo, double hi) nogil
    void adam_kernel(double* th, const double* g, double* m, double* v, Py_ssize_t n,
                     double lr, double b1, double b2, double eps, double c1, double c2) nogil

cnp.import_array()

NAME = "cython"


cdef class Cache:
    cdef public list acts
    cdef public object raw
    cdef public double lo, hi

    def __init__(self, list acts, raw, double lo, double hi):
        self.acts = acts
        self.raw = raw
        self.lo = lo
        self.hi = hi


cdef void _affine(double* h, double* W, double* b, double* z, int n, int k, int m) noexcept nogil:
    # z (n x m) = h (n x k) @ W.T (k x m) + b
    cdef int i, j
    cdef double one = 1.0, zero = 0.0
    cdef char ta = b'T'
    cdef char tb = b'N'
    for i in range(n):
        for j in range(m):
            z[i * m + j] = b[j]
    dgemm(&ta, &tb, &m, &n, &k, &one, W, &k, h, &k, &one, z, &m)


def forward(dims, double[::1] theta, X, double lo, double hi):
    cdef int nl = len(dims) - 1
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] h = np.ascontiguousarray(X, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] z
    cdef int n = h.shape[0]
    cdef int layer, k, m, i, size
    cdef Py_ssize_t off = 0
    cdef double* zp
    acts = [h]
    for layer in range(nl):
        k = dims[layer]
        m = dims[layer + 1]
        z = np.empty((n, m))
        _affine(<double*> h.data, &theta[off], &theta[off + m * k], <double*> z.data, n, k, m)
        off += m * k + m
        if layer < nl - 1:
            zp = <double*> z.data
            size = n * m
            for i in range(size):
                zp[i] = relu_d(zp[i])
            acts.append(z)
            h = z
    out = np.empty_like(z)
    cdef double* op = <double*> cnp.PyArray_DATA(out)
    zp = <double*> z.data
    size = n * m
    for i in range(size):
        op[i] = clamp_d(zp[i], lo, hi)
    return out, Cache(acts, z, lo, hi)


def predict(dims, double[::1] theta, X, double lo, double hi):
    return forward(dims, theta, X, lo, hi)[0]


def backward(dims, double[::1] theta, Cache cache, gout):
    cdef int nl = len(dims) - 1
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] raw = cache.raw
    cdef int n = raw.shape[0]
    cdef int m = raw.shape[1]
    cdef double lo = cache.lo, hi = cache.hi
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] g = np.array(gout, dtype=np.float64, order="C", copy=True)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] h, gprev
    cdef double* gp = <double*> g.data
    cdef double* rp = <double*> raw.data
    cdef double* hp
    cdef double* gpp
    cdef int k, layer
    cdef double one = 1.0, zero = 0.0
    cdef char tn = b'N'
    cdef char tt = b'T'
    grad = np.empty(theta.shape[0])
    cdef double[::1] gr = grad
    cdef Py_ssize_t off = theta.shape[0]

    mask_inside(gp, rp, n * m, lo, hi)

    for layer in range(nl - 1, -1, -1):
        k = dims[layer]
        m = dims[layer + 1]
        h = cache.acts[layer]
        hp = <double*> h.data
        off -= m
        colsum(gp, &gr[off], n, m)
        off -= m * k
        # dW (m x k, row-major) = g.T @ h
        dgemm(&tn, &tt, &k, &m, &n, &one, hp, &k, gp, &m, &zero, &gr[off], &k)
        if layer > 0:
            # g_prev (n x k) = g @ W, masked by relu
            gprev = np.empty((n, k))
            gpp = <double*> gprev.data
            dgemm(&tn, &tn, &k, &n, &m, &one, &theta[off], &k, gp, &m, &zero, gpp, &k)
            mask_positive(gpp, hp, n * k)
            g = gprev
            gp = gpp
    return grad


def adam_update(double[::1] theta, double[::1] grad, double[::1] m, double[::1] v,
                long step, double lr, double beta1, double beta2, double eps):
    cdef double c1 = 1.0 - pow(beta1, <double> step)
    cdef double c2 = 1.0 - pow(beta2, <double> step)
    with nogil:
        adam_kernel(&theta[0], &grad[0], &m[0], &v[0], theta.shape[0],
                    lr, beta1, beta2, eps, c1, c2)
