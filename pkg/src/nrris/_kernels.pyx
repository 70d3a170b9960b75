# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False, language_level=3
"""Compiled quartic beampattern kernels; same contract as ``_kernels_py``.

The response matrix is never formed: the forward pass evaluates the
array polynomial by Horner's rule at each grid phasor and the adjoint
accumulates running conjugate powers, both in ``_vandermonde.h``.  All
scratch space is allocated per call, so one prepared handle may be shared
between threads.
"""

import numpy as np

from libc.stdlib cimport calloc, free, malloc

NAME = "cython"


cdef extern from "_vandermonde.h" nogil:
    const int NR_LANES
    void nr_forward(size_t L, size_t N, const double *zr, const double *zi,
                    const double *xr, const double *xi, double *yr, double *yi)
    void nr_adjoint(size_t L, size_t N, const double *zr, const double *zi,
                    const double *sr, const double *si, double *hr, double *hi,
                    double *outr, double *outi)


cdef class Prepared:
    """Grid phasors (padded to whole lanes) and incident-side weights."""

    cdef readonly object zr, zi, ur, ui
    cdef readonly Py_ssize_t L, Lpad, N

    def __init__(self, z, u):
        z = np.asarray(z, dtype=np.complex128).ravel()
        u = np.asarray(u, dtype=np.complex128).ravel()
        self.L = z.size
        self.N = u.size
        self.Lpad = (self.L + NR_LANES - 1) // NR_LANES * NR_LANES
        zp = np.ones(self.Lpad, dtype=np.complex128)
        zp[: self.L] = z
        self.zr = np.ascontiguousarray(zp.real)
        self.zi = np.ascontiguousarray(zp.imag)
        self.ur = np.ascontiguousarray(u.real)
        self.ui = np.ascontiguousarray(u.imag)

    @property
    def u(self):
        return self.ur + 1j * self.ui


def prepare(z, u):
    return Prepared(z, u)


cdef class _Work:
    """Per-call buffers: inputs, responses, residual weights and adjoint."""

    cdef double *xr
    cdef double *xi
    cdef double *yr
    cdef double *yi
    cdef double *hr
    cdef double *hi
    cdef double *gr
    cdef double *gi

    def __cinit__(self, Py_ssize_t Lpad, Py_ssize_t N):
        self.xr = <double *> malloc(N * sizeof(double))
        self.xi = <double *> malloc(N * sizeof(double))
        self.yr = <double *> malloc(Lpad * sizeof(double))
        self.yi = <double *> malloc(Lpad * sizeof(double))
        self.hr = <double *> calloc(N * NR_LANES, sizeof(double))
        self.hi = <double *> calloc(N * NR_LANES, sizeof(double))
        self.gr = <double *> malloc(N * sizeof(double))
        self.gi = <double *> malloc(N * sizeof(double))
        if not (self.xr and self.xi and self.yr and self.yi and self.hr and self.hi
                and self.gr and self.gi):
            raise MemoryError()

    def __dealloc__(self):
        free(self.xr)
        free(self.xi)
        free(self.yr)
        free(self.yi)
        free(self.hr)
        free(self.hi)
        free(self.gr)
        free(self.gi)


cdef _Work _forward(Prepared h, phi):
    cdef const double complex[::1] p = np.ascontiguousarray(phi, dtype=np.complex128)
    if p.shape[0] != h.N:
        raise ValueError(f"phi has {p.shape[0]} entries, expected {h.N}")
    cdef const double[::1] ur = h.ur, ui = h.ui, zr = h.zr, zi = h.zi
    cdef _Work w = _Work(h.Lpad, h.N)
    cdef Py_ssize_t n
    with nogil:
        for n in range(h.N):
            w.xr[n] = p[n].real * ur[n] - p[n].imag * ui[n]
            w.xi[n] = p[n].real * ui[n] + p[n].imag * ur[n]
        nr_forward(h.Lpad, h.N, &zr[0], &zi[0], w.xr, w.xi, w.yr, w.yi)
    return w


cdef double _finish(Prepared h, _Work w, P, double alpha, grad, wt) except? -1.0:
    cdef const double[::1] Pv = np.ascontiguousarray(P, dtype=np.float64)
    cdef const double[::1] wv
    cdef bint weighted = wt is not None
    if weighted:
        wv = np.ascontiguousarray(wt, dtype=np.float64)
    if Pv.shape[0] != h.L or (weighted and wv.shape[0] != h.L):
        raise ValueError("target and weight lengths must match the grid")
    cdef double complex[::1] g
    cdef bint want = grad is not None
    if want:
        if grad.dtype != np.complex128:
            raise TypeError("grad must be a complex128 array")
        g = grad
    cdef const double[::1] zr = h.zr, zi = h.zi, ur = h.ur, ui = h.ui
    cdef Py_ssize_t l, n
    cdef double r, s, total = 0.0
    with nogil:
        for l in range(h.L):
            r = w.yr[l] * w.yr[l] + w.yi[l] * w.yi[l] - alpha * Pv[l]
            s = wv[l] * r if weighted else r
            total += s * r
            # reuse the response buffer for the adjoint input s_l y_l
            w.yr[l] *= s
            w.yi[l] *= s
        for l in range(h.L, h.Lpad):
            w.yr[l] = 0.0
            w.yi[l] = 0.0
        if want:
            nr_adjoint(h.Lpad, h.N, &zr[0], &zi[0], w.yr, w.yi, w.hr, w.hi, w.gr, w.gi)
            for n in range(h.N):
                # conj(u_n) * adjoint_n
                g[n] = g[n] + (ur[n] * w.gr[n] + ui[n] * w.gi[n]) + 1j * (ur[n] * w.gi[n] - ui[n] * w.gr[n])
    return total


def form_values(Prepared h, phi):
    cdef _Work w = _forward(h, phi)
    out = np.empty(h.L)
    cdef double[::1] o = out
    cdef Py_ssize_t l
    for l in range(h.L):
        o[l] = w.yr[l] * w.yr[l] + w.yi[l] * w.yi[l]
    return out


def residual_terms(Prepared h, P, phi, double alpha, grad=None, w=None):
    return _finish(h, _forward(h, phi), P, alpha, grad, w)


def profiled_terms(Prepared h, P, phi, grad=None, w=None):
    cdef _Work work = _forward(h, phi)
    cdef const double[::1] Pv = np.ascontiguousarray(P, dtype=np.float64)
    cdef const double[::1] wv
    cdef bint weighted = w is not None
    if weighted:
        wv = np.ascontiguousarray(w, dtype=np.float64)
    if Pv.shape[0] != h.L or (weighted and wv.shape[0] != h.L):
        raise ValueError("target and weight lengths must match the grid")
    cdef double num = 0.0, den = 0.0, wp, q
    cdef Py_ssize_t l
    for l in range(h.L):
        q = work.yr[l] * work.yr[l] + work.yi[l] * work.yi[l]
        wp = wv[l] * Pv[l] if weighted else Pv[l]
        num += wp * q
        den += wp * Pv[l]
    if den == 0.0:
        raise ZeroDivisionError("target pattern has no weighted support")
    alpha = num / den
    return _finish(h, work, P, alpha, grad, w), alpha
