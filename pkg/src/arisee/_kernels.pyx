# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batched channel/SINR kernels (same contract as ``_kernels_py``).

Complex arrays are viewed as interleaved (re, im) doubles so the inner loops
are plain real arithmetic instead of C99 complex calls.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline void _accumulate(double[:, ::1] d, double[:, ::1] t, double[:, ::1] c,
                             Py_ssize_t b, double* o, Py_ssize_t ne, Py_ssize_t km2) noexcept nogil:
    # o[0:km2] = direct + sum_e coeffs[b, e] * cascade[e]
    cdef Py_ssize_t e, j
    cdef double cr, ci, tr, ti
    for j in range(km2):
        o[j] = d[0, j]
    for e in range(ne):
        cr = c[b, 2 * e]
        ci = c[b, 2 * e + 1]
        if cr == 0.0 and ci == 0.0:
            continue
        for j in range(0, km2, 2):
            tr = t[e, j]
            ti = t[e, j + 1]
            o[j] += cr * tr - ci * ti
            o[j + 1] += cr * ti + ci * tr


cdef inline void _sinr_row(const double* ev, const double* gv, double* o,
                           Py_ssize_t nk, Py_ssize_t nm, double sigma2) noexcept nogil:
    cdef Py_ssize_t k, l, m
    cdef double ar, ai, er, ei, gr, gi, p, sig, inter
    for k in range(nk):
        sig = 0.0
        inter = 0.0
        for l in range(nk):
            ar = 0.0
            ai = 0.0
            for m in range(nm):
                er = ev[2 * (k * nm + m)]
                ei = ev[2 * (k * nm + m) + 1]
                gr = gv[2 * (l * nm + m)]
                gi = gv[2 * (l * nm + m) + 1]
                ar += er * gr - ei * gi
                ai += er * gi + ei * gr
            p = ar * ar + ai * ai
            if l == k:
                sig = p
            else:
                inter += p
        o[k] = sig / (inter + sigma2)


def _flat(x, shape):
    return np.ascontiguousarray(x, dtype=np.complex128).reshape(shape).view(np.float64)


def effective_channels(direct, cascade, coeffs):
    cascade = np.asarray(cascade)
    cdef Py_ssize_t ne = cascade.shape[0], nk = cascade.shape[1], nm = cascade.shape[2]
    cdef double[:, ::1] d = _flat(direct, (1, nk * nm))
    cdef double[:, ::1] t = _flat(cascade, (ne, nk * nm))
    cdef double[:, ::1] c = _flat(coeffs, (-1, ne))
    cdef Py_ssize_t nb = c.shape[0], b, km2 = 2 * nk * nm
    out = np.empty((nb, nk, nm), dtype=np.complex128)
    cdef double[:, ::1] o = out.reshape(nb, nk * nm).view(np.float64)
    with nogil:
        for b in range(nb):
            _accumulate(d, t, c, b, &o[b, 0], ne, km2)
    return out


def sinr_from_effective(eff, g, double sigma2):
    eff = np.asarray(eff)
    g = np.asarray(g)
    cdef Py_ssize_t be = eff.shape[0], bg = g.shape[0]
    cdef Py_ssize_t nb = be if be > bg else bg
    if not (be == nb or be == 1) or not (bg == nb or bg == 1):
        raise ValueError("batch sizes must match or be 1")
    cdef Py_ssize_t nk = eff.shape[1], nm = eff.shape[2]
    cdef double[:, ::1] ev = _flat(eff, (be, nk * nm))
    cdef double[:, ::1] gv = _flat(g, (bg, nk * nm))
    out = np.empty((nb, nk), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t b
    with nogil:
        for b in range(nb):
            _sinr_row(&ev[b if be > 1 else 0, 0], &gv[b if bg > 1 else 0, 0], &o[b, 0], nk, nm, sigma2)
    return out


def batch_sinr(direct, cascade, coeffs, g, double sigma2):
    """Fused evaluation; one effective-channel row is kept in a scratch buffer."""
    cascade = np.asarray(cascade)
    g = np.asarray(g)
    cdef Py_ssize_t ne = cascade.shape[0], nk = cascade.shape[1], nm = cascade.shape[2]
    cdef double[:, ::1] d = _flat(direct, (1, nk * nm))
    cdef double[:, ::1] t = _flat(cascade, (ne, nk * nm))
    cdef double[:, ::1] c = _flat(coeffs, (-1, ne))
    cdef Py_ssize_t nb = c.shape[0], bg = g.shape[0], b
    if not (bg == nb or bg == 1):
        raise ValueError("batch sizes must match or be 1")
    cdef double[:, ::1] gv = _flat(g, (bg, nk * nm))
    cdef double[::1] scratch = np.empty(2 * nk * nm, dtype=np.float64)
    out = np.empty((nb, nk), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for b in range(nb):
            _accumulate(d, t, c, b, &scratch[0], ne, 2 * nk * nm)
            _sinr_row(&scratch[0], &gv[b if bg > 1 else 0, 0], &o[b, 0], nk, nm, sigma2)
    return out
