# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_pykernels``.

Same signatures, same arithmetic order; results are bit-identical.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, floor, fabs, INFINITY
from libc.stdint cimport int64_t

cnp.import_array()

BACKEND = "cython"

cdef double DET_EPS = 1e-12
cdef double BARY_EPS = 1e-10

cdef int PAIR_I[3]
cdef int PAIR_J[3]
PAIR_I[:] = [0, 0, 1]
PAIR_J[:] = [1, 2, 2]


def first_hits(const double[:, ::1] origins, const double[:, ::1] dirs,
               const double[:, ::1] v0, const double[:, ::1] e1,
               const double[:, ::1] e2, double t_min):
    cdef Py_ssize_t m = origins.shape[0]
    cdef Py_ssize_t n = v0.shape[0]
    cdef Py_ssize_t r, k
    cdef int64_t bi
    cdef double ox, oy, oz, dx, dy, dz, px, py, pz, det, inv
    cdef double sx, sy, sz, u, v, t, qx, qy, qz, best
    t_arr = np.full(m, np.inf)
    idx_arr = np.full(m, -1, dtype=np.int64)
    cdef double[::1] t_out = t_arr
    cdef int64_t[::1] idx_out = idx_arr
    with nogil:
        for r in range(m):
            ox = origins[r, 0]; oy = origins[r, 1]; oz = origins[r, 2]
            dx = dirs[r, 0]; dy = dirs[r, 1]; dz = dirs[r, 2]
            best = INFINITY
            bi = -1
            for k in range(n):
                px = dy * e2[k, 2] - dz * e2[k, 1]
                py = dz * e2[k, 0] - dx * e2[k, 2]
                pz = dx * e2[k, 1] - dy * e2[k, 0]
                det = e1[k, 0] * px + e1[k, 1] * py + e1[k, 2] * pz
                if fabs(det) < DET_EPS:
                    continue
                inv = 1.0 / det
                sx = ox - v0[k, 0]
                sy = oy - v0[k, 1]
                sz = oz - v0[k, 2]
                u = (sx * px + sy * py + sz * pz) * inv
                if u < -BARY_EPS or u > 1.0 + BARY_EPS:
                    continue
                qx = sy * e1[k, 2] - sz * e1[k, 1]
                qy = sz * e1[k, 0] - sx * e1[k, 2]
                qz = sx * e1[k, 1] - sy * e1[k, 0]
                v = (dx * qx + dy * qy + dz * qz) * inv
                if v < -BARY_EPS or u + v > 1.0 + BARY_EPS:
                    continue
                t = (e2[k, 0] * qx + e2[k, 1] * qy + e2[k, 2] * qz) * inv
                if t > t_min and t < best:
                    best = t
                    bi = k
            if bi >= 0:
                t_out[r] = best
                idx_out[r] = bi
    return t_arr, idx_arr


cdef inline double _clip(double x) noexcept nogil:
    if x < -1.0:
        return -1.0
    if x > 1.0:
        return 1.0
    return x


def pair_cosines(const double[:, :, ::1] positions, const double[:, :, ::1] normals):
    cdef Py_ssize_t s = positions.shape[0]
    cdef Py_ssize_t i, p
    cdef int a, b
    cdef double dx, dy, dz, dist, c1, c2, c3
    out_arr = np.empty((s, 3, 4))
    cdef double[:, :, ::1] out = out_arr
    with nogil:
        for i in range(s):
            for p in range(3):
                a = PAIR_I[p]
                b = PAIR_J[p]
                dx = positions[i, b, 0] - positions[i, a, 0]
                dy = positions[i, b, 1] - positions[i, a, 1]
                dz = positions[i, b, 2] - positions[i, a, 2]
                dist = sqrt(dx * dx + dy * dy + dz * dz)
                c1 = (normals[i, a, 0] * dx + normals[i, a, 1] * dy + normals[i, a, 2] * dz) / dist
                c2 = (normals[i, b, 0] * dx + normals[i, b, 1] * dy + normals[i, b, 2] * dz) / dist
                c3 = (normals[i, a, 0] * normals[i, b, 0] + normals[i, a, 1] * normals[i, b, 1]
                      + normals[i, a, 2] * normals[i, b, 2])
                c1 = _clip(c1)
                c2 = _clip(c2)
                c3 = _clip(c3)
                out[i, p, 0] = dist
                if -c2 > c1:
                    out[i, p, 1] = -c2
                    out[i, p, 2] = -c1
                else:
                    out[i, p, 1] = c1
                    out[i, p, 2] = c2
                out[i, p, 3] = c3
    return out_arr


cdef inline int64_t _bin(double c, const double[::1] edges) noexcept nogil:
    cdef int64_t n = 0
    cdef Py_ssize_t k
    for k in range(edges.shape[0]):
        if c <= edges[k]:
            n += 1
    return n


def encode(features, double distance_step, cos_edges, int64_t n_angle_bins, bint with_angles):
    feats = np.ascontiguousarray(features, dtype=np.float64)
    shape = feats.shape[:-1]
    cdef const double[:, ::1] f = feats.reshape(-1, 4)
    cdef const double[::1] edges = np.ascontiguousarray(cos_edges, dtype=np.float64)
    cdef Py_ssize_t m = f.shape[0]
    cdef Py_ssize_t i
    cdef int64_t db
    cdef int64_t a = n_angle_bins
    out_arr = np.empty(m, dtype=np.int64)
    cdef int64_t[::1] out = out_arr
    with nogil:
        for i in range(m):
            db = <int64_t>floor(f[i, 0] / distance_step)
            if with_angles:
                out[i] = ((db * a + _bin(f[i, 1], edges)) * a + _bin(f[i, 2], edges)) * a + _bin(f[i, 3], edges)
            else:
                out[i] = db
    return out_arr.reshape(shape)


def lookup_counts(codes, const int64_t[::1] keys, const int64_t[::1] counts):
    c_arr = np.ascontiguousarray(codes, dtype=np.int64)
    shape = c_arr.shape
    cdef const int64_t[::1] c = c_arr.reshape(-1)
    cdef Py_ssize_t m = c.shape[0]
    cdef Py_ssize_t n = keys.shape[0]
    cdef Py_ssize_t i, lo, hi, mid
    cdef int64_t x
    out_arr = np.zeros(m, dtype=np.int64)
    cdef int64_t[::1] out = out_arr
    with nogil:
        for i in range(m):
            x = c[i]
            lo = 0
            hi = n
            while lo < hi:
                mid = (lo + hi) >> 1
                if keys[mid] < x:
                    lo = mid + 1
                else:
                    hi = mid
            if lo < n and keys[lo] == x:
                out[i] = counts[lo]
    return out_arr.reshape(shape)
