# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel implementations (see _kernels_py for the reference versions).

Formulas intentionally mirror the NumPy fallback operation-for-operation so
both backends agree to floating-point noise.
"""

from libc.math cimport cos, sin, sqrt, fabs

import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


def fk_frames(dh, base, q):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] dh_arr = np.ascontiguousarray(dh, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] q_arr = np.ascontiguousarray(q, dtype=np.float64)
    cdef Py_ssize_t n = dh_arr.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=3] frames = np.empty((n + 1, 4, 4), dtype=np.float64)
    frames[0] = np.asarray(base, dtype=np.float64)
    cdef double[:, :, ::1] fr = frames
    cdef double[:, ::1] dhv = dh_arr
    cdef double[::1] qv = q_arr
    cdef double a, alpha, d, off, th, ct, st, ca, sa
    cdef double t[3][4]
    cdef Py_ssize_t i, r, c
    for i in range(n):
        a = dhv[i, 0]
        alpha = dhv[i, 1]
        d = dhv[i, 2]
        off = dhv[i, 3]
        th = qv[i] + off
        ct = cos(th); st = sin(th)
        ca = cos(alpha); sa = sin(alpha)
        t[0][0] = ct;  t[0][1] = -st * ca; t[0][2] = st * sa;  t[0][3] = a * ct
        t[1][0] = st;  t[1][1] = ct * ca;  t[1][2] = -ct * sa; t[1][3] = a * st
        t[2][0] = 0.0; t[2][1] = sa;       t[2][2] = ca;       t[2][3] = d
        for r in range(4):
            for c in range(4):
                fr[i + 1, r, c] = (
                    fr[i, r, 0] * t[0][c]
                    + fr[i, r, 1] * t[1][c]
                    + fr[i, r, 2] * t[2][c]
                    + (fr[i, r, 3] if c == 3 else 0.0)
                )
    return frames


def jacobian_from_frames(frames):
    cdef cnp.ndarray[cnp.float64_t, ndim=3] fr_arr = np.ascontiguousarray(frames, dtype=np.float64)
    cdef Py_ssize_t n = fr_arr.shape[0] - 1
    cdef cnp.ndarray[cnp.float64_t, ndim=2] jac = np.empty((6, n), dtype=np.float64)
    cdef double[:, :, ::1] fr = fr_arr
    cdef double[:, ::1] jv = jac
    cdef double zx, zy, zz, rx, ry, rz
    cdef Py_ssize_t i
    for i in range(n):
        zx = fr[i, 0, 2]; zy = fr[i, 1, 2]; zz = fr[i, 2, 2]
        rx = fr[n, 0, 3] - fr[i, 0, 3]
        ry = fr[n, 1, 3] - fr[i, 1, 3]
        rz = fr[n, 2, 3] - fr[i, 2, 3]
        jv[0, i] = zy * rz - zz * ry
        jv[1, i] = zz * rx - zx * rz
        jv[2, i] = zx * ry - zy * rx
        jv[3, i] = zx
        jv[4, i] = zy
        jv[5, i] = zz
    return jac


cdef inline double _clamp01(double v) nogil:
    if v < 0.0:
        return 0.0
    if v > 1.0:
        return 1.0
    return v


cdef double _dist_point_segment(double px, double py, double pz,
                                double ax, double ay, double az,
                                double bx, double by, double bz) nogil:
    cdef double abx = bx - ax, aby = by - ay, abz = bz - az
    cdef double denom = abx * abx + aby * aby + abz * abz
    cdef double t, cx, cy, cz
    if denom == 0.0:
        cx = px - ax; cy = py - ay; cz = pz - az
        return sqrt(cx * cx + cy * cy + cz * cz)
    t = ((px - ax) * abx + (py - ay) * aby + (pz - az) * abz) / denom
    t = _clamp01(t)
    cx = px - (ax + t * abx)
    cy = py - (ay + t * aby)
    cz = pz - (az + t * abz)
    return sqrt(cx * cx + cy * cy + cz * cz)


def dist_point_segment(p, a, b):
    cdef double[::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    return _dist_point_segment(pv[0], pv[1], pv[2], av[0], av[1], av[2], bv[0], bv[1], bv[2])


cdef double _dist_segment_segment(double p1x, double p1y, double p1z,
                                  double q1x, double q1y, double q1z,
                                  double p2x, double p2y, double p2z,
                                  double q2x, double q2y, double q2z) nogil:
    cdef double d1x = q1x - p1x, d1y = q1y - p1y, d1z = q1z - p1z
    cdef double d2x = q2x - p2x, d2y = q2y - p2y, d2z = q2z - p2z
    cdef double rx = p1x - p2x, ry = p1y - p2y, rz = p1z - p2z
    cdef double a = d1x * d1x + d1y * d1y + d1z * d1z
    cdef double e = d2x * d2x + d2y * d2y + d2z * d2z
    cdef double f = d2x * rx + d2y * ry + d2z * rz
    cdef double eps = 1e-15
    cdef double s, t, c, b, denom
    cdef double c1x, c1y, c1z, c2x, c2y, c2z
    if a <= eps and e <= eps:
        return sqrt(rx * rx + ry * ry + rz * rz)
    if a <= eps:
        s = 0.0
        t = _clamp01(f / e)
    else:
        c = d1x * rx + d1y * ry + d1z * rz
        if e <= eps:
            t = 0.0
            s = _clamp01(-c / a)
        else:
            b = d1x * d2x + d1y * d2y + d1z * d2z
            denom = a * e - b * b
            if denom > eps:
                s = _clamp01((b * f - c * e) / denom)
            else:
                s = 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = _clamp01(-c / a)
            elif t > 1.0:
                t = 1.0
                s = _clamp01((b - c) / a)
    c1x = p1x + s * d1x; c1y = p1y + s * d1y; c1z = p1z + s * d1z
    c2x = p2x + t * d2x; c2y = p2y + t * d2y; c2z = p2z + t * d2z
    return sqrt((c1x - c2x) ** 2 + (c1y - c2y) ** 2 + (c1z - c2z) ** 2)


def dist_segment_segment(p1, q1, p2, q2):
    cdef double[::1] p1v = np.ascontiguousarray(p1, dtype=np.float64)
    cdef double[::1] q1v = np.ascontiguousarray(q1, dtype=np.float64)
    cdef double[::1] p2v = np.ascontiguousarray(p2, dtype=np.float64)
    cdef double[::1] q2v = np.ascontiguousarray(q2, dtype=np.float64)
    return _dist_segment_segment(p1v[0], p1v[1], p1v[2], q1v[0], q1v[1], q1v[2],
                                 p2v[0], p2v[1], p2v[2], q2v[0], q2v[1], q2v[2])


cdef double _dist_point_aabb(double px, double py, double pz,
                             double cx, double cy, double cz,
                             double hx, double hy, double hz) nogil:
    cdef double dx = fabs(px - cx) - hx
    cdef double dy = fabs(py - cy) - hy
    cdef double dz = fabs(pz - cz) - hz
    if dx < 0.0:
        dx = 0.0
    if dy < 0.0:
        dy = 0.0
    if dz < 0.0:
        dz = 0.0
    return sqrt(dx * dx + dy * dy + dz * dz)


def dist_point_aabb(p, center, half):
    cdef double[::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef double[::1] cv = np.ascontiguousarray(center, dtype=np.float64)
    cdef double[::1] hv = np.ascontiguousarray(half, dtype=np.float64)
    return _dist_point_aabb(pv[0], pv[1], pv[2], cv[0], cv[1], cv[2], hv[0], hv[1], hv[2])


cdef double _dist_segment_aabb(double ax, double ay, double az,
                               double bx, double by, double bz,
                               double cx, double cy, double cz,
                               double hx, double hy, double hz) nogil:
    cdef double da = _dist_point_aabb(ax, ay, az, cx, cy, cz, hx, hy, hz)
    cdef double db = _dist_point_aabb(bx, by, bz, cx, cy, cz, hx, hy, hz)
    if da == 0.0 or db == 0.0:
        return 0.0
    cdef double abx = bx - ax, aby = by - ay, abz = bz - az
    cdef double inv_phi = (sqrt(5.0) - 1.0) / 2.0
    cdef double lo = 0.0, hi = 1.0
    cdef double x1 = hi - inv_phi * (hi - lo)
    cdef double x2 = lo + inv_phi * (hi - lo)
    cdef double f1 = _dist_point_aabb(ax + x1 * abx, ay + x1 * aby, az + x1 * abz,
                                      cx, cy, cz, hx, hy, hz)
    cdef double f2 = _dist_point_aabb(ax + x2 * abx, ay + x2 * aby, az + x2 * abz,
                                      cx, cy, cz, hx, hy, hz)
    cdef int i
    for i in range(100):
        if f1 == 0.0 or f2 == 0.0:
            return 0.0
        if f1 < f2:
            hi = x2; x2 = x1; f2 = f1
            x1 = hi - inv_phi * (hi - lo)
            f1 = _dist_point_aabb(ax + x1 * abx, ay + x1 * aby, az + x1 * abz,
                                  cx, cy, cz, hx, hy, hz)
        else:
            lo = x1; x1 = x2; f1 = f2
            x2 = lo + inv_phi * (hi - lo)
            f2 = _dist_point_aabb(ax + x2 * abx, ay + x2 * aby, az + x2 * abz,
                                  cx, cy, cz, hx, hy, hz)
    cdef double best = da
    if db < best:
        best = db
    if f1 < best:
        best = f1
    if f2 < best:
        best = f2
    return best


def dist_segment_aabb(a, b, center, half):
    cdef double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef double[::1] cv = np.ascontiguousarray(center, dtype=np.float64)
    cdef double[::1] hv = np.ascontiguousarray(half, dtype=np.float64)
    return _dist_segment_aabb(av[0], av[1], av[2], bv[0], bv[1], bv[2],
                              cv[0], cv[1], cv[2], hv[0], hv[1], hv[2])


def arm_world_contacts(origins, double link_radius, types, data, skip):
    """Fused narrow phase: all (link_index, object_index) overlaps.

    See the reference implementation in _kernels_py for the encoding.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=2] org = np.ascontiguousarray(origins, dtype=np.float64)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] tps = np.ascontiguousarray(types, dtype=np.int32)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] dat = np.ascontiguousarray(data, dtype=np.float64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] skp = np.ascontiguousarray(skip, dtype=np.uint8)
    cdef Py_ssize_t m = org.shape[0]
    cdef Py_ssize_t k = tps.shape[0]
    cdef double[:, ::1] o = org
    cdef double[:, ::1] d = dat
    cdef int[::1] tp = tps
    cdef unsigned char[::1] sk = skp
    cdef double ccx = 0.0, ccy = 0.0, ccz = 0.0
    cdef double arm_r = 0.0, dx, dy, dz, r2, dist
    cdef Py_ssize_t i, j
    for i in range(m):
        ccx += o[i, 0]; ccy += o[i, 1]; ccz += o[i, 2]
    ccx /= m; ccy /= m; ccz /= m
    for i in range(m):
        dx = o[i, 0] - ccx; dy = o[i, 1] - ccy; dz = o[i, 2] - ccz
        r2 = dx * dx + dy * dy + dz * dz
        if r2 > arm_r:
            arm_r = r2
    arm_r = sqrt(arm_r) + link_radius
    contacts = []
    cdef int kind
    cdef int hit
    for j in range(k):
        if sk[j]:
            continue
        dx = d[j, 8] - ccx; dy = d[j, 9] - ccy; dz = d[j, 10] - ccz
        if sqrt(dx * dx + dy * dy + dz * dz) > arm_r + d[j, 7]:
            continue
        kind = tp[j]
        for i in range(1, m):
            if kind == 0:
                dist = _dist_point_segment(d[j, 0], d[j, 1], d[j, 2],
                                           o[i - 1, 0], o[i - 1, 1], o[i - 1, 2],
                                           o[i, 0], o[i, 1], o[i, 2])
                hit = dist <= link_radius + d[j, 6]
            elif kind == 1:
                dist = _dist_segment_aabb(o[i - 1, 0], o[i - 1, 1], o[i - 1, 2],
                                          o[i, 0], o[i, 1], o[i, 2],
                                          d[j, 0], d[j, 1], d[j, 2],
                                          d[j, 3], d[j, 4], d[j, 5])
                hit = dist <= link_radius
            else:
                dist = _dist_segment_segment(o[i - 1, 0], o[i - 1, 1], o[i - 1, 2],
                                             o[i, 0], o[i, 1], o[i, 2],
                                             d[j, 0], d[j, 1], d[j, 2],
                                             d[j, 3], d[j, 4], d[j, 5])
                hit = dist <= link_radius + d[j, 6]
            if hit:
                contacts.append((i, j))
    return contacts
