"""Pure-NumPy kernel implementations.

Fallback backend used when the compiled extension is unavailable (or when
HRC_PURE_PYTHON=1). Function signatures mirror hrcsim._kernels exactly.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "python"


def fk_frames(dh: np.ndarray, base: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Chain of frames for a serial arm under the classic DH convention.

    dh is (n, 4) rows of (a, alpha, d, theta_offset); base is the 4x4 base
    frame; q is (n,) joint values. Returns (n+1, 4, 4): frame 0 is the base,
    frame i the frame after joint i.
    """
    dh = np.asarray(dh, dtype=float)
    q = np.asarray(q, dtype=float)
    n = dh.shape[0]
    frames = np.empty((n + 1, 4, 4))
    frames[0] = base
    t = np.empty((4, 4))
    t[3, :] = (0.0, 0.0, 0.0, 1.0)
    for i in range(n):
        a, alpha, d, off = dh[i]
        th = q[i] + off
        ct, st = math.cos(th), math.sin(th)
        ca, sa = math.cos(alpha), math.sin(alpha)
        t[0, :] = (ct, -st * ca, st * sa, a * ct)
        t[1, :] = (st, ct * ca, -ct * sa, a * st)
        t[2, :] = (0.0, sa, ca, d)
        frames[i + 1] = frames[i] @ t
    return frames


def jacobian_from_frames(frames: np.ndarray) -> np.ndarray:
    """Geometric Jacobian (linear rows then angular rows) of a revolute chain."""
    n = frames.shape[0] - 1
    jac = np.empty((6, n))
    pe = frames[n, :3, 3]
    for i in range(n):
        z = frames[i, :3, 2]
        p = frames[i, :3, 3]
        jac[:3, i] = np.cross(z, pe - p)
        jac[3:, i] = z
    return jac


def dist_point_segment(p, a, b) -> float:
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = b - a
    denom = float(np.dot(ab, ab))
    if denom == 0.0:
        return float(np.linalg.norm(p - a))
    t = float(np.dot(p - a, ab)) / denom
    t = min(1.0, max(0.0, t))
    return float(np.linalg.norm(p - (a + t * ab)))


def dist_segment_segment(p1, q1, p2, q2) -> float:
    """Minimum distance between segments [p1,q1] and [p2,q2] (Ericson 5.1.9)."""
    p1 = np.asarray(p1, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = float(np.dot(d1, d1))
    e = float(np.dot(d2, d2))
    f = float(np.dot(d2, r))
    eps = 1e-15
    if a <= eps and e <= eps:
        return float(np.linalg.norm(r))
    if a <= eps:
        s = 0.0
        t = min(1.0, max(0.0, f / e))
    else:
        c = float(np.dot(d1, r))
        if e <= eps:
            t = 0.0
            s = min(1.0, max(0.0, -c / a))
        else:
            b = float(np.dot(d1, d2))
            denom = a * e - b * b
            s = min(1.0, max(0.0, (b * f - c * e) / denom)) if denom > eps else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = min(1.0, max(0.0, -c / a))
            elif t > 1.0:
                t = 1.0
                s = min(1.0, max(0.0, (b - c) / a))
    c1 = p1 + s * d1
    c2 = p2 + t * d2
    return float(np.linalg.norm(c1 - c2))


def dist_point_aabb(p, center, half) -> float:
    p = np.asarray(p, dtype=float)
    d = np.abs(p - np.asarray(center, dtype=float)) - np.asarray(half, dtype=float)
    outside = np.maximum(d, 0.0)
    return float(np.linalg.norm(outside))


def arm_world_contacts(origins, link_radius, types, data, skip) -> list:
    """All (link_index, object_index) overlaps of arm link capsules against
    encoded world shapes.

    origins: (m, 3) chain frame origins (m-1 links). types: (k,) int codes
    0=sphere 1=aabb 2=capsule. data: (k, 11) rows [g0(3), g1(3), r, bound,
    broad_center(3)] where sphere/aabb use g0=center, g1=half extents (aabb),
    capsule uses g0/g1 as segment endpoints. skip: (k,) nonzero to ignore.
    """
    origins = np.asarray(origins, dtype=float)
    arm_center = origins.mean(axis=0)
    arm_radius = float(np.max(np.linalg.norm(origins - arm_center, axis=1))) + link_radius
    contacts = []
    for j in range(len(types)):
        if skip[j]:
            continue
        if float(np.linalg.norm(data[j, 8:11] - arm_center)) > arm_radius + data[j, 7]:
            continue
        kind = types[j]
        for i in range(1, len(origins)):
            a, b = origins[i - 1], origins[i]
            if kind == 0:
                hit = dist_point_segment(data[j, 0:3], a, b) <= link_radius + data[j, 6]
            elif kind == 1:
                hit = dist_segment_aabb(a, b, data[j, 0:3], data[j, 3:6]) <= link_radius
            else:
                hit = (
                    dist_segment_segment(a, b, data[j, 0:3], data[j, 3:6])
                    <= link_radius + data[j, 6]
                )
            if hit:
                contacts.append((i, j))
    return contacts


def dist_segment_aabb(a, b, center, half) -> float:
    """Minimum distance between segment [a,b] and an axis-aligned box.

    The squared distance from a point to a convex set is convex, so along the
    affine segment it is convex in the parameter; golden-section search finds
    the global minimum (plateaus at zero are handled by early exit).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    da = dist_point_aabb(a, center, half)
    db = dist_point_aabb(b, center, half)
    if da == 0.0 or db == 0.0:
        return 0.0
    ab = b - a
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    lo, hi = 0.0, 1.0
    x1 = hi - inv_phi * (hi - lo)
    x2 = lo + inv_phi * (hi - lo)
    f1 = dist_point_aabb(a + x1 * ab, center, half)
    f2 = dist_point_aabb(a + x2 * ab, center, half)
    for _ in range(100):
        if f1 == 0.0 or f2 == 0.0:
            return 0.0
        if f1 < f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - inv_phi * (hi - lo)
            f1 = dist_point_aabb(a + x1 * ab, center, half)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + inv_phi * (hi - lo)
            f2 = dist_point_aabb(a + x2 * ab, center, half)
    return min(da, db, f1, f2)
