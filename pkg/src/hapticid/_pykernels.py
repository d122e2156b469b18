"""Pure numpy implementation of the hot kernels.

Every function here has a twin in ``_ckernels.pyx`` with the same signature.
Arithmetic is written component-wise, in the same order as the compiled
version, so both backends return bit-identical results. Only correctly
rounded operations (+ - * / sqrt floor and comparisons) are used.
"""

import numpy as np

BACKEND = "python"

# Parallel-ray and barycentric tolerances for the triangle test.
DET_EPS = 1e-12
BARY_EPS = 1e-10

_I = np.array([0, 0, 1])
_J = np.array([1, 2, 2])


def first_hits(origins, dirs, v0, e1, e2, t_min):
    """Nearest triangle hit for each ray, brute force over all triangles.

    Returns ``(t, index)``; rays that miss get ``t = inf`` and ``index = -1``.
    Ties on ``t`` resolve to the lowest triangle index.
    """
    m = origins.shape[0]
    t_out = np.full(m, np.inf)
    idx_out = np.full(m, -1, dtype=np.int64)
    e1x, e1y, e1z = e1[:, 0], e1[:, 1], e1[:, 2]
    e2x, e2y, e2z = e2[:, 0], e2[:, 1], e2[:, 2]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for r in range(m):
            ox, oy, oz = origins[r]
            dx, dy, dz = dirs[r]
            px = dy * e2z - dz * e2y
            py = dz * e2x - dx * e2z
            pz = dx * e2y - dy * e2x
            det = e1x * px + e1y * py + e1z * pz
            inv = 1.0 / det
            sx = ox - v0[:, 0]
            sy = oy - v0[:, 1]
            sz = oz - v0[:, 2]
            u = (sx * px + sy * py + sz * pz) * inv
            qx = sy * e1z - sz * e1y
            qy = sz * e1x - sx * e1z
            qz = sx * e1y - sy * e1x
            v = (dx * qx + dy * qy + dz * qz) * inv
            t = (e2x * qx + e2y * qy + e2z * qz) * inv
            ok = (
                (np.abs(det) >= DET_EPS)
                & (u >= -BARY_EPS)
                & (u <= 1.0 + BARY_EPS)
                & (v >= -BARY_EPS)
                & (u + v <= 1.0 + BARY_EPS)
                & (t > t_min)
            )
            if not ok.any():
                continue
            t = np.where(ok, t, np.inf)
            k = int(np.argmin(t))
            t_out[r] = t[k]
            idx_out[r] = k
    return t_out, idx_out


def pair_cosines(positions, normals):
    """Canonical pair features of every grasp sample, in cosine form.

    ``positions`` and ``normals`` have shape (S, 3, 3): S samples of three
    contacts. Output has shape (S, 3, 4) holding, for pairs (0,1), (0,2),
    (1,2): distance, cos(n1, d), cos(n2, d), cos(n1, n2). Each pair is
    oriented so its first angle is the smaller one, which makes the feature
    independent of contact labelling.
    """
    m1 = positions[:, _I]
    m2 = positions[:, _J]
    n1 = normals[:, _I]
    n2 = normals[:, _J]
    dx = m2[..., 0] - m1[..., 0]
    dy = m2[..., 1] - m1[..., 1]
    dz = m2[..., 2] - m1[..., 2]
    dist = np.sqrt(dx * dx + dy * dy + dz * dz)
    with np.errstate(divide="ignore", invalid="ignore"):
        c1 = (n1[..., 0] * dx + n1[..., 1] * dy + n1[..., 2] * dz) / dist
        c2 = (n2[..., 0] * dx + n2[..., 1] * dy + n2[..., 2] * dz) / dist
    c3 = n1[..., 0] * n2[..., 0] + n1[..., 1] * n2[..., 1] + n1[..., 2] * n2[..., 2]
    c1 = np.clip(c1, -1.0, 1.0)
    c2 = np.clip(c2, -1.0, 1.0)
    c3 = np.clip(c3, -1.0, 1.0)
    # angle order is the reverse of cosine order; swapping the pair maps
    # (c1, c2) to (-c2, -c1)
    swap = -c2 > c1
    out = np.empty(dist.shape + (4,))
    out[..., 0] = dist
    out[..., 1] = np.where(swap, -c2, c1)
    out[..., 2] = np.where(swap, -c1, c2)
    out[..., 3] = c3
    return out


def _angle_bins(c, cos_edges):
    # number of edges k*step the angle has reached: c <= cos(k*step)
    return (c[..., None] <= cos_edges).sum(axis=-1).astype(np.int64)


def encode(features, distance_step, cos_edges, n_angle_bins, with_angles):
    """Integer hash codes from cosine-form features of shape (..., 4)."""
    db = np.floor(features[..., 0] / distance_step).astype(np.int64)
    if not with_angles:
        return db
    a = n_angle_bins
    b1 = _angle_bins(features[..., 1], cos_edges)
    b2 = _angle_bins(features[..., 2], cos_edges)
    b3 = _angle_bins(features[..., 3], cos_edges)
    return ((db * a + b1) * a + b2) * a + b3


def lookup_counts(codes, keys, counts):
    """Stored count for each code (0 when absent); ``keys`` must be sorted."""
    codes = np.asarray(codes, dtype=np.int64)
    if keys.shape[0] == 0:
        return np.zeros(codes.shape, dtype=np.int64)
    idx = np.searchsorted(keys, codes)
    np.minimum(idx, keys.shape[0] - 1, out=idx)
    return np.where(keys[idx] == codes, counts[idx], 0).astype(np.int64)
