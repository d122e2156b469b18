"""Synthetic stand-ins for the five YCB objects.

Each fixture is a closed triangle mesh in millimetres, resting on the
``z = 0`` table plane and centred on the vertical axis the hand orbits.
Round fixtures use 360 longitude segments so that they map onto themselves
under every one-degree rotation of the pose grid.
The bundled PLY files under ``data/`` are produced by :func:`write_bundle`;
``python -m hapticid.fixtures`` regenerates them.
"""

from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

from hapticid.mesh import TriangleMesh, load_ply, write_ply

# declared sizes, millimetres (YCB-like)
SPECS = {
    "tuna_can": {"kind": "cylinder", "radius": 42.5, "height": 33.0},
    "mug": {"kind": "cylinder+torus", "radius": 40.0, "height": 82.0,
            "handle_major": 22.0, "handle_minor": 6.0, "handle_z": 45.0},
    "bowl": {"kind": "hemispherical shell", "radius": 80.0, "thickness": 4.0},
    "baseball": {"kind": "sphere", "radius": 36.5},
    # standing on its 50 x 50 end, so the footprint is square
    "foam_brick": {"kind": "box", "size": [50.0, 50.0, 75.0]},
}
NAMES = tuple(SPECS)


def icosphere(radius, level=3, center=(0.0, 0.0, 0.0), name="sphere"):
    """Subdivided icosahedron; level 3 gives 642 vertices.

    Level >= 1 places vertices on all six axis poles, so the bounding box
    is exactly +-radius.
    """
    p = (1.0 + math.sqrt(5.0)) / 2.0
    verts = [(-1, p, 0), (1, p, 0), (-1, -p, 0), (1, -p, 0),
             (0, -1, p), (0, 1, p), (0, -1, -p), (0, 1, -p),
             (p, 0, -1), (p, 0, 1), (-p, 0, -1), (-p, 0, 1)]
    verts = [np.array(v, float) / np.linalg.norm(v) for v in verts]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    for _ in range(level):
        cache = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                m = m / np.linalg.norm(m)
                # snap exact zeros so axis poles land exactly on the axes
                m[np.abs(m) < 1e-15] = 0.0
                cache[key] = len(verts)
                verts.append(m)
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    v = np.array(verts) * radius + np.asarray(center, float)
    return TriangleMesh(v, np.array(faces), name)


def uv_sphere(radius, n_lat=24, n_lon=360, center=(0.0, 0.0, 0.0), name="sphere"):
    """Latitude/longitude sphere with a vertex at each pole.

    ``n_lat`` must be even so that the equator is a vertex ring.
    """
    if n_lat % 2:
        raise ValueError("n_lat must be even")
    lon = 2.0 * np.pi * np.arange(n_lon) / n_lon
    pts = [(0.0, 0.0, radius)]
    for k in range(1, n_lat):
        theta = np.pi * k / n_lat
        st, ct = math.sin(theta), math.cos(theta)
        if k == n_lat // 2:
            st, ct = 1.0, 0.0
        pts += [(radius * st * math.cos(a), radius * st * math.sin(a), radius * ct) for a in lon]
    pts.append((0.0, 0.0, -radius))
    south = len(pts) - 1
    faces = []
    for i in range(n_lon):
        j = (i + 1) % n_lon
        faces.append((0, 1 + i, 1 + j))
        base = 1 + (n_lat - 2) * n_lon
        faces.append((south, base + j, base + i))
    for k in range(n_lat - 2):
        r0 = 1 + k * n_lon
        r1 = r0 + n_lon
        for i in range(n_lon):
            j = (i + 1) % n_lon
            faces += [(r0 + i, r1 + i, r1 + j), (r0 + i, r1 + j, r0 + j)]
    v = np.array(pts) + np.asarray(center, float)
    return TriangleMesh(v, np.array(faces), name)


def cylinder(radius, height, segments=360, z0=0.0, name="cylinder"):
    """Closed cylinder along z with fan-triangulated caps."""
    ang = 2.0 * np.pi * np.arange(segments) / segments
    ring = np.stack([radius * np.cos(ang), radius * np.sin(ang)], axis=1)
    bottom = np.column_stack([ring, np.full(segments, z0)])
    top = np.column_stack([ring, np.full(segments, z0 + height)])
    verts = np.vstack([bottom, top, [[0, 0, z0], [0, 0, z0 + height]]])
    cb, ct = 2 * segments, 2 * segments + 1
    faces = []
    for i in range(segments):
        j = (i + 1) % segments
        faces += [(i, j, segments + j), (i, segments + j, segments + i)]
        faces += [(cb, j, i), (ct, segments + i, segments + j)]
    return TriangleMesh(verts, np.array(faces), name)


def torus(major, minor, center, n_major=32, n_minor=16, name="torus"):
    """Torus whose ring lies in the x-z plane (axis along y)."""
    u = 2.0 * np.pi * np.arange(n_major) / n_major
    w = 2.0 * np.pi * np.arange(n_minor) / n_minor
    uu, ww = np.meshgrid(u, w, indexing="ij")
    r = major + minor * np.cos(ww)
    verts = np.stack([r * np.cos(uu), minor * np.sin(ww), r * np.sin(uu)], axis=-1).reshape(-1, 3)
    verts = verts + np.asarray(center, float)
    faces = []
    for i in range(n_major):
        for j in range(n_minor):
            a = i * n_minor + j
            b = ((i + 1) % n_major) * n_minor + j
            c = ((i + 1) % n_major) * n_minor + (j + 1) % n_minor
            d = i * n_minor + (j + 1) % n_minor
            faces += [(a, b, c), (a, c, d)]
    return TriangleMesh(verts, np.array(faces), name)


def _hemisphere_rings(radius, center_z, n_lat, n_lon):
    # lower hemisphere: pole first, then rings down-to-up ending at the equator
    pts = [(0.0, 0.0, center_z - radius)]
    lon = 2.0 * np.pi * np.arange(n_lon) / n_lon
    for k in range(1, n_lat + 1):
        theta = 0.5 * np.pi * k / n_lat
        rr = radius * math.sin(theta)
        z = center_z - radius * math.cos(theta)
        pts += [(rr * math.cos(a), rr * math.sin(a), z) for a in lon]
    return np.array(pts)


def hemispherical_shell(radius, thickness, n_lat=12, n_lon=360, z0=0.0, name="bowl"):
    """Open-top bowl: outer and inner lower hemispheres joined by a rim."""
    cz = z0 + radius
    outer = _hemisphere_rings(radius, cz, n_lat, n_lon)
    inner = _hemisphere_rings(radius - thickness, cz, n_lat, n_lon)
    off = len(outer)
    faces = []
    for base, flip in ((0, False), (off, True)):
        for i in range(n_lon):
            j = (i + 1) % n_lon
            tri = (base, base + 1 + j, base + 1 + i)
            faces.append(tri[::-1] if flip else tri)
        for k in range(n_lat - 1):
            r0 = base + 1 + k * n_lon
            r1 = r0 + n_lon
            for i in range(n_lon):
                j = (i + 1) % n_lon
                quad = [(r0 + i, r0 + j, r1 + j), (r0 + i, r1 + j, r1 + i)]
                faces += [q[::-1] for q in quad] if flip else quad
    eo = 1 + (n_lat - 1) * n_lon
    ei = off + eo
    for i in range(n_lon):
        j = (i + 1) % n_lon
        faces += [(eo + i, eo + j, ei + j), (eo + i, ei + j, ei + i)]
    return TriangleMesh(np.vstack([outer, inner]), np.array(faces), name)


def box(size, z0=0.0, name="box"):
    """Axis-aligned box centred on the z axis, bottom face at ``z0``."""
    sx, sy, sz = (0.5 * size[0], 0.5 * size[1], float(size[2]))
    verts = np.array([[x, y, z0 + z] for z in (0.0, sz) for y in (-sy, sy) for x in (-sx, sx)])
    faces = [(0, 2, 1), (1, 2, 3), (4, 5, 6), (5, 7, 6),
             (0, 1, 4), (1, 5, 4), (2, 6, 3), (3, 6, 7),
             (0, 4, 2), (2, 4, 6), (1, 3, 5), (3, 7, 5)]
    return TriangleMesh(verts, np.array(faces), name)


def build(name: str) -> TriangleMesh:
    """Generate fixture ``name`` from its declared dimensions."""
    s = SPECS[name]
    if name == "tuna_can":
        return cylinder(s["radius"], s["height"], name=name)
    if name == "mug":
        body = cylinder(s["radius"], s["height"])
        handle = torus(s["handle_major"], s["handle_minor"],
                       center=(s["radius"] + s["handle_major"] - 2.0 * s["handle_minor"], 0.0, s["handle_z"]))
        return TriangleMesh.concatenate([body, handle], name)
    if name == "bowl":
        return hemispherical_shell(s["radius"], s["thickness"], name=name)
    if name == "baseball":
        return uv_sphere(s["radius"], center=(0.0, 0.0, s["radius"]), name=name)
    if name == "foam_brick":
        return box(s["size"], name=name)
    raise KeyError(name)


def _data_dir():
    return resources.files("hapticid") / "data"


def fixture_path(name: str):
    if name not in SPECS:
        raise KeyError(f"unknown fixture {name!r}; known: {', '.join(NAMES)}")
    return _data_dir() / f"{name}.ply"


def load_fixture(name: str) -> TriangleMesh:
    """Load a bundled fixture mesh from its PLY file."""
    with resources.as_file(fixture_path(name)) as p:
        return load_ply(p, name=name)


def metadata() -> dict:
    return json.loads((_data_dir() / "fixtures.json").read_text())


def write_bundle(directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name in NAMES:
        write_ply(build(name), directory / f"{name}.ply")
    (directory / "fixtures.json").write_text(json.dumps(SPECS, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    write_bundle(Path(__file__).parent / "data")
