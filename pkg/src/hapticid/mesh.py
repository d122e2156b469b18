"""Triangle meshes, PLY input/output and ray casting."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from hapticid import kernels
from hapticid.errors import MeshError, PlyParseError, UnsupportedPlyError

HIT_T_MIN = 1e-9

_PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Immutable triangle mesh in millimetres with per-face unit normals."""

    vertices: np.ndarray
    triangles: np.ndarray
    name: str = ""
    normals: np.ndarray = field(init=False, repr=False)
    _v0: np.ndarray = field(init=False, repr=False)
    _e1: np.ndarray = field(init=False, repr=False)
    _e2: np.ndarray = field(init=False, repr=False)
    _vf_start: np.ndarray = field(init=False, repr=False)
    _vf_faces: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=np.float64)
        f = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise MeshError(f"vertices must have shape (n, 3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise MeshError(f"triangles must have shape (n, 3), got {f.shape}")
        if len(v) < 4 or len(f) < 4:
            raise MeshError("a closed mesh needs at least 4 vertices and 4 triangles")
        if f.min() < 0 or f.max() >= len(v):
            raise MeshError("triangle index out of range")
        if not np.all(np.isfinite(v)):
            raise MeshError("non-finite vertex coordinate")
        v0 = np.ascontiguousarray(v[f[:, 0]])
        e1 = np.ascontiguousarray(v[f[:, 1]] - v0)
        e2 = np.ascontiguousarray(v[f[:, 2]] - v0)
        n = np.cross(e1, e2)
        length = np.linalg.norm(n, axis=1)
        bad = np.flatnonzero(length <= 1e-12)
        if bad.size:
            raise MeshError(f"degenerate triangle(s) with zero area, e.g. index {bad[0]}")
        n = n / length[:, None]
        # vertex -> incident faces, CSR layout
        flat = f.ravel()
        order = np.argsort(flat, kind="stable")
        vf_faces = order // 3
        vf_start = np.searchsorted(flat[order], np.arange(len(v) + 1))
        for arr in (v, f, n, v0, e1, e2, vf_faces, vf_start):
            arr.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", f)
        object.__setattr__(self, "normals", n)
        object.__setattr__(self, "_v0", v0)
        object.__setattr__(self, "_e1", e1)
        object.__setattr__(self, "_e2", e2)
        object.__setattr__(self, "_vf_start", vf_start)
        object.__setattr__(self, "_vf_faces", vf_faces)

    @property
    def bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def transformed(self, rotation=None, translation=None, name=None):
        """Copy of the mesh with ``R @ v + t`` applied to every vertex."""
        v = self.vertices
        if rotation is not None:
            v = v @ np.asarray(rotation, dtype=float).T
        if translation is not None:
            v = v + np.asarray(translation, dtype=float)
        return TriangleMesh(v, self.triangles, self.name if name is None else name)

    @staticmethod
    def concatenate(meshes, name=""):
        verts, faces, offset = [], [], 0
        for m in meshes:
            verts.append(m.vertices)
            faces.append(m.triangles + offset)
            offset += len(m.vertices)
        return TriangleMesh(np.vstack(verts), np.vstack(faces), name)


@dataclass(frozen=True)
class Ray:
    origin: tuple
    direction: tuple

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise ValueError("ray direction must be unit length")


@dataclass(frozen=True, eq=False)
class Hit:
    point: np.ndarray
    normal: np.ndarray
    distance: float
    triangle: int


EDGE_PLANE_TOL = 1e-8
EDGE_BARY_TOL = 1e-9


def surface_normals(mesh: TriangleMesh, points, dirs, tri):
    """Unit normals at hit points, facing against the ray directions.

    A point on a shared edge or vertex gets the normalised mean of all the
    faces it touches, so the result does not depend on which of the tied
    faces the intersection test happened to report.
    """
    points = np.asarray(points, dtype=float)
    dirs = np.asarray(dirs, dtype=float)
    tri = np.asarray(tri)
    out = np.full(points.shape, np.nan)
    for r in np.flatnonzero(tri >= 0):
        k = int(tri[r])
        d = dirs[r]
        n = mesh.normals[k]
        verts = mesh.triangles[k]
        cand = np.unique(np.concatenate(
            [mesh._vf_faces[mesh._vf_start[i]:mesh._vf_start[i + 1]] for i in verts]))
        if cand.size > 1:
            w = points[r] - mesh._v0[cand]
            nc = mesh.normals[cand]
            e1, e2 = mesh._e1[cand], mesh._e2[cand]
            d00 = (e1 * e1).sum(1)
            d01 = (e1 * e2).sum(1)
            d11 = (e2 * e2).sum(1)
            d20 = (w * e1).sum(1)
            d21 = (w * e2).sum(1)
            den = d00 * d11 - d01 * d01
            bu = (d11 * d20 - d01 * d21) / den
            bv = (d00 * d21 - d01 * d20) / den
            touch = ((np.abs((w * nc).sum(1)) <= EDGE_PLANE_TOL) & (bu >= -EDGE_BARY_TOL)
                     & (bv >= -EDGE_BARY_TOL) & (bu + bv <= 1.0 + EDGE_BARY_TOL))
            if touch.sum() > 1:
                nn = nc[touch]
                nn = np.where(((nn @ d) > 0)[:, None], -nn, nn)
                m = nn.sum(axis=0)
                length = np.sqrt(m @ m)
                if length > 1e-6:
                    n = m / length
        out[r] = -n if n @ d > 0 else n
    return out


def ray_intersect(mesh: TriangleMesh, ray: Ray) -> Optional[Hit]:
    """Nearest hit of ``ray`` on ``mesh``, or None.

    The normal faces the ray origin; see :func:`surface_normals` for hits on
    shared edges and vertices.
    """
    hits = ray_intersect_many(mesh, np.asarray([ray.origin], float), np.asarray([ray.direction], float))
    return hits[0]


def ray_intersect_many(mesh, origins, dirs):
    """Vectorised :func:`ray_intersect` over rows of ``origins``/``dirs``."""
    origins = np.ascontiguousarray(origins, dtype=np.float64)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64)
    t, idx = kernels.first_hits(origins, dirs, mesh._v0, mesh._e1, mesh._e2, HIT_T_MIN)
    points = origins + np.where(idx >= 0, t, 0.0)[:, None] * dirs
    normals = surface_normals(mesh, points, dirs, idx)
    return [None if idx[r] < 0 else Hit(points[r], normals[r], float(t[r]), int(idx[r]))
            for r in range(len(origins))]


# -- PLY ------------------------------------------------------------------


def _parse_header(fh):
    magic = fh.readline().strip()
    if magic != b"ply":
        raise PlyParseError("missing 'ply' magic line")
    fmt = None
    elements = []  # [name, count, [(prop_name, dtype | (count_dtype, item_dtype))]]
    while True:
        raw = fh.readline()
        if not raw:
            raise PlyParseError("header ended before 'end_header'")
        tokens = raw.decode("ascii", errors="replace").split()
        if not tokens or tokens[0] in ("comment", "obj_info"):
            continue
        key = tokens[0]
        if key == "end_header":
            break
        if key == "format":
            if len(tokens) != 3:
                raise PlyParseError(f"bad format line: {raw!r}")
            fmt = tokens[1]
            if fmt == "binary_big_endian":
                raise UnsupportedPlyError("big-endian PLY is not supported")
            if fmt not in ("ascii", "binary_little_endian"):
                raise PlyParseError(f"unknown PLY format {fmt!r}")
        elif key == "element":
            if len(tokens) != 3:
                raise PlyParseError(f"bad element line: {raw!r}")
            try:
                count = int(tokens[2])
            except ValueError:
                raise PlyParseError(f"bad element count: {raw!r}") from None
            if count < 0:
                raise PlyParseError(f"negative element count: {raw!r}")
            elements.append([tokens[1], count, []])
        elif key == "property":
            if not elements:
                raise PlyParseError("property before any element")
            try:
                if tokens[1] == "list":
                    prop = (tokens[4], (_PLY_TYPES[tokens[2]], _PLY_TYPES[tokens[3]]))
                else:
                    prop = (tokens[2], _PLY_TYPES[tokens[1]])
            except (IndexError, KeyError):
                raise PlyParseError(f"bad property line: {raw!r}") from None
            elements[-1][2].append(prop)
        else:
            raise PlyParseError(f"unexpected header line: {raw!r}")
    if fmt is None:
        raise PlyParseError("missing format line")
    return fmt, elements


def _read_ascii(fh, elements):
    data = {}
    lines = fh.read().decode("ascii", errors="replace").splitlines()
    pos = 0
    for name, count, props in elements:
        rows = []
        for _ in range(count):
            while pos < len(lines) and not lines[pos].strip():
                pos += 1
            if pos >= len(lines):
                raise PlyParseError(f"file ended inside element {name!r}")
            tokens = lines[pos].split()
            pos += 1
            row, i = [], 0
            try:
                for _, kind in props:
                    if isinstance(kind, tuple):
                        n = int(tokens[i])
                        row.append([float(x) for x in tokens[i + 1:i + 1 + n]])
                        if len(row[-1]) != n:
                            raise IndexError
                        i += 1 + n
                    else:
                        row.append(float(tokens[i]))
                        i += 1
            except (IndexError, ValueError):
                raise PlyParseError(f"malformed row in element {name!r}: {lines[pos - 1]!r}") from None
            if i != len(tokens):
                raise PlyParseError(f"extra values in element {name!r}: {lines[pos - 1]!r}")
            rows.append(row)
        data[name] = (props, rows)
    return data


def _read_binary(fh, elements):
    data = {}
    buf = fh.read()
    offset = 0
    for name, count, props in elements:
        has_list = any(isinstance(k, tuple) for _, k in props)
        if not has_list:
            dtype = np.dtype([(p, "<" + k) for p, k in props])
            need = dtype.itemsize * count
            if offset + need > len(buf):
                raise PlyParseError(f"file ended inside element {name!r}")
            arr = np.frombuffer(buf, dtype=dtype, count=count, offset=offset)
            offset += need
            data[name] = (props, [[float(r[p]) for p, _ in props] for r in arr])
            continue
        rows = []
        for _ in range(count):
            row = []
            for _, kind in props:
                if isinstance(kind, tuple):
                    cdt, idt = np.dtype("<" + kind[0]), np.dtype("<" + kind[1])
                    if offset + cdt.itemsize > len(buf):
                        raise PlyParseError(f"file ended inside element {name!r}")
                    n = int(np.frombuffer(buf, cdt, 1, offset)[0])
                    offset += cdt.itemsize
                    if offset + n * idt.itemsize > len(buf):
                        raise PlyParseError(f"file ended inside element {name!r}")
                    row.append(np.frombuffer(buf, idt, n, offset).tolist())
                    offset += n * idt.itemsize
                else:
                    dt = np.dtype("<" + kind)
                    if offset + dt.itemsize > len(buf):
                        raise PlyParseError(f"file ended inside element {name!r}")
                    row.append(float(np.frombuffer(buf, dt, 1, offset)[0]))
                    offset += dt.itemsize
            rows.append(row)
        data[name] = (props, rows)
    return data


def load_ply(path, scale: float = 1.0, name: Optional[str] = None) -> TriangleMesh:
    """Read an ASCII or binary little-endian PLY into a :class:`TriangleMesh`.

    ``scale`` multiplies every coordinate (e.g. 1000 for files in metres).
    Extra vertex properties and extra elements are ignored.
    """
    with open(path, "rb") as fh:
        fmt, elements = _parse_header(fh)
        names = [e[0] for e in elements]
        if "vertex" not in names or "face" not in names:
            raise PlyParseError("PLY needs both 'vertex' and 'face' elements")
        data = _read_ascii(fh, elements) if fmt == "ascii" else _read_binary(fh, elements)

    vprops, vrows = data["vertex"]
    vnames = [p for p, _ in vprops]
    try:
        cols = [vnames.index(c) for c in ("x", "y", "z")]
    except ValueError:
        raise PlyParseError("vertex element lacks x/y/z properties") from None
    verts = np.array([[r[c] for c in cols] for r in vrows], dtype=np.float64).reshape(-1, 3)

    fprops, frows = data["face"]
    list_cols = [i for i, (p, k) in enumerate(fprops) if isinstance(k, tuple)
                 and p in ("vertex_indices", "vertex_index")]
    if not list_cols:
        raise PlyParseError("face element lacks a vertex_indices list")
    faces = []
    for r in frows:
        idx = r[list_cols[0]]
        if len(idx) != 3:
            raise UnsupportedPlyError(f"only triangular faces are supported, found a {len(idx)}-gon")
        faces.append([int(i) for i in idx])
    tris = np.array(faces, dtype=np.int64).reshape(-1, 3)
    if name is None:
        name = os.path.splitext(os.path.basename(str(path)))[0]
    return TriangleMesh(verts * float(scale), tris, name)


def write_ply(mesh: TriangleMesh, path, binary: bool = False) -> None:
    """Write ``mesh`` as PLY; ASCII output round-trips exactly."""
    header = "ply\nformat %s 1.0\n" % ("binary_little_endian" if binary else "ascii")
    if mesh.name:
        header += f"comment {mesh.name}\n"
    header += (
        f"element vertex {len(mesh.vertices)}\n"
        "property double x\nproperty double y\nproperty double z\n"
        f"element face {len(mesh.triangles)}\n"
        "property list uchar int vertex_indices\n"
        "end_header\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        if binary:
            fh.write(mesh.vertices.astype("<f8").tobytes())
            faces = np.zeros(len(mesh.triangles), dtype=[("n", "u1"), ("i", "<i4", 3)])
            faces["n"] = 3
            faces["i"] = mesh.triangles
            fh.write(faces.tobytes())
        else:
            lines = ["%r %r %r" % tuple(float(c) for c in v) for v in mesh.vertices]
            lines += ["3 %d %d %d" % tuple(int(i) for i in f) for f in mesh.triangles]
            fh.write(("\n".join(lines) + "\n").encode("ascii"))
