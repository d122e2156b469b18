"""Point pair features, hash keys and per-object occurrence tables.

Two methods share this machinery: ``PN`` keys quantize the full point pair
feature (distance plus three angles) and ``P`` keys keep only the distance
bin. Keys are exact integer tuples; internally each key is packed into one
int64 code (mixed radix, so code order is lexicographic key order).
"""

from __future__ import annotations

import io
import math
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional

import numpy as np

from hapticid import kernels
from hapticid.errors import (DegeneratePairError, EmptyTableSetError, QuantizerMismatchError,
                             TableFormatError, TableVersionError)
from hapticid.grasp import (Contact, GraspObservation, NoiseModel, PoseGrid, apply_contact_noise,
                            name_key, noise_block)

METHODS = ("PN", "P")
MIN_PAIR_DISTANCE = 1e-9
TABLE_MAGIC = "HAPTICTABLES"
TABLE_VERSION = 1


@dataclass(frozen=True)
class PPF:
    distance: float
    angle_n1_d: float
    angle_n2_d: float
    angle_n1_n2: float


@dataclass(frozen=True)
class FeatureKey:
    method: str
    bins: tuple

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if len(self.bins) != (4 if self.method == "PN" else 1):
            raise ValueError(f"{self.method} key needs {4 if self.method == 'PN' else 1} bins")
        if any(b < 0 for b in self.bins):
            raise ValueError("key bins must be non-negative")


@dataclass(frozen=True)
class Quantizer:
    distance_step: float = 5.0
    angle_step: float = math.pi / 15

    def __post_init__(self):
        if not (self.distance_step > 0 and self.angle_step > 0):
            raise ValueError("quantizer steps must be positive")

    @property
    def n_angle_bins(self) -> int:
        return max(1, math.ceil(math.pi / self.angle_step - 1e-9))

    @property
    def cos_edges(self) -> np.ndarray:
        # cos(k * step) for the interior bin edges k = 1 .. n_angle_bins - 1
        return np.array([math.cos(k * self.angle_step) for k in range(1, self.n_angle_bins)])

    def code(self, key: FeatureKey) -> int:
        if key.method == "P":
            return key.bins[0]
        a = self.n_angle_bins
        d, b1, b2, b3 = key.bins
        return ((d * a + b1) * a + b2) * a + b3

    def key(self, code: int, method: str) -> FeatureKey:
        code = int(code)
        if method == "P":
            return FeatureKey("P", (code,))
        a = self.n_angle_bins
        code, b3 = divmod(code, a)
        code, b2 = divmod(code, a)
        d, b1 = divmod(code, a)
        return FeatureKey("PN", (d, b1, b2, b3))


def _angle(u, v) -> float:
    c = float(np.dot(u, v)) / (float(np.linalg.norm(u)) * float(np.linalg.norm(v)))
    return math.acos(min(1.0, max(-1.0, c)))


def ppf(c1: Contact, c2: Contact) -> PPF:
    """Point pair feature of two oriented contacts, ordered as given."""
    d = c2.position - c1.position
    dist = float(np.linalg.norm(d))
    if dist < MIN_PAIR_DISTANCE:
        raise DegeneratePairError(f"contacts coincide (distance {dist:g} mm)")
    return PPF(dist, _angle(c1.normal, d), _angle(c2.normal, d), _angle(c1.normal, c2.normal))


def canonical(f: PPF) -> PPF:
    """Orientation of the pair whose first normal-to-segment angle is smaller."""
    swapped = PPF(f.distance, math.pi - f.angle_n2_d, math.pi - f.angle_n1_d, f.angle_n1_n2)
    if (swapped.angle_n1_d, swapped.angle_n2_d) < (f.angle_n1_d, f.angle_n2_d):
        return swapped
    return f


def quantize(f: PPF, q: Quantizer, method: str) -> FeatureKey:
    d = math.floor(f.distance / q.distance_step)
    if method == "P":
        return FeatureKey("P", (d,))
    top = q.n_angle_bins - 1
    bins = [min(top, max(0, math.floor(a / q.angle_step)))
            for a in (f.angle_n1_d, f.angle_n2_d, f.angle_n1_n2)]
    return FeatureKey(method, (d, *bins))


def _check_method(method):
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def sample_codes(positions, normals, q: Quantizer, method: str) -> np.ndarray:
    """Key codes for (S, 3, 3) contact samples, shape (S, 3)."""
    feats = kernels.pair_cosines(np.ascontiguousarray(positions, dtype=np.float64),
                                 np.ascontiguousarray(normals, dtype=np.float64))
    if not np.all(feats[..., 0] >= MIN_PAIR_DISTANCE):
        raise DegeneratePairError("two contacts of a grasp coincide")
    return kernels.encode(feats, q.distance_step, q.cos_edges, q.n_angle_bins, method == "PN")


def _feature_noise_codes(obs, block, noise, q, method):
    # noise added to distance and angles instead of to the contacts
    feats = kernels.pair_cosines(obs.positions[None], obs.normals[None])
    if not np.all(feats[..., 0] >= MIN_PAIR_DISTANCE):
        raise DegeneratePairError("two contacts of a grasp coincide")
    ang = np.arccos(feats[..., 1:])
    dist = np.maximum(feats[..., 0] + noise.sigma_distance * block[..., 0], 0.0)
    ang = np.clip(ang + noise.sigma_angle * block[..., 1:4], 0.0, math.pi)
    db = np.floor(dist / q.distance_step).astype(np.int64)
    if method == "P":
        return db
    a = q.n_angle_bins
    b = np.minimum(np.floor(ang / q.angle_step).astype(np.int64), a - 1)
    return ((db * a + b[..., 0]) * a + b[..., 1]) * a + b[..., 2]


def grasp_codes(obs: GraspObservation, noise: NoiseModel, n_samples: int, q: Quantizer,
                method: str, stream: str, context=()) -> np.ndarray:
    """Key codes of ``n_samples`` noisy copies of one grasp, shape (S, 3)."""
    block = noise_block(noise, n_samples, stream, obs.pose_index, context)
    if noise.mode == "feature":
        return _feature_noise_codes(obs, block, noise, q, method)
    pos, nrm = apply_contact_noise(obs.positions, obs.normals, block, noise)
    return sample_codes(pos, nrm, q, method)


def keys_for_grasp(obs: GraspObservation, q: Quantizer, method: str) -> list:
    """The three keys of a grasp, for pairs (1,2), (1,3), (2,3)."""
    _check_method(method)
    codes = sample_codes(obs.positions[None], obs.normals[None], q, method)[0]
    return [q.key(c, method) for c in codes]


# -- tables ---------------------------------------------------------------


@dataclass(eq=False)
class ObjectTable:
    """Occurrence counts of every key produced while training one object.

    ``keys`` holds sorted int64 codes and ``counts`` their occurrence counts.
    ``pose_codes`` (L, N*3) keeps the training keys of each pose for the
    active policy; rows of invalid poses are -1.
    """

    name: str
    method: str
    quantizer: Quantizer
    keys: np.ndarray
    counts: np.ndarray
    pose_codes: Optional[np.ndarray] = None
    pose_valid: Optional[np.ndarray] = None

    def __post_init__(self):
        _check_method(self.method)
        self.keys = np.ascontiguousarray(self.keys, dtype=np.int64)
        self.counts = np.ascontiguousarray(self.counts, dtype=np.int64)
        if self.keys.shape != self.counts.shape or self.keys.ndim != 1:
            raise ValueError("keys and counts must be 1-D arrays of equal length")
        if self.keys.size and (np.any(np.diff(self.keys) <= 0) or self.counts.min() < 1):
            raise ValueError("keys must be strictly increasing and counts >= 1")

    @property
    def total_count(self) -> int:
        return int(self.counts.sum())

    @property
    def has_pose_records(self) -> bool:
        return self.pose_codes is not None

    def count(self, key) -> int:
        code = self.quantizer.code(key) if isinstance(key, FeatureKey) else int(key)
        return int(kernels.lookup_counts(np.array([code]), self.keys, self.counts)[0])

    def items(self):
        """(FeatureKey, count) pairs in lexicographic key order."""
        for c, n in zip(self.keys.tolist(), self.counts.tolist()):
            yield self.quantizer.key(c, self.method), n

    def as_dict(self) -> dict:
        return dict(self.items())

    def __eq__(self, other):
        if not isinstance(other, ObjectTable):
            return NotImplemented

        def same(a, b):
            return (a is None and b is None) or (a is not None and b is not None and np.array_equal(a, b))

        return (self.name == other.name and self.method == other.method
                and self.quantizer == other.quantizer
                and np.array_equal(self.keys, other.keys)
                and np.array_equal(self.counts, other.counts)
                and same(self.pose_codes, other.pose_codes)
                and same(self.pose_valid, other.pose_valid))


def table_from_codes(name, method, q, codes, pose_codes=None, pose_valid=None) -> ObjectTable:
    keys, counts = np.unique(np.asarray(codes, dtype=np.int64).ravel(), return_counts=True)
    return ObjectTable(name, method, q, keys, counts, pose_codes, pose_valid)


def merge_tables(tables: Iterable[ObjectTable]) -> ObjectTable:
    """Sum the counts of partial tables of one object (order independent)."""
    tables = list(tables)
    first = tables[0]
    for t in tables[1:]:
        if (t.name, t.method, t.quantizer) != (first.name, first.method, first.quantizer):
            raise QuantizerMismatchError("cannot merge tables of different objects or quantizers")
    keys = np.concatenate([t.keys for t in tables])
    counts = np.concatenate([t.counts for t in tables])
    uk, inv = np.unique(keys, return_inverse=True)
    return ObjectTable(first.name, first.method, first.quantizer, uk,
                       np.bincount(inv, weights=counts, minlength=len(uk)).astype(np.int64))


def train_object(grid: PoseGrid, noise: NoiseModel, n_samples: int, q: Quantizer,
                 method: str, retain_pose_keys: bool = True) -> ObjectTable:
    """Accumulate ``n_samples`` noisy grasps x 3 keys for every valid pose."""
    _check_method(method)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    width = 3 * n_samples
    pose_codes = np.full((grid.n_poses, width), -1, dtype=np.int64)
    context = (name_key(grid.object_name),)
    for i in grid.valid_indices:
        obs = grid.observation(int(i))
        pose_codes[i] = grasp_codes(obs, noise, n_samples, q, method, "train", context).ravel()
    valid = grid.valid.copy()
    table = table_from_codes(grid.object_name, method, q, pose_codes[valid])
    if retain_pose_keys:
        table.pose_codes, table.pose_valid = pose_codes, valid
    return table


def train(grids: Mapping[str, PoseGrid], noise: NoiseModel, n_samples: int = 50,
          q: Quantizer = Quantizer(), method: str = "PN",
          retain_pose_keys: bool = True) -> dict:
    """Train one table per object, keyed and ordered like ``grids``."""
    if not grids:
        raise EmptyTableSetError("no objects to train")
    return {name: train_object(g, noise, n_samples, q, method, retain_pose_keys)
            for name, g in grids.items()}


# -- persistence ------------------------------------------------------------


def save_tables(tables: Mapping[str, ObjectTable], path) -> None:
    """Write tables to a versioned file: text header, little-endian payload."""
    tables = list(tables.values()) if isinstance(tables, Mapping) else list(tables)
    if not tables:
        raise EmptyTableSetError("refusing to save an empty table set")
    method, q = tables[0].method, tables[0].quantizer
    for t in tables:
        if t.method != method or t.quantizer != q:
            raise QuantizerMismatchError("all tables in one file must share method and quantizer")
        if not t.name or any(ch.isspace() for ch in t.name):
            raise ValueError(f"object name {t.name!r} must be non-empty without whitespace")
    payload = io.BytesIO()
    lines = [TABLE_MAGIC, f"version {TABLE_VERSION}", f"method {method}",
             f"distance_step {q.distance_step!r}", f"angle_step {q.angle_step!r}",
             f"objects {len(tables)}"]
    for t in tables:
        if t.has_pose_records:
            n_poses, width = t.pose_codes.shape
        else:
            n_poses, width = 0, 0
        lines.append(f"object {t.name} keys {len(t.keys)} poses {n_poses} width {width}")
        payload.write(t.keys.astype("<i8").tobytes())
        payload.write(t.counts.astype("<i8").tobytes())
        if n_poses:
            payload.write(t.pose_valid.astype("u1").tobytes())
            payload.write(t.pose_codes.astype("<i8").tobytes())
    body = payload.getvalue()
    lines += [f"checksum {zlib.crc32(body):08x}", "end_header"]
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("ascii"))
        fh.write(body)


def load_tables(path, quantizer: Optional[Quantizer] = None, method: Optional[str] = None) -> dict:
    """Read tables written by :func:`save_tables`.

    When ``quantizer`` or ``method`` is given, the file must match it.
    """
    raw = Path(path).read_bytes()
    marker = b"end_header\n"
    end = raw.find(marker)
    if end < 0 or not raw.startswith(TABLE_MAGIC.encode() + b"\n"):
        raise TableFormatError(f"{path}: not a table file")
    header = raw[:end].decode("ascii", errors="replace").splitlines()
    body = raw[end + len(marker):]
    try:
        fields = [ln.split() for ln in header[1:]]
        version = int(fields[0][1]) if fields[0][0] == "version" else None
        if version != TABLE_VERSION:
            raise TableVersionError(f"{path}: unsupported table version {fields[0][1]}")
        file_method = fields[1][1]
        file_q = Quantizer(float(fields[2][1]), float(fields[3][1]))
        n_obj = int(fields[4][1])
        object_lines = fields[5:5 + n_obj]
        checksum = int(fields[5 + n_obj][1], 16)
    except TableVersionError:
        raise
    except (IndexError, ValueError) as exc:
        raise TableFormatError(f"{path}: malformed header ({exc})") from None
    if zlib.crc32(body) != checksum:
        raise TableFormatError(f"{path}: checksum mismatch, file is corrupt")
    if method is not None and method != file_method:
        raise QuantizerMismatchError(f"{path}: tables use method {file_method}, expected {method}")
    if quantizer is not None and quantizer != file_q:
        raise QuantizerMismatchError(f"{path}: tables use {file_q}, expected {quantizer}")
    tables, off = {}, 0

    def take(n, dtype):
        nonlocal off
        size = n * np.dtype(dtype).itemsize
        if off + size > len(body):
            raise TableFormatError(f"{path}: truncated payload")
        arr = np.frombuffer(body, dtype, n, off).copy()
        off += size
        return arr

    for line in object_lines:
        if len(line) != 8 or line[0] != "object":
            raise TableFormatError(f"{path}: bad object line {' '.join(line)!r}")
        name, n_keys, n_poses, width = line[1], int(line[3]), int(line[5]), int(line[7])
        keys = take(n_keys, "<i8").astype(np.int64)
        counts = take(n_keys, "<i8").astype(np.int64)
        pc = pv = None
        if n_poses:
            pv = take(n_poses, "u1").astype(bool)
            pc = take(n_poses * width, "<i8").astype(np.int64).reshape(n_poses, width)
        tables[name] = ObjectTable(name, file_method, file_q, keys, counts, pc, pv)
    if off != len(body):
        raise TableFormatError(f"{path}: trailing bytes after payload")
    return tables


def dump_table_csv(table: ObjectTable, out) -> None:
    """Write (key components, count) rows sorted lexicographically."""
    if table.method == "PN":
        out.write("distance_bin,angle_n1_d_bin,angle_n2_d_bin,angle_n1_n2_bin,count\n")
    else:
        out.write("distance_bin,count\n")
    for key, n in table.items():
        out.write(",".join(str(b) for b in key.bins) + f",{n}\n")
