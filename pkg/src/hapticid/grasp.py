"""Parametric three-finger grasp simulator and contact noise model.

The hand orbits the object's vertical axis on a grid of ``L`` azimuths.
At each pose, three finger rays converge on a grasp centre on the object
axis; the first surface hit of each ray is a contact. Contacts are returned
in the hand frame, so a rotated object seen from a correspondingly rotated
hand gives the same observation.
"""

from __future__ import annotations

import hashlib
import json
import math
import zlib
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from hapticid import kernels
from hapticid.errors import ContactFileError, MissedGraspError, ObjectUnreachableError
from hapticid.mesh import HIT_T_MIN, TriangleMesh, surface_normals

MIN_VALID_FRACTION = 0.10
STREAMS = {"train": 1, "test": 2}


@dataclass(frozen=True)
class Finger:
    """Finger ray placement around the grasp centre, in degrees.

    ``azimuth`` is measured in the hand's horizontal plane from the palm
    side (azimuth 0 pushes straight away from the palm); ``elevation`` lifts
    the ray origin above that plane so the ray points downwards.
    """

    azimuth: float
    elevation: float = 0.0


@dataclass(frozen=True)
class HandModel:
    standoff_radius: float = 200.0
    approach_height: float = 30.0
    reach: float = 150.0
    fingers: tuple = (Finger(0.0, 0.0), Finger(140.0, 30.0), Finger(220.0, 30.0))

    def __post_init__(self):
        if len(self.fingers) != 3:
            raise ValueError("hand model needs exactly three fingers")
        if self.reach <= 0 or self.standoff_radius <= 0:
            raise ValueError("reach and standoff_radius must be positive")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["fingers"] = tuple(Finger(**f) if isinstance(f, dict) else Finger(*f) for f in d["fingers"])
        return cls(**d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def finger_rays(self):
        """Ray origins and unit directions in the hand frame, shape (3, 3)."""
        centre = np.array([self.standoff_radius, 0.0, 0.0])
        origins, dirs = [], []
        for f in self.fingers:
            az, el = math.radians(f.azimuth), math.radians(f.elevation)
            out = np.array([-math.cos(az) * math.cos(el), math.sin(az) * math.cos(el), math.sin(el)])
            origins.append(centre + self.reach * out)
            dirs.append(-out)
        return np.array(origins), np.array(dirs)


@dataclass(frozen=True)
class HandPose:
    """Pose ``pose_index`` of an ``n_poses`` grid; None distances defer to the hand model."""

    pose_index: int
    n_poses: int
    standoff_radius: Optional[float] = None
    approach_height: Optional[float] = None

    def __post_init__(self):
        if self.n_poses < 1 or not 0 <= self.pose_index < self.n_poses:
            raise ValueError(f"pose index {self.pose_index} outside [0, {self.n_poses})")

    @property
    def azimuth(self) -> float:
        return 2.0 * math.pi * self.pose_index / self.n_poses


@dataclass(frozen=True, eq=False)
class Contact:
    position: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        if abs(math.sqrt(float(n @ n)) - 1.0) > 1e-9:
            raise ValueError("contact normal must be unit length")
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "normal", n)


@dataclass(frozen=True, eq=False)
class GraspObservation:
    """Three contacts of one grasp, as (3, 3) position and normal arrays."""

    positions: np.ndarray
    normals: np.ndarray
    pose_index: int = 0

    def __post_init__(self):
        p = np.ascontiguousarray(self.positions, dtype=np.float64)
        n = np.ascontiguousarray(self.normals, dtype=np.float64)
        if p.shape != (3, 3) or n.shape != (3, 3):
            raise ValueError("a grasp observation has exactly three contacts")
        object.__setattr__(self, "positions", p)
        object.__setattr__(self, "normals", n)

    @classmethod
    def from_contacts(cls, contacts: Sequence[Contact], pose_index: int = 0):
        if len(contacts) != 3:
            raise ValueError("a grasp observation has exactly three contacts")
        return cls(np.array([c.position for c in contacts]),
                   np.array([c.normal for c in contacts]), pose_index)

    @property
    def contacts(self):
        return tuple(Contact(self.positions[i], self.normals[i]) for i in range(3))

    def pair_distances(self):
        p = self.positions
        return np.array([np.linalg.norm(p[j] - p[i]) for i, j in ((0, 1), (0, 2), (1, 2))])


@dataclass(frozen=True)
class NoiseModel:
    sigma_distance: float = 1.0
    sigma_angle: float = 0.05
    rng_seed: int = 0
    mode: str = "contact"  # or "feature": noise on distance and angles

    def __post_init__(self):
        if self.sigma_distance < 0 or self.sigma_angle < 0:
            raise ValueError("noise sigmas must be non-negative")
        if self.mode not in ("contact", "feature"):
            raise ValueError(f"unknown noise mode {self.mode!r}")


# -- simulation -------------------------------------------------------------


def grasp_rays(pose_indices, n_poses: int, hand: HandModel):
    """Finger rays in the object frame for each pose: origins, dirs (P*3, 3)."""
    idx = np.asarray(pose_indices, dtype=np.int64)
    phi = 2.0 * np.pi * idx / n_poses
    c = np.cos(phi)[:, None]
    s = np.sin(phi)[:, None]
    R, h = hand.standoff_radius, hand.approach_height
    oh, dh = hand.finger_rays()
    # hand frame: x towards the object axis, z up, y = z cross x
    ox = R * c - oh[:, 0] * c + oh[:, 1] * s
    oy = R * s - oh[:, 0] * s - oh[:, 1] * c
    oz = np.broadcast_to(h + oh[:, 2], ox.shape)
    dx = -dh[:, 0] * c + dh[:, 1] * s
    dy = -dh[:, 0] * s - dh[:, 1] * c
    dz = np.broadcast_to(dh[:, 2], dx.shape)
    origins = np.stack([ox, oy, oz], axis=-1).reshape(-1, 3)
    dirs = np.stack([dx, dy, dz], axis=-1).reshape(-1, 3)
    return np.ascontiguousarray(origins), np.ascontiguousarray(dirs)


def _grasp_batch(mesh: TriangleMesh, pose_indices, n_poses, hand: HandModel):
    """Contacts for many poses at once: positions, normals (P, 3, 3), valid (P,)."""
    idx = np.asarray(pose_indices, dtype=np.int64)
    phi = 2.0 * np.pi * idx / n_poses
    c = np.cos(phi)[:, None]
    s = np.sin(phi)[:, None]
    R, h = hand.standoff_radius, hand.approach_height
    origins, dirs = grasp_rays(idx, n_poses, hand)
    t, tri = kernels.first_hits(origins, dirs, mesh._v0, mesh._e1, mesh._e2, HIT_T_MIN)
    hit = tri >= 0
    pts = origins + np.where(hit, t, 0.0)[:, None] * dirs
    nrm = np.nan_to_num(surface_normals(mesh, pts, dirs, tri))

    pts = pts.reshape(-1, 3, 3)
    nrm = nrm.reshape(-1, 3, 3)
    rx = pts[..., 0] - R * c
    ry = pts[..., 1] - R * s
    pos = np.stack([-c * rx - s * ry, s * rx - c * ry, pts[..., 2] - h], axis=-1)
    nx, ny = nrm[..., 0], nrm[..., 1]
    nor = np.stack([-c * nx - s * ny, s * nx - c * ny, nrm[..., 2]], axis=-1)

    valid = hit.reshape(-1, 3).all(axis=1)
    for i, j in ((0, 1), (0, 2), (1, 2)):
        d = pos[:, j] - pos[:, i]
        valid &= np.sqrt((d * d).sum(axis=1)) > 1e-9
    pos[~valid] = np.nan
    nor[~valid] = np.nan
    return pos, nor, valid


def grasp_at(mesh: TriangleMesh, pose: HandPose, hand_model: HandModel = HandModel()) -> GraspObservation:
    """Simulate one grasp; raises :class:`MissedGraspError` if a finger misses."""
    if pose.standoff_radius is not None:
        hand_model = replace(hand_model, standoff_radius=pose.standoff_radius)
    if pose.approach_height is not None:
        hand_model = replace(hand_model, approach_height=pose.approach_height)
    pos, nor, valid = _grasp_batch(mesh, [pose.pose_index], pose.n_poses, hand_model)
    if not valid[0]:
        raise MissedGraspError(f"grasp at pose {pose.pose_index} on {mesh.name or 'mesh'} missed")
    return GraspObservation(pos[0], nor[0], pose.pose_index)


@dataclass(eq=False)
class PoseGrid:
    """Noiseless observations of one object at every pose of the grid."""

    object_name: str
    n_poses: int
    hand_digest: str
    positions: np.ndarray  # (L, 3, 3), NaN rows where invalid
    normals: np.ndarray
    valid: np.ndarray  # (L,) bool

    @property
    def valid_indices(self):
        return np.flatnonzero(self.valid)

    def observation(self, pose_index: int) -> GraspObservation:
        if not self.valid[pose_index]:
            raise MissedGraspError(f"pose {pose_index} is invalid for {self.object_name}")
        return GraspObservation(self.positions[pose_index], self.normals[pose_index], int(pose_index))

    def equals(self, other: "PoseGrid") -> bool:
        return (self.object_name == other.object_name and self.n_poses == other.n_poses
                and self.hand_digest == other.hand_digest
                and np.array_equal(self.valid, other.valid)
                and np.array_equal(self.positions, other.positions, equal_nan=True)
                and np.array_equal(self.normals, other.normals, equal_nan=True))


def build_pose_grid(mesh: TriangleMesh, n_poses: int = 360, hand_model: HandModel = HandModel(),
                    name: Optional[str] = None) -> PoseGrid:
    """Grasp ``mesh`` at all ``n_poses`` azimuths; missed poses are flagged."""
    if n_poses < 1:
        raise ValueError("n_poses must be >= 1")
    pos, nor, valid = _grasp_batch(mesh, np.arange(n_poses), n_poses, hand_model)
    name = name or mesh.name
    if valid.sum() < MIN_VALID_FRACTION * n_poses:
        raise ObjectUnreachableError(
            f"{name}: only {int(valid.sum())} of {n_poses} poses give a valid grasp")
    return PoseGrid(name, n_poses, hand_model.digest(), pos, nor, valid)


def save_contact_file(grid: PoseGrid, path) -> None:
    """Write the per-object contact file (one line per valid pose)."""
    lines = [f"contacts {grid.object_name} {grid.n_poses} {grid.hand_digest}"]
    for i in grid.valid_indices:
        vals = []
        for k in range(3):
            vals += [repr(float(x)) for x in grid.positions[i, k]]
            vals += [repr(float(x)) for x in grid.normals[i, k]]
        lines.append(f"{int(i)} " + " ".join(vals))
    Path(path).write_text("\n".join(lines) + "\n")


def load_contact_file(path) -> PoseGrid:
    text = Path(path).read_text().splitlines()
    if not text:
        raise ContactFileError(f"{path}: empty contact file")
    head = text[0].split()
    if len(head) != 4 or head[0] != "contacts":
        raise ContactFileError(f"{path}: bad header {text[0]!r}")
    name, digest = head[1], head[3]
    try:
        n_poses = int(head[2])
    except ValueError:
        raise ContactFileError(f"{path}: bad pose count {head[2]!r}") from None
    pos = np.full((n_poses, 3, 3), np.nan)
    nor = np.full((n_poses, 3, 3), np.nan)
    valid = np.zeros(n_poses, dtype=bool)
    for lineno, line in enumerate(text[1:], start=2):
        if not line.strip():
            continue
        tok = line.split()
        if len(tok) != 19:
            raise ContactFileError(f"{path}:{lineno}: expected 19 fields, got {len(tok)}")
        try:
            i = int(tok[0])
            vals = np.array([float(x) for x in tok[1:]]).reshape(3, 6)
        except ValueError:
            raise ContactFileError(f"{path}:{lineno}: non-numeric field") from None
        if not 0 <= i < n_poses or valid[i]:
            raise ContactFileError(f"{path}:{lineno}: bad or duplicate pose index {i}")
        pos[i], nor[i], valid[i] = vals[:, :3], vals[:, 3:], True
    return PoseGrid(name, n_poses, digest, pos, nor, valid)


# -- noise ----------------------------------------------------------------


def stream_key(stream: str, pose_index: int, context=()):
    if stream not in STREAMS:
        raise ValueError(f"unknown noise stream {stream!r}")
    return (STREAMS[stream], *[int(c) for c in context], int(pose_index))


def name_key(name: str) -> int:
    """Stable integer id for an object name, used in noise stream keys."""
    return zlib.crc32(name.encode())


def noise_block(noise: NoiseModel, n_samples: int, stream: str, pose_index: int, context=()):
    """Standard normal draws of shape (n_samples, 3, 7) for one grasp.

    Per contact: 3 position offsets, 3 rotation-axis components and one
    rotation angle. Sample ``i`` does not depend on ``n_samples``.
    """
    seq = np.random.SeedSequence(noise.rng_seed, spawn_key=stream_key(stream, pose_index, context))
    return np.random.Generator(np.random.PCG64(seq)).standard_normal((n_samples, 3, 7))


def apply_contact_noise(positions, normals, block, noise: NoiseModel):
    """Perturb (3, 3) contacts with each (3, 7) slice of ``block``."""
    s = block.shape[0]
    pos = np.broadcast_to(positions, (s, 3, 3))
    nrm = np.broadcast_to(normals, (s, 3, 3))
    if noise.sigma_distance > 0:
        pos = pos + noise.sigma_distance * block[..., 0:3]
    else:
        pos = pos.copy()
    if noise.sigma_angle > 0:
        axis = block[..., 3:6]
        axis = axis / np.sqrt((axis * axis).sum(axis=-1))[..., None]
        theta = noise.sigma_angle * block[..., 6]
        ct, st = np.cos(theta)[..., None], np.sin(theta)[..., None]
        kxn = np.cross(axis, nrm)
        kdn = (axis * nrm).sum(axis=-1)[..., None]
        nrm = nrm * ct + kxn * st + axis * kdn * (1.0 - ct)
        nrm = nrm / np.sqrt((nrm * nrm).sum(axis=-1))[..., None]
    else:
        nrm = nrm.copy()
    return pos, nrm


def perturb_batch(obs: GraspObservation, noise: NoiseModel, n_samples: int,
                  stream: str = "train", context=()):
    """``n_samples`` noisy copies of ``obs`` as (S, 3, 3) arrays."""
    block = noise_block(noise, n_samples, stream, obs.pose_index, context)
    return apply_contact_noise(obs.positions, obs.normals, block, noise)


def perturb(obs: GraspObservation, noise: NoiseModel, sample_index: int,
            stream: str = "train", context=()) -> GraspObservation:
    """Noisy sample ``sample_index`` of ``obs`` on the given noise stream.

    Deterministic in (seed, stream, context, pose index, sample index); the
    ``train`` and ``test`` streams never share draws.
    """
    if sample_index < 0:
        raise ValueError("sample_index must be >= 0")
    pos, nrm = perturb_batch(obs, noise, sample_index + 1, stream, context)
    return GraspObservation(pos[-1], nrm[-1], obs.pose_index)
