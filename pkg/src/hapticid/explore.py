"""Next-grasp selection: uniform random (passive) or discriminative (active)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from hapticid import kernels
from hapticid.errors import MissingPoseRecordsError, NoValidPoseError, TableMismatchError
from hapticid.features import ObjectTable
from hapticid.recognizer import ALPHA, Posterior, argmax_by_name, check_tables

POLICIES = ("passive", "active")


@dataclass(frozen=True, eq=False)
class PosePredictionTable:
    """Cached likelihood vectors for every (object, pose).

    ``likelihoods[o, phi]`` is the tally of object ``o``'s training keys at
    pose ``phi`` against all tables; ``valid[o, phi]`` marks trained poses.
    """

    objects: tuple
    likelihoods: np.ndarray  # (O, L, O)
    valid: np.ndarray  # (O, L)

    @property
    def n_poses(self) -> int:
        return self.likelihoods.shape[1]


@dataclass
class ExplorationState:
    policy: str
    n_poses: int
    rng: np.random.Generator
    visited: set = field(default_factory=set)
    exclude_visited: bool = False

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}")


def build_predictions(tables: Mapping[str, ObjectTable], weighting: str = "count",
                      alpha: float = ALPHA) -> PosePredictionTable:
    check_tables(tables)
    tabs = list(tables.values())
    for t in tabs:
        if not t.has_pose_records:
            raise MissingPoseRecordsError(f"table {t.name} was trained without per-pose keys")
    n_poses = tabs[0].pose_codes.shape[0]
    if any(t.pose_codes.shape[0] != n_poses for t in tabs):
        raise TableMismatchError("tables were trained on different pose grids")
    k = len(tabs)
    lik = np.zeros((k, n_poses, k))
    valid = np.zeros((k, n_poses), dtype=bool)
    for o, src in enumerate(tabs):
        v = np.empty((n_poses, k), dtype=np.int64)
        for j, t in enumerate(tabs):
            hits = kernels.lookup_counts(src.pose_codes, t.keys, t.counts)
            v[:, j] = (hits > 0).sum(axis=1) if weighting == "binary" else hits.sum(axis=1)
        lik[o] = (v + alpha) / (v.sum(axis=1, keepdims=True) + k * alpha)
        valid[o] = src.pose_valid
    return PosePredictionTable(tuple(tables), lik, valid)


def next_pose_passive(state: ExplorationState, n_poses: int) -> int:
    """Uniform draw from the pose grid; never looks at the posterior."""
    if n_poses < 1:
        raise ValueError("n_poses must be >= 1")
    if state.exclude_visited:
        free = [p for p in range(n_poses) if p not in state.visited]
        if not free:
            state.visited.clear()
            free = list(range(n_poses))
        pose = free[int(state.rng.integers(len(free)))]
    else:
        pose = int(state.rng.integers(n_poses))
    state.visited.add(pose)
    return pose


def top_two(posterior: Posterior):
    """Indices of the most and second most probable objects."""
    first = argmax_by_name(posterior.objects, posterior.probs)
    second = argmax_by_name(posterior.objects, posterior.probs, exclude=posterior.objects[first])
    return first, second


def pose_gaps(posterior: Posterior, predictions: PosePredictionTable) -> np.ndarray:
    """Predicted likelihood gap between the top two hypotheses at every pose.

    The observation at each pose is predicted from the leading hypothesis.
    """
    if posterior.objects != predictions.objects:
        raise TableMismatchError("posterior and predictions cover different objects")
    if len(posterior.objects) < 2:
        raise ValueError("active exploration needs at least two objects")
    a, b = top_two(posterior)
    return predictions.likelihoods[a, :, a] - predictions.likelihoods[a, :, b]


def next_pose_active(posterior: Posterior, predictions: PosePredictionTable,
                     state: ExplorationState, excluded: Iterable[int] = ()) -> int:
    """Pose maximising the predicted gap; ties go to the lowest index."""
    gaps = pose_gaps(posterior, predictions)
    a, _ = top_two(posterior)
    allowed = predictions.valid[a].copy()
    for p in excluded:
        allowed[p] = False
    if not allowed.any():
        raise NoValidPoseError(f"no admissible pose left for {posterior.objects[a]}")
    if state.exclude_visited:
        fresh = allowed.copy()
        fresh[list(state.visited)] = False
        if not fresh.any():
            state.visited.clear()
            fresh = allowed
        allowed = fresh
    pose = int(np.argmax(np.where(allowed, gaps, -np.inf)))
    state.visited.add(pose)
    return pose
