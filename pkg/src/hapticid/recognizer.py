"""Vote tallies, sequential Bayesian update and the stop rule."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from hapticid import kernels
from hapticid.errors import DegeneratePosteriorError, TableMismatchError
from hapticid.features import FeatureKey, ObjectTable

ALPHA = 1.0
EPSILON = 1e-9
BETAS = (0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99)
WEIGHTINGS = ("count", "binary")


@dataclass(frozen=True, eq=False)
class VoteTally:
    objects: tuple
    votes: np.ndarray
    likelihood: np.ndarray
    alpha: float = ALPHA


@dataclass(frozen=True, eq=False)
class Posterior:
    objects: tuple
    probs: np.ndarray
    t: int = 0

    @classmethod
    def uniform(cls, objects: Sequence[str]) -> "Posterior":
        k = len(objects)
        return cls(tuple(objects), np.full(k, 1.0 / k), 0)

    def as_dict(self):
        return dict(zip(self.objects, self.probs.tolist()))


@dataclass(frozen=True)
class Decision:
    obj: Optional[str]
    beta: float
    grasps: int

    @property
    def decided(self) -> bool:
        return self.obj is not None


def check_tables(tables: Mapping[str, ObjectTable]):
    tabs = list(tables.values())
    if not tabs:
        raise TableMismatchError("no tables given")
    first = tabs[0]
    for t in tabs[1:]:
        if t.method != first.method or t.quantizer != first.quantizer:
            raise TableMismatchError(
                f"table {t.name} ({t.method}, {t.quantizer}) does not match "
                f"{first.name} ({first.method}, {first.quantizer})")
    return first.method, first.quantizer


def _as_codes(test_keys, tables):
    if isinstance(test_keys, np.ndarray):
        return test_keys.astype(np.int64, copy=False).ravel()
    keys = list(test_keys)
    if keys and isinstance(keys[0], FeatureKey):
        method, q = check_tables(tables)
        if any(k.method != method for k in keys):
            raise TableMismatchError(f"test keys do not use the tables' method {method}")
        return np.array([q.code(k) for k in keys], dtype=np.int64)
    return np.asarray(keys, dtype=np.int64).ravel()


def votes(test_keys, tables: Mapping[str, ObjectTable], weighting: str = "count") -> np.ndarray:
    """Raw vote totals per object, in table order."""
    if weighting not in WEIGHTINGS:
        raise ValueError(f"unknown weighting {weighting!r}")
    codes = _as_codes(test_keys, tables)
    out = np.empty(len(tables), dtype=np.int64)
    for i, t in enumerate(tables.values()):
        hits = kernels.lookup_counts(codes, t.keys, t.counts)
        out[i] = (hits > 0).sum() if weighting == "binary" else hits.sum()
    return out


def tally(test_keys, tables: Mapping[str, ObjectTable], weighting: str = "count",
          alpha: float = ALPHA) -> VoteTally:
    """Per-object likelihood of one grasp from its (noisy) test keys.

    ``count`` weighting adds each matched key's stored count to the
    object's votes; ``binary`` adds one per matched key. The likelihood is
    the smoothed vote fraction ``(v + alpha) / (sum(v) + K * alpha)``.
    """
    check_tables(tables)
    codes = _as_codes(test_keys, tables)
    if codes.size == 0:
        raise ValueError("tally needs at least one test key")
    v = votes(codes, tables, weighting)
    k = len(tables)
    lik = (v + alpha) / (v.sum() + k * alpha)
    return VoteTally(tuple(tables), v, lik, alpha)


def bayes_update(prior: Posterior, likelihood, epsilon: float = EPSILON) -> Posterior:
    """Multiply the prior by the likelihood, floor at ``epsilon``, renormalise."""
    if isinstance(likelihood, VoteTally):
        if likelihood.objects != prior.objects:
            raise TableMismatchError("likelihood and posterior cover different objects")
        lik = likelihood.likelihood
    else:
        lik = np.asarray(likelihood, dtype=float)
    if lik.shape != prior.probs.shape:
        raise ValueError("likelihood length does not match the posterior")
    u = lik * prior.probs
    s = u.sum()
    if not s > 0:
        raise DegeneratePosteriorError("all posterior products underflowed to zero")
    p = np.maximum(u / s, epsilon)
    return Posterior(prior.objects, p / p.sum(), prior.t + 1)


def argmax_by_name(objects: Sequence[str], values: np.ndarray, exclude: Optional[str] = None) -> int:
    """Index of the largest value; exact ties go to the smallest name."""
    best = None
    for i, name in enumerate(objects):
        if name == exclude:
            continue
        if best is None or values[i] > values[best] or (values[i] == values[best] and name < objects[best]):
            best = i
    return best


def decide(posterior: Posterior, beta: float) -> Decision:
    """Commit to the arg-max object once its probability exceeds ``beta``."""
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    i = argmax_by_name(posterior.objects, posterior.probs)
    if posterior.probs[i] > beta:
        return Decision(posterior.objects[i], beta, posterior.t)
    return Decision(None, beta, posterior.t)


class TraceWriter:
    """CSV session trace: one row per grasp with likelihoods and posterior."""

    def __init__(self, fh, objects: Sequence[str]):
        self.objects = tuple(objects)
        self._w = csv.writer(fh, lineterminator="\n")
        self._w.writerow(["trial", "t", "pose_index"]
                         + [f"lik_{o}" for o in self.objects]
                         + [f"post_{o}" for o in self.objects])

    def row(self, trial, t, pose_index, likelihood, posterior):
        self._w.writerow([trial, t, pose_index]
                         + [repr(float(x)) for x in likelihood]
                         + [repr(float(x)) for x in posterior])
