"""End-to-end experiment protocol: train, run identification trials, summarise.

Every trial owns a random stream derived from (seed, object, method, policy,
trial id), so results do not depend on worker count or scheduling. A trial
is simulated once up to the largest threshold; the outcome at every smaller
threshold is read off the same trace, which is exactly what a separate run
at that threshold would produce because pose choices and noise never look
at the threshold.
"""

from __future__ import annotations

import configparser
import csv
import io
import logging
import math
import statistics
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from hapticid import fixtures
from hapticid.errors import ConfigError, NoValidPoseError, ObjectUnreachableError
from hapticid.explore import (POLICIES, ExplorationState, PosePredictionTable, build_predictions,
                              next_pose_active, next_pose_passive)
from hapticid.features import METHODS, ObjectTable, Quantizer, grasp_codes, train
from hapticid.grasp import (Finger, HandModel, NoiseModel, PoseGrid, build_pose_grid, name_key)
from hapticid.recognizer import BETAS, Posterior, argmax_by_name, bayes_update, votes

log = logging.getLogger(__name__)

CSV_COLUMNS = ("object", "method", "policy", "beta", "min", "max", "avg", "median", "error_pct", "capped")
RECORD_COLUMNS = ("truth", "method", "policy", "beta", "trial", "grasps", "decided", "correct", "capped")


@dataclass(frozen=True)
class ExperimentConfig:
    objects: tuple = fixtures.NAMES
    n_poses: int = 360
    n_samples: int = 50
    sigma_distance: float = 1.0
    sigma_angle: float = 0.05
    noise_mode: str = "contact"
    distance_step: float = 5.0
    angle_step: float = math.pi / 15
    betas: tuple = BETAS
    trials: int = 100
    seed: int = 0
    weighting: str = "count"
    alpha: float = 1.0
    max_grasps: int = 500
    methods: tuple = METHODS
    policies: tuple = POLICIES
    hidden_rotation: bool = True
    exclude_visited: bool = False
    hand: HandModel = HandModel()

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.max_grasps < 1:
            raise ConfigError("max_grasps must be >= 1")
        if self.n_poses < 1 or self.n_samples < 1:
            raise ConfigError("n_poses and n_samples must be >= 1")
        if not self.betas or any(not 0.0 < b < 1.0 for b in self.betas):
            raise ConfigError("every beta must lie in (0, 1)")
        if not self.objects:
            raise ConfigError("at least one object is required")
        if len(set(self.objects)) != len(self.objects):
            raise ConfigError("duplicate object names")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}")
        for p in self.policies:
            if p not in POLICIES:
                raise ConfigError(f"unknown policy {p!r}")
        if self.weighting not in ("count", "binary"):
            raise ConfigError(f"unknown weighting {self.weighting!r}")
        if self.noise_mode not in ("contact", "feature"):
            raise ConfigError(f"unknown noise mode {self.noise_mode!r}")

    @property
    def quantizer(self) -> Quantizer:
        return Quantizer(self.distance_step, self.angle_step)

    def noise(self) -> NoiseModel:
        return NoiseModel(self.sigma_distance, self.sigma_angle, self.seed, self.noise_mode)


def _split(value):
    return tuple(v.strip() for v in value.replace(",", " ").split() if v.strip())


def _coerce(name, raw):
    kinds = {f.name: f.type for f in fields(ExperimentConfig)}
    kind = kinds[name]
    try:
        if name in ("objects", "methods", "policies"):
            return _split(raw)
        if name == "betas":
            return tuple(float(v) for v in _split(raw))
        if kind == "bool":
            return str(raw).strip().lower() in ("1", "true", "yes", "on")
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None
    return str(raw).strip()


def parse_fingers(raw: str) -> tuple:
    """``"0:0, 140:30, 220:30"`` -> three :class:`Finger` (azimuth:elevation)."""
    out = []
    for item in raw.split(","):
        az, _, el = item.strip().partition(":")
        out.append(Finger(float(az), float(el or 0.0)))
    return tuple(out)


def load_config(path=None, **overrides) -> ExperimentConfig:
    """Build a config from an optional INI-style key = value file plus overrides.

    Keys live in an ``[experiment]`` section; hand geometry in ``[hand]``.
    """
    values = {}
    hand = {}
    if path is not None:
        cp = configparser.ConfigParser()
        text = Path(path).read_text()
        if not text.lstrip().startswith("["):
            text = "[experiment]\n" + text
        cp.read_string(text)
        known = {f.name for f in fields(ExperimentConfig)} - {"hand"}
        if cp.has_section("experiment"):
            for k, v in cp.items("experiment"):
                if k not in known:
                    raise ConfigError(f"unknown config key {k!r}")
                values[k] = _coerce(k, v)
        if cp.has_section("hand"):
            for k, v in cp.items("hand"):
                if k == "fingers":
                    hand[k] = parse_fingers(v)
                elif k in ("standoff_radius", "approach_height", "reach"):
                    hand[k] = float(v)
                else:
                    raise ConfigError(f"unknown hand key {k!r}")
    for k, v in overrides.items():
        if v is None:
            continue
        if k in ("standoff_radius", "approach_height", "reach", "fingers"):
            hand[k] = v
        else:
            values[k] = v
    if hand:
        values["hand"] = replace(values.get("hand", HandModel()), **hand)
    return ExperimentConfig(**values)


# -- training ----------------------------------------------------------------


@dataclass
class TrainedSystem:
    config: ExperimentConfig
    grids: Dict[str, PoseGrid]
    tables: Dict[str, Dict[str, ObjectTable]]
    predictions: Dict[str, PosePredictionTable]


def build_grids(config: ExperimentConfig, meshes=None) -> Dict[str, PoseGrid]:
    grids = OrderedDict()
    for name in config.objects:
        mesh = meshes[name] if meshes and name in meshes else fixtures.load_fixture(name)
        grids[name] = build_pose_grid(mesh, config.n_poses, config.hand, name=name)
    return grids


def train_system(config: ExperimentConfig, grids: Optional[Dict[str, PoseGrid]] = None) -> TrainedSystem:
    if grids is None:
        grids = build_grids(config)
    noise = config.noise()
    tables, preds = {}, {}
    for method in config.methods:
        tables[method] = train(grids, noise, config.n_samples, config.quantizer, method)
        if "active" in config.policies:
            preds[method] = build_predictions(tables[method], config.weighting, config.alpha)
    return TrainedSystem(config, grids, tables, preds)


# -- trials --------------------------------------------------------------------


@dataclass(frozen=True)
class TrialRecord:
    truth: str
    method: str
    policy: str
    beta: float
    trial: int
    grasps: int
    decided: Optional[str]
    correct: bool
    capped: bool

    @property
    def trace_id(self) -> str:
        return f"{self.truth}:{self.method}:{self.policy}:{self.trial}"


def trial_rng(seed, truth, method, policy, trial):
    key = (3, name_key(truth), METHODS.index(method), POLICIES.index(policy), int(trial))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def _draw_valid_passive(state, grid, offset):
    for _ in range(100 * grid.n_poses):
        phi = next_pose_passive(state, grid.n_poses)
        if grid.valid[(phi + offset) % grid.n_poses]:
            return phi
    raise ObjectUnreachableError(f"could not draw a valid pose on {grid.object_name}")


def run_trace(system: TrainedSystem, truth: str, method: str, policy: str, trial: int,
              betas: Optional[Sequence[float]] = None, rotate: Optional[bool] = None,
              trace_rows: Optional[list] = None, truth_grid: Optional[PoseGrid] = None) -> List[TrialRecord]:
    """Run one identification session and report its outcome at each beta.

    Grasps continue until every beta is decided or ``max_grasps`` is hit.
    Passive trials see the object under a hidden pose offset (when
    ``rotate``); active trials assume the hand-object pose is known.
    """
    cfg = system.config
    betas = tuple(cfg.betas if betas is None else betas)
    rotate = cfg.hidden_rotation if rotate is None else rotate
    tables = system.tables[method]
    grid = truth_grid if truth_grid is not None else system.grids[truth]
    objects = tuple(tables)
    n_poses = grid.n_poses
    noise = cfg.noise()
    q = cfg.quantizer
    k = len(objects)

    rng = trial_rng(cfg.seed, truth, method, policy, trial)
    offset = int(rng.integers(n_poses))
    if policy == "active" or not rotate:
        offset = 0
    state = ExplorationState(policy, n_poses, rng, exclude_visited=cfg.exclude_visited)
    posterior = Posterior.uniform(objects)
    context_base = (name_key(truth), METHODS.index(method), POLICIES.index(policy), int(trial))

    outcome = {}
    failed = set()
    t = 0
    while t < cfg.max_grasps and len(outcome) < len(betas):
        if policy == "passive" or t == 0:
            phi = _draw_valid_passive(state, grid, offset)
        else:
            try:
                phi = next_pose_active(posterior, system.predictions[method], state, failed)
            except NoValidPoseError:
                phi = _draw_valid_passive(state, grid, offset)
            if not grid.valid[phi]:
                # the hand misses here: remember and ask again, no grasp spent
                failed.add(phi)
                continue
        actual = (phi + offset) % n_poses
        obs = grid.observation(actual)
        codes = grasp_codes(obs, noise, cfg.n_samples, q, method, "test", context_base + (t,))
        v = votes(codes, tables, cfg.weighting)
        lik = (v + cfg.alpha) / (v.sum() + k * cfg.alpha)
        posterior = bayes_update(posterior, lik)
        t += 1
        if trace_rows is not None:
            trace_rows.append((f"{truth}:{method}:{policy}:{trial}", t, int(actual), lik, posterior.probs))
        best = argmax_by_name(objects, posterior.probs)
        for b in betas:
            if b not in outcome and posterior.probs[best] > b:
                outcome[b] = (t, objects[best])

    records = []
    for b in betas:
        if b in outcome:
            n, obj = outcome[b]
            records.append(TrialRecord(truth, method, policy, b, trial, n, obj, obj == truth, False))
        else:
            records.append(TrialRecord(truth, method, policy, b, trial, t, None, False, True))
    return records


def run_trial(system: TrainedSystem, truth: str, method: str, policy: str, beta: float,
              trial: int = 0, rotate: Optional[bool] = None) -> TrialRecord:
    """Single session at a single threshold."""
    return run_trace(system, truth, method, policy, trial, betas=(beta,), rotate=rotate)[0]


# -- experiment --------------------------------------------------------------

_WORKER_SYSTEM: Optional[TrainedSystem] = None


def _init_worker(system):
    global _WORKER_SYSTEM
    _WORKER_SYSTEM = system


def _run_block(task):
    truth, method, policy, trials, want_trace = task
    rows = [] if want_trace else None
    recs = []
    for trial in trials:
        recs.extend(run_trace(_WORKER_SYSTEM, truth, method, policy, trial, trace_rows=rows))
    return recs, rows


@dataclass
class ExperimentResult:
    records: List[TrialRecord]
    summaries: list
    traces: Optional[list] = None


def run_experiment(config: ExperimentConfig, workers: int = 1, system: Optional[TrainedSystem] = None,
                   keep_traces: bool = False) -> ExperimentResult:
    """Full sweep over objects x methods x policies x trials x betas."""
    if system is None:
        system = train_system(config)
    tasks = [(truth, m, p, range(config.trials), keep_traces)
             for truth in config.objects for m in config.methods for p in config.policies]
    if workers <= 1:
        _init_worker(system)
        results = [_run_block(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                                 initargs=(system,)) as pool:
            results = list(pool.map(_run_block, tasks))
    records, traces = [], [] if keep_traces else None
    for recs, rows in results:
        records.extend(recs)
        if keep_traces:
            traces.extend(rows)
    order = {b: i for i, b in enumerate(config.betas)}
    records.sort(key=lambda r: (config.objects.index(r.truth), config.methods.index(r.method),
                                config.policies.index(r.policy), order[r.beta], r.trial))
    return ExperimentResult(records, summarize(records), traces)


# -- statistics and output -----------------------------------------------------


@dataclass(frozen=True)
class StatSummary:
    object: str
    method: str
    policy: str
    beta: float
    min: int
    max: int
    avg: float
    median: float
    error_pct: float
    capped: int
    n: int

    def __post_init__(self):
        if not self.min <= self.median <= self.max:
            raise ValueError("summary must satisfy min <= median <= max")
        if not 0.0 <= self.error_pct <= 100.0:
            raise ValueError("error percentage outside [0, 100]")


def _group(records, key):
    groups = OrderedDict()
    for r in records:
        groups.setdefault(key(r), []).append(r)
    return groups


def _summary(obj, method, policy, beta, recs):
    g = [r.grasps for r in recs]
    wrong = sum(1 for r in recs if not r.correct)
    return StatSummary(obj, method, policy, beta, min(g), max(g), sum(g) / len(g),
                       float(statistics.median(g)), 100.0 * wrong / len(recs),
                       sum(1 for r in recs if r.capped), len(recs))


def summarize(records: Sequence[TrialRecord]) -> List[StatSummary]:
    """Per (object, method, policy, beta) statistics, in first-seen order."""
    if not records:
        raise ValueError("no records to summarise")
    groups = _group(records, lambda r: (r.truth, r.method, r.policy, r.beta))
    return [_summary(*key, recs) for key, recs in groups.items()]


def summarize_overall(records: Sequence[TrialRecord]) -> List[StatSummary]:
    """Statistics pooled over all objects, per (method, policy, beta)."""
    if not records:
        raise ValueError("no records to summarise")
    groups = _group(records, lambda r: (r.method, r.policy, r.beta))
    return [_summary("all", *key, recs) for key, recs in groups.items()]


def _fmt(x):
    return f"{x:.6g}" if isinstance(x, float) else str(x)


def summary_csv(summaries: Sequence[StatSummary]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for s in summaries:
        w.writerow([s.object, s.method, s.policy, _fmt(s.beta), s.min, s.max, f"{s.avg:.4f}",
                    _fmt(s.median), f"{s.error_pct:.2f}", s.capped])
    return out.getvalue()


def emit_csv(summaries: Sequence[StatSummary], path) -> None:
    Path(path).write_text(summary_csv(summaries))


def records_csv(records: Sequence[TrialRecord]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(RECORD_COLUMNS)
    for r in records:
        w.writerow([r.truth, r.method, r.policy, _fmt(r.beta), r.trial, r.grasps,
                    r.decided or "", int(r.correct), int(r.capped)])
    return out.getvalue()


def emit_records_csv(records, path) -> None:
    Path(path).write_text(records_csv(records))


def load_records_csv(path) -> List[TrialRecord]:
    with open(path, newline="") as fh:
        return [TrialRecord(row["truth"], row["method"], row["policy"], float(row["beta"]),
                            int(row["trial"]), int(row["grasps"]), row["decided"] or None,
                            row["correct"] == "1", row["capped"] == "1")
                for row in csv.DictReader(fh)]


def emit_traces_csv(traces, objects, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "t", "pose_index"] + [f"lik_{o}" for o in objects]
                   + [f"post_{o}" for o in objects])
        for trace_id, t, pose, lik, post in traces:
            w.writerow([trace_id, t, pose] + [repr(float(x)) for x in lik] + [repr(float(x)) for x in post])


def pose_freeness(system: TrainedSystem, truth: str, method: str = "PN", trials: int = 100,
                  beta: Optional[float] = None):
    """Passive grasp counts with and without hidden rotation, plus a KS test.

    The two arms use disjoint trial ids, so their noise draws are independent.
    """
    from scipy.stats import ks_2samp

    beta = max(system.config.betas) if beta is None else beta
    rot = [run_trace(system, truth, method, "passive", i, betas=(beta,), rotate=True)[0].grasps
           for i in range(trials)]
    fixed = [run_trace(system, truth, method, "passive", i, betas=(beta,), rotate=False)[0].grasps
             for i in range(trials, 2 * trials)]
    return rot, fixed, ks_2samp(rot, fixed)


def emit_plots(summaries: Sequence[StatSummary], records: Sequence[TrialRecord], outdir) -> List[Path]:
    from hapticid.plots import write_all

    return write_all(summaries, records, Path(outdir))
