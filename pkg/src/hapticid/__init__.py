"""Pose-free haptic object identification.

Point pair features of three-finger grasp contacts are hashed into
per-object occurrence tables; an unknown object is identified by
sequential Bayesian voting over grasps chosen passively or actively.
"""

from hapticid.errors import HapticError
from hapticid.explore import build_predictions, next_pose_active, next_pose_passive
from hapticid.features import (PPF, FeatureKey, ObjectTable, Quantizer, keys_for_grasp, load_tables,
                               ppf, quantize, save_tables, train)
from hapticid.grasp import (Contact, GraspObservation, HandModel, HandPose, NoiseModel, build_pose_grid,
                            grasp_at, perturb)
from hapticid.harness import ExperimentConfig, load_config, run_experiment, run_trial, summarize
from hapticid.kernels import BACKEND
from hapticid.mesh import Ray, TriangleMesh, load_ply, ray_intersect
from hapticid.recognizer import Posterior, bayes_update, decide, tally

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Contact", "ExperimentConfig", "FeatureKey", "GraspObservation", "HandModel", "HandPose",
    "HapticError", "NoiseModel", "ObjectTable", "PPF", "Posterior", "Quantizer", "Ray", "TriangleMesh",
    "bayes_update", "build_pose_grid", "build_predictions", "decide", "grasp_at", "keys_for_grasp",
    "load_config", "load_ply", "load_tables", "next_pose_active", "next_pose_passive", "perturb", "ppf",
    "quantize", "ray_intersect", "run_experiment", "run_trial", "save_tables", "summarize", "tally", "train",
]
