"""The compiled and pure-numpy kernels must agree bit for bit."""

import numpy as np
import pytest

from hapticid import fixtures, kernels
from hapticid.features import Quantizer

BACKENDS = kernels.available_backends()
needs_both = pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled backend not built")


def _random_pairs(rng, s):
    pos = rng.normal(scale=40.0, size=(s, 3, 3))
    nrm = rng.normal(size=(s, 3, 3))
    nrm /= np.linalg.norm(nrm, axis=-1, keepdims=True)
    return pos, nrm


def test_backend_selected():
    assert kernels.BACKEND in BACKENDS
    assert "python" in BACKENDS


@needs_both
class TestBackendEquivalence:
    def test_first_hits(self, rng):
        mesh = fixtures.load_fixture("mug")
        origins = rng.uniform(-150, 150, size=(400, 3))
        target = rng.uniform(-40, 40, size=(400, 3)) + [0, 0, 40]
        dirs = target - origins
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        out = [b.first_hits(origins, dirs, mesh._v0, mesh._e1, mesh._e2, 1e-9) for b in BACKENDS.values()]
        np.testing.assert_array_equal(out[0][1], out[1][1])
        np.testing.assert_array_equal(out[0][0], out[1][0])
        assert (out[0][1] >= 0).sum() > 100

    def test_pair_cosines(self, rng):
        pos, nrm = _random_pairs(rng, 2000)
        a, b = (m.pair_cosines(pos, nrm) for m in BACKENDS.values())
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("with_angles", [True, False])
    def test_encode(self, rng, with_angles):
        q = Quantizer()
        pos, nrm = _random_pairs(rng, 2000)
        feats = BACKENDS["python"].pair_cosines(pos, nrm)
        a, b = (m.encode(feats, q.distance_step, q.cos_edges, q.n_angle_bins, with_angles)
                for m in BACKENDS.values())
        np.testing.assert_array_equal(a, b)

    def test_encode_on_bin_edges(self):
        q = Quantizer()
        edges = q.cos_edges
        c = np.concatenate([edges, [1.0, -1.0, 0.0]])
        feats = np.zeros((len(c), 4))
        feats[:, 0] = np.arange(len(c)) * q.distance_step
        feats[:, 1] = c
        feats[:, 2] = c[::-1]
        feats[:, 3] = c
        a, b = (m.encode(feats.reshape(-1, 1, 4), q.distance_step, edges, q.n_angle_bins, True)
                for m in BACKENDS.values())
        np.testing.assert_array_equal(a, b)

    def test_lookup_counts(self, rng):
        keys = np.unique(rng.integers(0, 5000, size=300)).astype(np.int64)
        counts = rng.integers(1, 9, size=keys.size).astype(np.int64)
        codes = rng.integers(-5, 5100, size=(50, 30)).astype(np.int64)
        a, b = (m.lookup_counts(codes, keys, counts) for m in BACKENDS.values())
        np.testing.assert_array_equal(a, b)


def test_lookup_matches_dict(rng):
    keys = np.unique(rng.integers(0, 1000, size=100)).astype(np.int64)
    counts = rng.integers(1, 5, size=keys.size).astype(np.int64)
    table = dict(zip(keys.tolist(), counts.tolist()))
    codes = rng.integers(0, 1000, size=500).astype(np.int64)
    got = kernels.lookup_counts(codes, keys, counts)
    np.testing.assert_array_equal(got, [table.get(c, 0) for c in codes.tolist()])


def test_lookup_empty_table():
    got = kernels.lookup_counts(np.array([1, 2, 3]), np.array([], dtype=np.int64), np.array([], dtype=np.int64))
    np.testing.assert_array_equal(got, [0, 0, 0])


_EXPERIMENT = """
from hapticid.harness import ExperimentConfig, run_experiment, records_csv
cfg = ExperimentConfig(objects=("mug", "foam_brick", "bowl"), n_poses=60, n_samples=10, trials=4, seed=5)
print(records_csv(run_experiment(cfg).records), end="")
"""


@needs_both
def test_experiment_identical_across_backends():
    import os
    import subprocess
    import sys

    out = {}
    for pure in ("", "1"):
        env = dict(os.environ, HAPTICID_PURE_PYTHON=pure)
        if not pure:
            env.pop("HAPTICID_PURE_PYTHON")
        proc = subprocess.run([sys.executable, "-c", _EXPERIMENT], env=env, capture_output=True, text=True,
                              check=True)
        out[pure] = proc.stdout
    assert out[""].count("\n") == 1 + 3 * 2 * 2 * 4 * 7
    assert out[""] == out["1"]
