import inspect

import numpy as np
import pytest

from hapticid.errors import MissingPoseRecordsError, NoValidPoseError
from hapticid.explore import (ExplorationState, PosePredictionTable, build_predictions, next_pose_active,
                              next_pose_passive, pose_gaps, top_two)
from hapticid.features import Quantizer, table_from_codes
from hapticid.recognizer import Posterior, tally

Q = Quantizer()


def toy_pose_tables(rng, k=3, n_poses=24, width=6, key_space=30):
    tables = {}
    for i in range(k):
        pc = rng.integers(0, key_space, size=(n_poses, width))
        valid = rng.random(n_poses) > 0.15
        pc[~valid] = -1
        name = f"o{i}"
        tables[name] = table_from_codes(name, "PN", Q, pc[valid], pc, valid)
    return tables


def oracle_pose(tables, posterior):
    """Exhaustive argmax of the predicted gap, recomputed from raw pose keys."""
    names = list(tables)
    order = sorted(range(len(names)), key=lambda i: (-posterior.probs[i], names[i]))
    a, b = order[0], order[1]
    src = tables[names[a]]
    best, best_gap = None, -np.inf
    for phi in range(src.pose_codes.shape[0]):
        if not src.pose_valid[phi]:
            continue
        v = []
        for t in tables.values():
            raw = np.repeat(t.keys, t.counts).tolist()
            v.append(sum(raw.count(c) for c in src.pose_codes[phi].tolist()))
        v = np.array(v, float)
        lik = (v + 1.0) / (v.sum() + len(v))
        gap = lik[a] - lik[b]
        if gap > best_gap:
            best, best_gap = phi, gap
    return best


def _state(policy="active", n=360, seed=0):
    return ExplorationState(policy, n, np.random.default_rng(seed))


class TestPassive:
    def test_single_pose(self):
        st = _state("passive", 1)
        assert all(next_pose_passive(st, 1) == 0 for _ in range(50))

    def test_uniform(self):
        st = _state("passive")
        draws = np.array([next_pose_passive(st, 360) for _ in range(100_000)])
        counts = np.bincount(draws, minlength=360)
        p = 1 / 360
        mean, sd = 100_000 * p, np.sqrt(100_000 * p * (1 - p))
        assert np.all(np.abs(counts - mean) < 5 * sd)
        chi2 = ((counts - mean) ** 2 / mean).sum()
        assert chi2 < 359 + 5 * np.sqrt(2 * 359)

    def test_reproducible(self):
        a, b = _state("passive", seed=9), _state("passive", seed=9)
        assert [next_pose_passive(a, 360) for _ in range(100)] == [next_pose_passive(b, 360) for _ in range(100)]

    def test_never_reads_posterior(self):
        assert "posterior" not in inspect.signature(next_pose_passive).parameters
        a, b = _state("passive", seed=3), _state("passive", seed=3)
        b.visited.update({5, 6, 7})
        assert [next_pose_passive(a, 360) for _ in range(50)] == [next_pose_passive(b, 360) for _ in range(50)]

    def test_exclude_visited(self):
        st = ExplorationState("passive", 10, np.random.default_rng(1), exclude_visited=True)
        assert sorted(next_pose_passive(st, 10) for _ in range(10)) == list(range(10))

    def test_bad_policy(self):
        with pytest.raises(ValueError):
            _state("greedy")


def _preds(lik, valid=None):
    k, n = lik.shape[0], lik.shape[1]
    return PosePredictionTable(tuple(f"o{i}" for i in range(k)), lik,
                               np.ones((k, n), bool) if valid is None else valid)


class TestActive:
    def test_dominant_pose(self):
        lik = np.full((3, 360, 3), 1 / 3)
        lik[0, :, 0], lik[0, :, 1] = 0.4, 0.3
        lik[0, 42] = [0.95, 0.05, 0.0]
        post = Posterior(("o0", "o1", "o2"), np.array([0.6, 0.3, 0.1]))
        gaps = pose_gaps(post, _preds(lik))
        assert gaps[42] == pytest.approx(0.9) and np.delete(gaps, 42).max() <= 0.1 + 1e-12
        assert next_pose_active(post, _preds(lik), _state()) == 42

    def test_tie_gives_first_pose(self):
        lik = np.full((2, 360, 2), 0.5)
        post = Posterior(("o0", "o1"), np.array([0.7, 0.3]))
        assert next_pose_active(post, _preds(lik), _state()) == 0

    def test_invalid_and_excluded_poses_skipped(self):
        lik = np.full((2, 10, 2), 0.5)
        lik[0, 3] = [0.9, 0.1]
        lik[0, 5] = [0.8, 0.2]
        valid = np.ones((2, 10), bool)
        valid[0, 3] = False
        post = Posterior(("o0", "o1"), np.array([0.7, 0.3]))
        assert next_pose_active(post, _preds(lik, valid), _state(n=10)) == 5
        assert next_pose_active(post, _preds(lik, valid), _state(n=10), excluded=[5]) == 0
        valid[0] = False
        with pytest.raises(NoValidPoseError):
            next_pose_active(post, _preds(lik, valid), _state(n=10))

    def test_matches_exhaustive_oracle(self, rng):
        for _ in range(10):
            tables = toy_pose_tables(rng)
            preds = build_predictions(tables)
            post = Posterior(tuple(tables), rng.dirichlet(np.ones(3)))
            assert next_pose_active(post, preds, _state(n=24)) == oracle_pose(tables, post)

    def test_depends_only_on_top_two(self, rng):
        lik = rng.dirichlet(np.ones(5), size=(5, 60))
        preds = _preds(lik)
        names = preds.objects
        base = np.array([0.5, 0.3, 0.1, 0.07, 0.03])
        choice = next_pose_active(Posterior(names, base), preds, _state(n=60))
        for perm in ([0, 1, 4, 3, 2], [0, 1, 3, 2, 4]):
            assert next_pose_active(Posterior(names, base[perm]), preds, _state(n=60)) == choice

    def test_top_two_tie_break_by_name(self):
        post = Posterior(("b", "a", "c"), np.array([0.4, 0.4, 0.2]))
        assert top_two(post) == (1, 0)

    def test_needs_two_objects(self):
        with pytest.raises(ValueError):
            pose_gaps(Posterior(("o0",), np.array([1.0])), _preds(np.ones((1, 5, 1))))


class TestBuildPredictions:
    def test_single_object(self, rng):
        tables = toy_pose_tables(rng, k=1)
        preds = build_predictions(tables)
        np.testing.assert_array_equal(preds.likelihoods, np.ones((1, 24, 1)))

    def test_identical_objects_zero_gap(self, rng):
        t = toy_pose_tables(rng, k=1)["o0"]
        twin = table_from_codes("twin", "PN", Q, np.repeat(t.keys, t.counts), t.pose_codes, t.pose_valid)
        preds = build_predictions({"o0": t, "twin": twin})
        post = Posterior(("o0", "twin"), np.array([0.6, 0.4]))
        np.testing.assert_allclose(pose_gaps(post, preds), 0.0, atol=1e-9)

    def test_rows_sum_to_one(self, rng):
        preds = build_predictions(toy_pose_tables(rng, k=4))
        np.testing.assert_allclose(preds.likelihoods.sum(axis=-1), 1.0, atol=1e-12)

    def test_cache_matches_tally(self, full_system, rng):
        tables = full_system.tables["PN"]
        preds = full_system.predictions["PN"]
        names = list(tables)
        probes = 0
        while probes < 20:
            o, phi = int(rng.integers(len(names))), int(rng.integers(360))
            src = tables[names[o]]
            if not src.pose_valid[phi]:
                continue
            np.testing.assert_allclose(preds.likelihoods[o, phi], tally(src.pose_codes[phi], tables).likelihood,
                                       atol=1e-15)
            probes += 1

    def test_binary_weighting(self, rng):
        tables = toy_pose_tables(rng)
        preds = build_predictions(tables, weighting="binary")
        src = tables["o1"]
        phi = int(np.flatnonzero(src.pose_valid)[0])
        np.testing.assert_allclose(preds.likelihoods[1, phi],
                                   tally(src.pose_codes[phi], tables, "binary").likelihood, atol=1e-15)

    def test_requires_pose_records(self):
        t = table_from_codes("a", "PN", Q, [1, 2, 3])
        with pytest.raises(MissingPoseRecordsError):
            build_predictions({"a": t})
