import io

import numpy as np
import pytest

from hapticid.errors import DegeneratePosteriorError, TableMismatchError
from hapticid.features import FeatureKey, Quantizer, table_from_codes
from hapticid.recognizer import (ALPHA, EPSILON, Posterior, TraceWriter, VoteTally, bayes_update, decide,
                                 tally, votes)

Q = Quantizer()


def toy_tables(rng, k=5, max_features=100, method="PN", key_space=40):
    """Random tables plus the raw feature lists they were built from."""
    raw, tables = {}, {}
    for i in range(k):
        n = int(rng.integers(1, max_features + 1))
        codes = rng.integers(0, key_space, size=n)
        name = f"obj{i}"
        raw[name] = [Q.key(c, method) for c in codes]
        tables[name] = table_from_codes(name, method, Q, codes)
    return raw, tables


def brute_force_likelihood(test_keys, raw, weighting, alpha=ALPHA):
    v = []
    for feats in raw.values():
        total = 0
        for key in test_keys:
            matches = sum(1 for f in feats if f == key)
            total += matches if weighting == "count" else int(matches > 0)
        v.append(total)
    v = np.array(v, dtype=float)
    return (v + alpha) / (v.sum() + len(v) * alpha)


class TestTally:
    def test_single_key_only_in_a(self):
        a = table_from_codes("a", "PN", Q, [7, 7, 7])
        others = {n: table_from_codes(n, "PN", Q, [1, 2]) for n in "bcd"}
        tables = {"a": a, **others}
        lik = tally([Q.key(7, "PN")], tables).likelihood
        k, va = 4, 3
        np.testing.assert_allclose(lik, [(va + 1) / (va + k)] + [1 / (va + k)] * 3, rtol=0, atol=1e-15)

    def test_unknown_key_is_uniform(self):
        tables = {n: table_from_codes(n, "PN", Q, [1, 2, 3]) for n in "abcde"}
        lik = tally([Q.key(99, "PN")], tables).likelihood
        np.testing.assert_array_equal(lik, np.full(5, 0.2))

    @pytest.mark.parametrize("weighting", ["count", "binary"])
    def test_matches_brute_force(self, rng, weighting):
        raw, tables = toy_tables(rng)
        test = [Q.key(c, "PN") for c in rng.integers(0, 50, size=30)]
        got = tally(test, tables, weighting)
        np.testing.assert_array_equal(got.likelihood, brute_force_likelihood(test, raw, weighting))
        assert got.likelihood.sum() == pytest.approx(1.0, abs=1e-12)

    def test_codes_and_keys_agree(self, rng):
        _, tables = toy_tables(rng)
        codes = rng.integers(0, 50, size=(10, 3))
        keys = [Q.key(c, "PN") for c in codes.ravel()]
        np.testing.assert_array_equal(tally(codes, tables).likelihood, tally(keys, tables).likelihood)

    def test_scale_invariance(self, rng):
        _, tables = toy_tables(rng)
        test = rng.integers(0, 40, size=60)
        base = tally(test, tables).likelihood
        for c in (2, 7, 100):
            scaled = {n: table_from_codes(n, "PN", Q, np.repeat(t.keys, t.counts * c)) for n, t in tables.items()}
            np.testing.assert_allclose(tally(test, scaled, alpha=c * ALPHA).likelihood, base, atol=1e-12)

    def test_mixed_methods_rejected(self):
        tables = {"a": table_from_codes("a", "PN", Q, [1]), "b": table_from_codes("b", "P", Q, [1])}
        with pytest.raises(TableMismatchError):
            tally([1], tables)

    def test_wrong_key_method_rejected(self):
        tables = {"a": table_from_codes("a", "PN", Q, [1]), "b": table_from_codes("b", "PN", Q, [2])}
        with pytest.raises(TableMismatchError):
            tally([FeatureKey("P", (1,))], tables)

    def test_votes_binary_vs_count(self):
        tables = {"a": table_from_codes("a", "P", Q, [1, 1, 1, 2]), "b": table_from_codes("b", "P", Q, [2])}
        np.testing.assert_array_equal(votes([1, 1, 2], tables, "count"), [7, 1])
        np.testing.assert_array_equal(votes([1, 1, 2], tables, "binary"), [3, 1])
        with pytest.raises(ValueError):
            votes([1], tables, "weird")


OBJ5 = tuple("abcde")


class TestBayes:
    def test_uniform_likelihood_keeps_prior(self, rng):
        prior = Posterior(OBJ5, rng.dirichlet(np.ones(5)))
        post = bayes_update(prior, np.full(5, 0.2))
        np.testing.assert_allclose(post.probs, prior.probs, atol=1e-12)
        assert post.t == 1

    def test_uniform_prior_gives_likelihood(self):
        lik = np.array([0.8, 0.05, 0.05, 0.05, 0.05])
        np.testing.assert_allclose(bayes_update(Posterior.uniform(OBJ5), lik).probs, lik, atol=1e-12)

    def test_sequential_equals_batch(self, rng):
        liks = rng.dirichlet(np.ones(5) * 2, size=12) + 0.01
        post = Posterior.uniform(OBJ5)
        for lik in liks:
            post = bayes_update(post, lik)
            assert abs(post.probs.sum() - 1.0) < 1e-12
        batch = np.prod(liks, axis=0)
        np.testing.assert_allclose(post.probs, batch / batch.sum(), atol=1e-9)
        assert post.t == 12

    def test_floor(self):
        post = bayes_update(Posterior.uniform(OBJ5), [1.0, 0, 0, 0, 0])
        k = 5
        assert post.probs.min() >= EPSILON / (1 + k * EPSILON)
        assert abs(post.probs.sum() - 1.0) < 1e-12
        # the floor keeps every hypothesis alive
        back = bayes_update(post, [0, 1.0, 0, 0, 0])
        assert back.probs[1] > 0.4

    def test_all_zero_rejected(self):
        with pytest.raises(DegeneratePosteriorError):
            bayes_update(Posterior.uniform(OBJ5), np.zeros(5))

    def test_shape_and_objects_checked(self):
        with pytest.raises(ValueError):
            bayes_update(Posterior.uniform(OBJ5), [0.5, 0.5])
        other = VoteTally(tuple("vwxyz"), np.zeros(5), np.full(5, 0.2))
        with pytest.raises(TableMismatchError):
            bayes_update(Posterior.uniform(OBJ5), other)

    def test_monotone_evidence(self, rng):
        raw, tables = toy_tables(rng, k=4)
        only_a = set(tables["obj0"].keys.tolist())
        for n in ("obj1", "obj2", "obj3"):
            only_a -= set(tables[n].keys.tolist())
        if not only_a:
            pytest.skip("random tables left no key unique to obj0")
        keys = np.array(sorted(only_a))
        prior = Posterior(tuple(tables), rng.dirichlet(np.ones(4)))
        for _ in range(5):
            post = bayes_update(prior, tally(keys, tables))
            if prior.probs[0] < 1 - EPSILON * 4:
                assert post.probs[0] > prior.probs[0]
            prior = post


class TestDecide:
    def test_confident(self):
        d = decide(Posterior(OBJ5, np.array([0.991, 0.003, 0.003, 0.002, 0.001]), 4), 0.99)
        assert d.decided and d.obj == "a" and d.grasps == 4 and d.beta == 0.99

    def test_uniform_undecided(self):
        assert not decide(Posterior.uniform(OBJ5), 0.5).decided

    def test_threshold_boundary(self):
        p = Posterior(OBJ5, np.array([0.91, 0.05, 0.02, 0.01, 0.01]))
        assert decide(p, 0.9).obj == "a"
        assert decide(p, 0.95).obj is None

    def test_strict_inequality(self):
        p = Posterior(("a", "b"), np.array([0.5, 0.5]))
        assert not decide(p, 0.5).decided
        assert decide(Posterior(("a", "b"), np.array([0.25, 0.75])), 0.5).obj == "b"

    def test_argmax_consistent(self, rng):
        for _ in range(200):
            probs = rng.dirichlet(np.ones(5) * 0.3)
            d = decide(Posterior(OBJ5, probs), 0.6)
            if d.decided:
                i = OBJ5.index(d.obj)
                assert all(probs[i] > probs[j] for j in range(5) if j != i)


def test_trace_writer():
    buf = io.StringIO()
    w = TraceWriter(buf, ("a", "b"))
    w.row("a:PN:passive:0", 1, 17, np.array([0.75, 0.25]), np.array([0.75, 0.25]))
    lines = buf.getvalue().splitlines()
    assert lines[0] == "trial,t,pose_index,lik_a,lik_b,post_a,post_b"
    assert lines[1].split(",")[:3] == ["a:PN:passive:0", "1", "17"]
    assert [float(x) for x in lines[1].split(",")[3:]] == [0.75, 0.25, 0.75, 0.25]
