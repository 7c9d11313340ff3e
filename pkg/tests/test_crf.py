"""CRF log-partition, gradients, and decoding against enumeration oracles."""

import numpy as np
import pytest

from jointnlu.crf import crf_nll, crf_nll_backward, crf_score, viterbi
from jointnlu.numerics import log_softmax

import oracles
from oracles import (
    crf_best_path_enumerate,
    crf_log_partition_enumerate,
    finite_difference,
    relative_gradient_error,
)


def random_instance(rng, max_len=6, max_tags=5):
    L = int(rng.integers(1, max_len + 1))
    K = int(rng.integers(2, max_tags + 1))
    return (
        rng.normal(size=(L, K)) * 2,
        rng.normal(size=(K, K)),
        rng.normal(size=K),
        rng.normal(size=K),
    )


class TestScore:
    def test_matches_oracle(self, rng):
        for _ in range(50):
            emis, trans, start, end = random_instance(rng)
            tags = rng.integers(0, emis.shape[1], size=emis.shape[0])
            assert np.isclose(
                crf_score(emis, tags, trans, start, end),
                oracles.crf_score(emis, tags, trans, start, end),
            )

    def test_rejects_bad_tag_ids(self, rng):
        emis, trans, start, end = random_instance(rng)
        bad = np.full(emis.shape[0], emis.shape[1])
        with pytest.raises(ValueError):
            crf_score(emis, bad, trans, start, end)

    def test_rejects_wrong_tag_count(self, rng):
        emis, trans, start, end = random_instance(rng)
        with pytest.raises(ValueError):
            crf_score(emis, [0] * (emis.shape[0] + 1), trans, start, end)


class TestNll:
    def test_single_position_reduces_to_cross_entropy(self, rng):
        emis = rng.normal(size=(1, 4))
        zeros4 = np.zeros(4)
        nll = crf_nll(emis, [2], np.zeros((4, 4)), zeros4, zeros4)
        assert np.isclose(nll, -log_softmax(emis[0])[2])

    def test_two_by_two_partition_is_four_term_sum(self, rng):
        emis = rng.normal(size=(2, 2))
        trans = rng.normal(size=(2, 2))
        start = rng.normal(size=2)
        end = rng.normal(size=2)
        terms = [
            start[i] + emis[0, i] + trans[i, j] + emis[1, j] + end[j]
            for i in range(2)
            for j in range(2)
        ]
        nll, cache = crf_nll(emis, [0, 1], trans, start, end, want_cache=True)
        assert np.isclose(cache["log_z"], np.log(np.exp(terms).sum()))

    def test_partition_matches_enumeration(self, rng):
        for _ in range(300):
            emis, trans, start, end = random_instance(rng)
            tags = rng.integers(0, emis.shape[1], size=emis.shape[0])
            _, cache = crf_nll(emis, tags, trans, start, end, want_cache=True)
            brute = crf_log_partition_enumerate(emis, trans, start, end)
            assert abs(cache["log_z"] - brute) <= 1e-8

    def test_partition_dominates_every_path(self, rng):
        emis, trans, start, end = random_instance(rng, max_len=4, max_tags=3)
        _, cache = crf_nll(
            emis, [0] * emis.shape[0], trans, start, end, want_cache=True
        )
        _, best, _ = crf_best_path_enumerate(emis, trans, start, end)
        assert cache["log_z"] > best  # strict: several paths contribute mass

    def test_nll_decreases_as_gold_emissions_grow(self, rng):
        emis, trans, start, end = random_instance(rng)
        tags = rng.integers(0, emis.shape[1], size=emis.shape[0])
        values = []
        for boost in (0.0, 1.0, 2.0, 4.0):
            boosted = emis.copy()
            boosted[np.arange(len(tags)), tags] += boost
            values.append(crf_nll(boosted, tags, trans, start, end))
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_gradients_match_fd(self, rng):
        for _ in range(20):
            emis, trans, start, end = random_instance(rng)
            tags = rng.integers(0, emis.shape[1], size=emis.shape[0])
            _, cache = crf_nll(emis, tags, trans, start, end, want_cache=True)
            grads = crf_nll_backward(cache)

            holders = {"emissions": emis, "trans": trans, "start": start, "end": end}

            def loss(_parms=None):
                return crf_nll(
                    holders["emissions"], tags, holders["trans"],
                    holders["start"], holders["end"],
                )

            for name in holders:
                coords, fd = finite_difference(
                    loss, holders, name, step=1e-5, max_coords=8, rng=rng
                )
                err = relative_gradient_error(grads[name].reshape(-1)[coords], fd)
                assert err.max() <= 1e-4, f"{name}: {err.max():.2e}"

    def test_emission_gradient_is_marginals_minus_onehot(self, rng):
        # rows of d_emissions + onehot(gold) must be probability rows
        emis, trans, start, end = random_instance(rng)
        tags = rng.integers(0, emis.shape[1], size=emis.shape[0])
        _, cache = crf_nll(emis, tags, trans, start, end, want_cache=True)
        marg = crf_nll_backward(cache)["emissions"].copy()
        marg[np.arange(len(tags)), tags] += 1.0
        assert np.allclose(marg.sum(axis=1), 1.0)
        assert (marg >= 0).all() and (marg <= 1).all()


class TestViterbi:
    def test_zero_transitions_reduce_to_argmax(self, rng):
        emis = rng.normal(size=(5, 4))
        K = emis.shape[1]
        path = viterbi(emis, np.zeros((K, K)), np.zeros(K), np.zeros(K))
        assert np.array_equal(path, emis.argmax(axis=1))

    def test_matches_enumeration_on_random_instances(self, rng):
        for _ in range(300):
            emis, trans, start, end = random_instance(rng)
            path = viterbi(emis, trans, start, end)
            best, best_score, n_optimal = crf_best_path_enumerate(emis, trans, start, end)
            assert abs(crf_score(emis, path, trans, start, end) - best_score) <= 1e-8
            if n_optimal == 1:
                assert np.array_equal(path, best)

    def test_decoded_score_self_consistency(self, rng):
        emis, trans, start, end = random_instance(rng)
        path = viterbi(emis, trans, start, end)
        _, best_score, _ = crf_best_path_enumerate(emis, trans, start, end)
        assert np.isclose(crf_score(emis, path, trans, start, end), best_score)

    def test_all_ties_pick_lowest_ids(self):
        emis = np.zeros((4, 3))
        path = viterbi(emis, np.zeros((3, 3)), np.zeros(3), np.zeros(3))
        assert np.array_equal(path, np.zeros(4, dtype=int))

    def test_final_position_tie_breaks_low(self):
        # two tags with equal total score; the lower id must win
        emis = np.array([[1.0, 1.0]])
        path = viterbi(emis, np.zeros((2, 2)), np.zeros(2), np.zeros(2))
        assert path.tolist() == [0]


class TestValidation:
    def test_shape_disagreement(self, rng):
        emis = rng.normal(size=(3, 4))
        with pytest.raises(ValueError):
            crf_nll(emis, [0, 0, 0], np.zeros((5, 5)), np.zeros(5), np.zeros(5))
