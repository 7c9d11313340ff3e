"""Pooling attention, pooled classification, and their gradients."""

import numpy as np
import pytest

from jointnlu.intent_head import (
    attention_logits,
    attention_weights,
    init_intent_params,
    intent_backward,
    intent_forward,
    intent_logits,
    pool,
)
from jointnlu.numerics import log_softmax

from oracles import finite_difference, relative_gradient_error


D_H = 8
N_INTENTS = 4


def random_states(rng, b=3, n=6, d=D_H):
    H = rng.normal(size=(b, n, d))
    pad = np.ones((b, n), dtype=bool)
    pad[0, 4:] = False
    H[~pad] = 0.0
    return H, pad


class TestAttentionLogits:
    def test_zero_matrix_gives_zero_scores(self, rng):
        H, pad = random_states(rng)
        logits = attention_logits(H, pad, np.zeros((D_H, D_H)), rng.normal(size=D_H))
        assert np.array_equal(logits[pad], np.zeros(pad.sum()))
        assert np.all(np.isneginf(logits[~pad]))

    def test_single_position(self, rng):
        H = rng.normal(size=(1, 1, D_H))
        logits = attention_logits(
            H, np.ones((1, 1), bool), rng.normal(size=(D_H, D_H)), rng.normal(size=D_H)
        )
        assert logits.shape == (1, 1)

    def test_matches_per_position_evaluation(self, rng):
        H, pad = random_states(rng)
        W = rng.normal(size=(D_H, D_H))
        v = rng.normal(size=D_H)
        logits = attention_logits(H, pad, W, v)
        for b in range(H.shape[0]):
            for i in range(H.shape[1]):
                if pad[b, i]:
                    direct = v @ np.tanh(W @ H[b, i])
                    assert np.isclose(logits[b, i], direct)

    def test_shape_mismatch(self, rng):
        H, pad = random_states(rng)
        with pytest.raises(ValueError):
            attention_logits(H, pad, np.zeros((D_H + 1, D_H + 1)), np.zeros(D_H + 1))


class TestAttentionWeights:
    def test_equal_logits_uniform(self):
        w = attention_weights(np.zeros((1, 4)), D_H)
        assert np.allclose(w, 0.25)

    def test_closed_form_two_positions(self):
        logits = np.array([[np.sqrt(D_H), 0.0]])
        w = attention_weights(logits, D_H)
        e = np.exp(1.0)
        assert np.allclose(w, [e / (1 + e), 1 / (1 + e)])
        assert np.allclose(w, [0.7311, 0.2689], atol=5e-5)

    def test_shift_invariance(self, rng):
        logits = rng.normal(size=(2, 5))
        assert np.allclose(
            attention_weights(logits, D_H), attention_weights(logits + 3.7, D_H)
        )

    def test_scaling_equivalence(self, rng):
        # temperature form equals plain softmax of pre-divided logits
        from jointnlu.numerics import stable_softmax

        logits = rng.normal(size=(4, 7)) * 5
        assert np.allclose(
            attention_weights(logits, D_H),
            stable_softmax(logits / np.sqrt(D_H), axis=-1),
        )

    def test_simplex_with_zero_mass_on_padding(self, rng):
        for _ in range(1000):
            n = int(rng.integers(2, 9))
            H = rng.normal(size=(1, n, D_H))
            pad = np.ones((1, n), dtype=bool)
            n_pad = int(rng.integers(0, n - 1))
            if n_pad:
                pad[0, n - n_pad:] = False
            logits = attention_logits(
                H, pad, rng.normal(size=(D_H, D_H)), rng.normal(size=D_H)
            )
            alpha = attention_weights(logits, D_H)
            assert abs(alpha.sum() - 1.0) <= 1e-6
            assert (alpha >= 0).all()
            assert np.array_equal(alpha[~pad], np.zeros(n_pad))

    def test_all_padded_rejected(self):
        with pytest.raises(ValueError):
            attention_weights(np.full((1, 3), -np.inf), D_H)


class TestPool:
    def test_single_position_is_tanh_of_row(self, rng):
        H = rng.normal(size=(2, 1, D_H))
        out = pool(H, np.ones((2, 1)))
        assert np.allclose(out, np.tanh(H[:, 0]))

    def test_identical_rows_ignore_weights(self, rng):
        row = rng.normal(size=D_H)
        H = np.tile(row, (1, 5, 1))
        alpha = rng.dirichlet(np.ones(5))[None, :]
        assert np.allclose(pool(H, alpha), np.tanh(row))

    def test_matches_direct_weighted_sum(self, rng):
        H, pad = random_states(rng)
        alpha = np.where(pad, rng.random(pad.shape), 0.0)
        alpha /= alpha.sum(axis=1, keepdims=True)
        out = pool(H, alpha)
        for b in range(H.shape[0]):
            direct = np.tanh(sum(alpha[b, i] * H[b, i] for i in range(H.shape[1])))
            assert np.allclose(out[b], direct)

    def test_output_bounded_by_unit_box(self, rng):
        # tanh saturates to exactly +-1.0 in floats, so the bound is closed
        H, pad = random_states(rng)
        alpha = np.where(pad, 1.0, 0.0)
        alpha /= alpha.sum(axis=1, keepdims=True)
        assert (np.abs(pool(H * 100, alpha)) <= 1.0).all()
        assert (np.abs(pool(H, alpha)) < 1.0).all()

    def test_weight_shape_enforced(self, rng):
        H, _ = random_states(rng)
        with pytest.raises(ValueError):
            pool(H, np.ones((3, 7)))


class TestIntentLogits:
    def test_zero_matrix_gives_bias(self, rng):
        b_cls = rng.normal(size=N_INTENTS)
        y = intent_logits(rng.normal(size=(2, D_H)), np.zeros((N_INTENTS, D_H)), b_cls)
        assert np.allclose(y, b_cls)

    def test_linear_in_matrix(self, rng):
        h = rng.normal(size=(2, D_H))
        W = rng.normal(size=(N_INTENTS, D_H))
        b = rng.normal(size=N_INTENTS)
        assert np.allclose(
            intent_logits(h, 2 * W, b) - b, 2 * (intent_logits(h, W, b) - b)
        )

    def test_argmax_invariant_to_constant_bias_shift(self, rng):
        h = rng.normal(size=(5, D_H))
        W = rng.normal(size=(N_INTENTS, D_H))
        b = rng.normal(size=N_INTENTS)
        base = intent_logits(h, W, b).argmax(axis=-1)
        shifted = intent_logits(h, W, b + 11.0).argmax(axis=-1)
        assert np.array_equal(base, shifted)


def _ce(y, targets):
    return float(-log_softmax(y, axis=-1)[np.arange(len(targets)), targets].mean())


def _ce_grad(y, targets):
    from jointnlu.numerics import stable_softmax

    g = stable_softmax(y, axis=-1)
    g[np.arange(len(targets)), targets] -= 1.0
    return g / len(targets)


class TestForwardBackward:
    @pytest.mark.parametrize("mode", ["attention", "start_token"])
    def test_gradients_match_fd(self, rng, mode):
        H, pad = random_states(rng)
        params = init_intent_params(rng, D_H, N_INTENTS, mode)
        for p in params.values():  # larger weights make the check non-trivial
            p += rng.normal(scale=0.3, size=p.shape)
        targets = rng.integers(0, N_INTENTS, size=H.shape[0])

        y, _, _, cache = intent_forward(H, pad, params, mode, want_cache=True)
        d_H, grads = intent_backward(_ce_grad(y, targets), cache, params)

        holders = dict(params)
        holders["H"] = H

        def loss(_parms=None):
            out, _, _ = intent_forward(holders["H"], pad, params, mode)
            return _ce(out, targets)

        analytic = dict(grads)
        analytic["H"] = d_H
        for name in holders:
            coords, fd = finite_difference(
                loss, holders, name, step=1e-5, max_coords=10, rng=rng
            )
            err = relative_gradient_error(analytic[name].reshape(-1)[coords], fd)
            assert err.max() <= 1e-4, f"{mode}/{name}: {err.max():.2e}"

    def test_gradients_with_dropout_replay(self, rng):
        H, pad = random_states(rng)
        params = init_intent_params(rng, D_H, N_INTENTS)
        targets = rng.integers(0, N_INTENTS, size=H.shape[0])

        y, _, _, cache = intent_forward(
            H, pad, params, dropout_rate=0.3, rng=np.random.default_rng(5),
            want_cache=True,
        )
        _, grads = intent_backward(_ce_grad(y, targets), cache, params)

        def loss(_parms=None):
            out, _, _ = intent_forward(
                H, pad, params, dropout_rate=0.3, rng=np.random.default_rng(5)
            )
            return _ce(out, targets)

        for name in params:
            coords, fd = finite_difference(
                loss, params, name, step=1e-5, max_coords=6, rng=rng
            )
            err = relative_gradient_error(grads[name].reshape(-1)[coords], fd)
            assert err.max() <= 1e-4, f"{name}: {err.max():.2e}"

    def test_boundary_positions_receive_mass(self, rng):
        H, pad = random_states(rng)
        params = init_intent_params(rng, D_H, N_INTENTS)
        _, alpha, _ = intent_forward(H, pad, params)
        assert (alpha[:, 0] > 0).all()
        assert (alpha[1:, -1] > 0).all()  # row 0 has padding at the tail

    def test_pooled_vector_inside_unit_box(self, rng):
        H, pad = random_states(rng)
        params = init_intent_params(rng, D_H, N_INTENTS)
        _, _, h_int = intent_forward(H, pad, params)
        assert (np.abs(h_int) < 1.0).all()

    def test_start_token_alpha_is_position_zero_indicator(self, rng):
        H, pad = random_states(rng)
        params = init_intent_params(rng, D_H, N_INTENTS, "start_token")
        _, alpha, h_int = intent_forward(H, pad, params, "start_token")
        assert np.array_equal(alpha[:, 0], np.ones(H.shape[0]))
        assert np.array_equal(alpha[:, 1:], np.zeros((H.shape[0], H.shape[1] - 1)))
        direct = np.tanh(H[:, 0] @ params["W_pool"].T + params["b_pool"])
        assert np.allclose(h_int, direct)

    def test_unknown_mode_rejected(self, rng):
        H, pad = random_states(rng)
        with pytest.raises(ValueError):
            intent_forward(H, pad, {}, mode="mean")
