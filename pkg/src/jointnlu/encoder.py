"""Compact transformer encoder trained from scratch, with exact manual
gradients.

Post-norm residual blocks: embeddings go through a layer norm, then each
block applies self-attention and a GELU feed-forward sublayer, each followed
by residual add and layer norm. Padded key positions are masked out of every
attention row, and the returned hidden states are zeroed at padded positions,
so padding content can never influence real positions.

Parameters live in a flat name->array dict (see init_encoder_params for the
naming scheme); gradients come back under the same names.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .numerics import (
    apply_mask,
    dropout_mask,
    gelu,
    gelu_grad,
    layer_norm,
    layer_norm_backward,
    softmax_backward,
    stable_softmax,
)


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int
    d_h: int = 64
    n_layers: int = 2
    n_heads: int = 4
    d_ff: int = 128
    max_len: int = 50

    def __post_init__(self):
        if self.vocab_size < 1:
            raise ValueError("vocab_size must be positive")
        if min(self.d_h, self.n_layers, self.n_heads, self.d_ff, self.max_len) < 1:
            raise ValueError("all encoder dimensions must be positive")
        if self.d_h % self.n_heads != 0:
            raise ValueError(f"d_h {self.d_h} not divisible by n_heads {self.n_heads}")

    @property
    def d_head(self) -> int:
        return self.d_h // self.n_heads

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "EncoderConfig":
        return cls(**payload)


def init_encoder_params(
    cfg: EncoderConfig, rng: np.random.Generator, scale: float = 0.02
) -> dict[str, np.ndarray]:
    """Fresh parameter dict: N(0, scale) weights, unit gains, zero biases."""
    p: dict[str, np.ndarray] = {
        "tok_emb": rng.normal(0.0, scale, (cfg.vocab_size, cfg.d_h)),
        "pos_emb": rng.normal(0.0, scale, (cfg.max_len, cfg.d_h)),
        "ln_emb.g": np.ones(cfg.d_h),
        "ln_emb.b": np.zeros(cfg.d_h),
    }
    for i in range(cfg.n_layers):
        for w in ("Wq", "Wk", "Wv", "Wo"):
            p[f"l{i}.{w}"] = rng.normal(0.0, scale, (cfg.d_h, cfg.d_h))
        for b in ("bq", "bk", "bv", "bo"):
            p[f"l{i}.{b}"] = np.zeros(cfg.d_h)
        p[f"l{i}.ln1.g"] = np.ones(cfg.d_h)
        p[f"l{i}.ln1.b"] = np.zeros(cfg.d_h)
        p[f"l{i}.W1"] = rng.normal(0.0, scale, (cfg.d_h, cfg.d_ff))
        p[f"l{i}.b1"] = np.zeros(cfg.d_ff)
        p[f"l{i}.W2"] = rng.normal(0.0, scale, (cfg.d_ff, cfg.d_h))
        p[f"l{i}.b2"] = np.zeros(cfg.d_h)
        p[f"l{i}.ln2.g"] = np.ones(cfg.d_h)
        p[f"l{i}.ln2.b"] = np.zeros(cfg.d_h)
    return p


def _split_heads(x: np.ndarray, n_heads: int) -> np.ndarray:
    b, n, d = x.shape
    return x.reshape(b, n, n_heads, d // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    b, h, n, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, n, h * dh)


def encode(
    ids: np.ndarray,
    pad_mask: np.ndarray,
    params: dict[str, np.ndarray],
    cfg: EncoderConfig,
    dropout_rate: float = 0.0,
    rng: np.random.Generator | None = None,
    want_cache: bool = False,
):
    """Hidden states (batch, length, d_h) for a padded id batch.

    pad_mask is True at real positions. Output rows at padded positions are
    exactly zero. Dropout needs an rng; with rate 0 or rng None the pass is
    deterministic.
    """
    ids = np.asarray(ids)
    pad_mask = np.asarray(pad_mask, dtype=bool)
    if ids.ndim != 2 or ids.shape != pad_mask.shape:
        raise ValueError("ids and pad_mask must share one (batch, length) shape")
    b, n = ids.shape
    if n > cfg.max_len:
        raise ValueError(f"sequence length {n} exceeds max_len {cfg.max_len}")
    if ids.min() < 0 or ids.max() >= cfg.vocab_size:
        raise ValueError("token id out of range")
    if not pad_mask.any(axis=1).all():
        raise ValueError("every sequence needs at least one real position")

    emb = params["tok_emb"][ids] + params["pos_emb"][:n][None, :, :]
    x, ln_emb_cache = layer_norm(emb, params["ln_emb.g"], params["ln_emb.b"])
    emb_mask = dropout_mask(rng, x.shape, dropout_rate)
    x = apply_mask(x, emb_mask)

    key_mask = pad_mask[:, None, None, :]  # broadcast over heads and queries
    scale = 1.0 / np.sqrt(cfg.d_head)
    layers = []
    for i in range(cfg.n_layers):
        x_in = x
        q = _split_heads(x @ params[f"l{i}.Wq"] + params[f"l{i}.bq"], cfg.n_heads)
        k = _split_heads(x @ params[f"l{i}.Wk"] + params[f"l{i}.bk"], cfg.n_heads)
        v = _split_heads(x @ params[f"l{i}.Wv"] + params[f"l{i}.bv"], cfg.n_heads)
        scores = np.where(key_mask, (q @ k.swapaxes(-1, -2)) * scale, -np.inf)
        probs = stable_softmax(scores, axis=-1)
        ctx = _merge_heads(probs @ v)
        attn_out = ctx @ params[f"l{i}.Wo"] + params[f"l{i}.bo"]
        attn_drop = dropout_mask(rng, attn_out.shape, dropout_rate)
        attn_out = apply_mask(attn_out, attn_drop)
        x1, ln1_cache = layer_norm(
            x_in + attn_out, params[f"l{i}.ln1.g"], params[f"l{i}.ln1.b"]
        )

        u = x1 @ params[f"l{i}.W1"] + params[f"l{i}.b1"]
        a = gelu(u)
        ffn_out = a @ params[f"l{i}.W2"] + params[f"l{i}.b2"]
        ffn_drop = dropout_mask(rng, ffn_out.shape, dropout_rate)
        ffn_out = apply_mask(ffn_out, ffn_drop)
        x2, ln2_cache = layer_norm(
            x1 + ffn_out, params[f"l{i}.ln2.g"], params[f"l{i}.ln2.b"]
        )

        layers.append(
            dict(
                x_in=x_in, q=q, k=k, v=v, probs=probs, ctx=ctx,
                attn_drop=attn_drop, ln1_cache=ln1_cache, x1=x1,
                u=u, a=a, ffn_drop=ffn_drop, ln2_cache=ln2_cache,
            )
        )
        x = x2

    out = x * pad_mask[:, :, None]
    if not want_cache:
        return out
    cache = dict(
        ids=ids, pad_mask=pad_mask, emb_mask=emb_mask,
        ln_emb_cache=ln_emb_cache, layers=layers, scale=scale,
    )
    return out, cache


def encode_backward(
    d_out: np.ndarray,
    cache: dict,
    params: dict[str, np.ndarray],
    cfg: EncoderConfig,
) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss w.r.t. every encoder parameter."""
    ids = cache["ids"]
    pad_mask = cache["pad_mask"]
    b, n = ids.shape
    grads = {name: np.zeros_like(arr) for name, arr in params.items()}

    d_x = d_out * pad_mask[:, :, None]
    for i in reversed(range(cfg.n_layers)):
        lc = cache["layers"][i]

        d_r2, d_g, d_b = layer_norm_backward(d_x, lc["ln2_cache"])
        grads[f"l{i}.ln2.g"] += d_g
        grads[f"l{i}.ln2.b"] += d_b
        d_x1 = d_r2.copy()
        d_ffn = apply_mask(d_r2, lc["ffn_drop"])

        flat_a = lc["a"].reshape(-1, cfg.d_ff)
        flat_dffn = d_ffn.reshape(-1, cfg.d_h)
        grads[f"l{i}.W2"] += flat_a.T @ flat_dffn
        grads[f"l{i}.b2"] += flat_dffn.sum(axis=0)
        d_a = d_ffn @ params[f"l{i}.W2"].T
        d_u = d_a * gelu_grad(lc["u"])
        flat_x1 = lc["x1"].reshape(-1, cfg.d_h)
        flat_du = d_u.reshape(-1, cfg.d_ff)
        grads[f"l{i}.W1"] += flat_x1.T @ flat_du
        grads[f"l{i}.b1"] += flat_du.sum(axis=0)
        d_x1 += d_u @ params[f"l{i}.W1"].T

        d_r1, d_g, d_b = layer_norm_backward(d_x1, lc["ln1_cache"])
        grads[f"l{i}.ln1.g"] += d_g
        grads[f"l{i}.ln1.b"] += d_b
        d_x_in = d_r1.copy()
        d_attn = apply_mask(d_r1, lc["attn_drop"])

        flat_ctx = lc["ctx"].reshape(-1, cfg.d_h)
        flat_dattn = d_attn.reshape(-1, cfg.d_h)
        grads[f"l{i}.Wo"] += flat_ctx.T @ flat_dattn
        grads[f"l{i}.bo"] += flat_dattn.sum(axis=0)
        d_ctx = _split_heads(d_attn @ params[f"l{i}.Wo"].T, cfg.n_heads)

        d_probs = d_ctx @ lc["v"].swapaxes(-1, -2)
        d_v = lc["probs"].swapaxes(-1, -2) @ d_ctx
        d_scores = softmax_backward(d_probs, lc["probs"], axis=-1)
        d_q = (d_scores @ lc["k"]) * cache["scale"]
        d_k = (d_scores.swapaxes(-1, -2) @ lc["q"]) * cache["scale"]

        x_in = lc["x_in"]
        flat_x = x_in.reshape(-1, cfg.d_h)
        for name, d_heads in (("q", d_q), ("k", d_k), ("v", d_v)):
            d_lin = _merge_heads(d_heads)
            flat_d = d_lin.reshape(-1, cfg.d_h)
            grads[f"l{i}.W{name}"] += flat_x.T @ flat_d
            grads[f"l{i}.b{name}"] += flat_d.sum(axis=0)
            d_x_in += d_lin @ params[f"l{i}.W{name}"].T

        d_x = d_x_in

    d_x = apply_mask(d_x, cache["emb_mask"])
    d_emb, d_g, d_b = layer_norm_backward(d_x, cache["ln_emb_cache"])
    grads["ln_emb.g"] += d_g
    grads["ln_emb.b"] += d_b
    np.add.at(grads["tok_emb"], ids, d_emb)
    grads["pos_emb"][:n] += d_emb.sum(axis=0)
    return grads
