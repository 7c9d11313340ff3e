"""The full joint model: encoder, intent pooling, fused slot scoring.

Parameters live in one flat name -> float64 array dict:

    enc.*                     encoder tensors
    feat.*                    word-feature network (when the feature path is on)
    int.*                     intent head (pooling + classifier)
    W_s, b_s                  fused slot projection
    crf.T, crf.start, crf.end transition scores (when slot_mode is "crf")

Gradients are returned under the same names, so the optimizer can walk the
two dicts in parallel and update in place.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .crf import crf_nll, crf_nll_backward, viterbi
from .data import IntentVocab, SlotVocab, TaggedUtterance
from .encoder import EncoderConfig, encode, encode_backward, init_encoder_params
from .features import (
    FEATURE_DIM,
    FeatureNetParams,
    WordFeaturizer,
    feature_backward,
    feature_forward,
    init_feature_params,
)
from .intent_head import POOL_MODES, init_intent_params, intent_backward, intent_forward
from .numerics import log_softmax, stable_softmax
from .slot_head import init_slot_params, slot_backward, slot_forward
from .subwords import AlignedSequence, WordPieceVocab, align
from .tagging import SlotTag

SLOT_MODES = ("softmax", "crf")


@dataclass(frozen=True)
class ModelConfig:
    """Everything the forward pass needs to know besides the tensors."""

    encoder: EncoderConfig
    n_intents: int
    n_slots: int
    slot_mode: str = "softmax"
    slot_features: bool = True
    intent_pool: str = "attention"
    dropout_rate: float = 0.1

    def __post_init__(self):
        if self.n_intents < 1 or self.n_slots < 1:
            raise ValueError("label spaces must be nonempty")
        if self.slot_mode not in SLOT_MODES:
            raise ValueError(f"slot_mode must be one of {SLOT_MODES}")
        if self.intent_pool not in POOL_MODES:
            raise ValueError(f"intent_pool must be one of {POOL_MODES}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")

    def to_dict(self) -> dict:
        return {
            "encoder": self.encoder.to_dict(),
            "n_intents": self.n_intents,
            "n_slots": self.n_slots,
            "slot_mode": self.slot_mode,
            "slot_features": self.slot_features,
            "intent_pool": self.intent_pool,
            "dropout_rate": self.dropout_rate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["encoder"] = EncoderConfig.from_dict(d["encoder"])
        return cls(**d)


def init_model_params(
    cfg: ModelConfig, rng: np.random.Generator, scale: float = 0.02
) -> Dict[str, np.ndarray]:
    params: Dict[str, np.ndarray] = {}
    for k, v in init_encoder_params(cfg.encoder, rng, scale).items():
        params[f"enc.{k}"] = v
    if cfg.slot_features:
        for k, v in init_feature_params(rng, scale).tensors().items():
            params[f"feat.{k}"] = v
    for k, v in init_intent_params(
        rng, cfg.encoder.d_h, cfg.n_intents, cfg.intent_pool, scale
    ).items():
        params[f"int.{k}"] = v
    params.update(
        init_slot_params(
            rng, cfg.n_slots, cfg.n_intents, cfg.encoder.d_h,
            cfg.slot_features, scale,
        )
    )
    if cfg.slot_mode == "crf":
        params["crf.T"] = rng.normal(0.0, scale, (cfg.n_slots, cfg.n_slots))
        params["crf.start"] = np.zeros(cfg.n_slots)
        params["crf.end"] = np.zeros(cfg.n_slots)
    return params


def _sub(params: Dict[str, np.ndarray], prefix: str) -> Dict[str, np.ndarray]:
    return {k[len(prefix):]: v for k, v in params.items() if k.startswith(prefix)}


def _feature_params(params: Dict[str, np.ndarray]) -> FeatureNetParams:
    return FeatureNetParams(
        W_w=params["feat.W_w"],
        b_w=params["feat.b_w"],
        a_prelu=params["feat.a_prelu"],
        W_proj=params["feat.W_proj"],
        b_proj=params["feat.b_proj"],
    )


@dataclass(frozen=True)
class Batch:
    """Padded tensor view of a list of aligned sequences."""

    ids: np.ndarray          # (b, n) int
    pad_mask: np.ndarray     # (b, n) bool, True at real positions
    features: np.ndarray     # (b, n, 23)
    tag_ids: np.ndarray      # (b, n) int, 0 at padding
    intent_ids: np.ndarray   # (b,)

    def __post_init__(self):
        b, n = self.ids.shape
        if self.pad_mask.shape != (b, n) or self.tag_ids.shape != (b, n):
            raise ValueError("per-position arrays disagree on shape")
        if self.features.shape != (b, n, FEATURE_DIM):
            raise ValueError("feature block has wrong shape")
        if self.intent_ids.shape != (b,):
            raise ValueError("need one intent id per sequence")

    @property
    def lengths(self) -> np.ndarray:
        return self.pad_mask.sum(axis=1)


def make_batch(
    seqs: Sequence[AlignedSequence],
    intent_ids: Sequence[int],
    slot_vocab: SlotVocab,
    pad_id: int = 0,
) -> Batch:
    if not seqs or len(seqs) != len(intent_ids):
        raise ValueError("need one intent id per aligned sequence")
    b = len(seqs)
    n = max(len(s) for s in seqs)
    ids = np.full((b, n), pad_id, dtype=int)
    pad_mask = np.zeros((b, n), dtype=bool)
    features = np.zeros((b, n, FEATURE_DIM))
    tag_ids = np.zeros((b, n), dtype=int)
    for i, seq in enumerate(seqs):
        L = len(seq)
        ids[i, :L] = seq.piece_ids
        pad_mask[i, :L] = True
        features[i, :L] = seq.features
        tag_ids[i, :L] = [slot_vocab.encode(t) for t in seq.piece_tags]
    return Batch(ids, pad_mask, features, tag_ids, np.asarray(intent_ids, dtype=int))


def align_utterance(
    utt: TaggedUtterance,
    piece_vocab: WordPieceVocab,
    featurizer: WordFeaturizer,
    max_len: int = 50,
) -> AlignedSequence:
    feats = featurizer.featurize(utt.words)
    return align(utt.words, utt.tags, feats, piece_vocab, max_len)


def model_outputs(
    params: Dict[str, np.ndarray],
    cfg: ModelConfig,
    batch: Batch,
    dropout_rate: float = 0.0,
    rng: Optional[np.random.Generator] = None,
    want_cache: bool = False,
):
    """Run the full forward pass.

    Returns (y_int, slot_scores, alpha) and optionally the cache bundle for
    the backward pass. slot_scores is (b, n, n_slots); rows at padded
    positions are meaningless and must be masked by the consumer.
    """
    enc_params = _sub(params, "enc.")
    enc_out = encode(
        batch.ids, batch.pad_mask, enc_params, cfg.encoder,
        dropout_rate, rng, want_cache,
    )
    H, enc_cache = enc_out if want_cache else (enc_out, None)

    int_params = _sub(params, "int.")
    int_out = intent_forward(
        H, batch.pad_mask, int_params, cfg.intent_pool,
        dropout_rate, rng, want_cache,
    )
    y_int, alpha = int_out[0], int_out[1]
    int_cache = int_out[3] if want_cache else None

    f_words, feat_cache = None, None
    if cfg.slot_features:
        feat_out = feature_forward(batch.features, _feature_params(params), want_cache)
        f_words, feat_cache = feat_out if want_cache else (feat_out, None)

    slot_out = slot_forward(
        y_int, f_words, H, params["W_s"], params["b_s"],
        dropout_rate, rng, want_cache,
    )
    slot_scores, slot_cache = slot_out if want_cache else (slot_out, None)

    if not want_cache:
        return y_int, slot_scores, alpha
    cache = dict(
        enc=enc_cache, int=int_cache, feat=feat_cache, slot=slot_cache,
        batch=batch,
    )
    return y_int, slot_scores, alpha, cache


def _intent_ce(y_int: np.ndarray, intent_ids: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its gradient."""
    b = y_int.shape[0]
    logp = log_softmax(y_int, axis=-1)
    rows = np.arange(b)
    loss = float(-logp[rows, intent_ids].mean())
    d = np.exp(logp)
    d[rows, intent_ids] -= 1.0
    return loss, d / b


def _softmax_slot_loss(
    slot_scores: np.ndarray, tag_ids: np.ndarray, pad_mask: np.ndarray
) -> Tuple[float, np.ndarray]:
    """Cross-entropy at every non-padded position: per-sequence mean over
    positions, then mean over the batch."""
    b, n, _ = slot_scores.shape
    logp = log_softmax(slot_scores, axis=-1)
    gold = np.take_along_axis(logp, tag_ids[:, :, None], axis=-1)[:, :, 0]
    counts = pad_mask.sum(axis=1)
    per_seq = -(gold * pad_mask).sum(axis=1) / counts
    loss = float(per_seq.mean())

    d = np.exp(logp)
    d[np.arange(b)[:, None], np.arange(n)[None, :], tag_ids] -= 1.0
    d *= (pad_mask / (counts[:, None] * b))[:, :, None]
    return loss, d


def _crf_slot_loss(
    slot_scores: np.ndarray,
    tag_ids: np.ndarray,
    pad_mask: np.ndarray,
    params: Dict[str, np.ndarray],
) -> Tuple[float, np.ndarray, Dict[str, np.ndarray]]:
    """Batch-mean sequence negative log-likelihood and its gradients."""
    trans, start, end = params["crf.T"], params["crf.start"], params["crf.end"]
    b = slot_scores.shape[0]
    lengths = pad_mask.sum(axis=1)
    total = 0.0
    d_emis = np.zeros_like(slot_scores)
    crf_grads = {
        "crf.T": np.zeros_like(trans),
        "crf.start": np.zeros_like(start),
        "crf.end": np.zeros_like(end),
    }
    for i in range(b):
        L = int(lengths[i])
        nll, cache = crf_nll(
            slot_scores[i, :L], tag_ids[i, :L], trans, start, end, want_cache=True
        )
        g = crf_nll_backward(cache)
        total += nll
        d_emis[i, :L] = g["emissions"]
        crf_grads["crf.T"] += g["trans"]
        crf_grads["crf.start"] += g["start"]
        crf_grads["crf.end"] += g["end"]
    d_emis /= b
    for k in crf_grads:
        crf_grads[k] /= b
    return total / b, d_emis, crf_grads


def model_losses(
    params: Dict[str, np.ndarray],
    cfg: ModelConfig,
    batch: Batch,
    dropout_rate: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[float, float]:
    """Forward-only (l_intent, l_slot); used by gradient checks and logging."""
    y_int, slot_scores, _ = model_outputs(params, cfg, batch, dropout_rate, rng)
    l_int, _ = _intent_ce(y_int, batch.intent_ids)
    if cfg.slot_mode == "crf":
        l_slot, _, _ = _crf_slot_loss(slot_scores, batch.tag_ids, batch.pad_mask, params)
    else:
        l_slot, _ = _softmax_slot_loss(slot_scores, batch.tag_ids, batch.pad_mask)
    return l_int, l_slot


def model_loss_and_grads(
    params: Dict[str, np.ndarray],
    cfg: ModelConfig,
    batch: Batch,
    gamma: float,
    dropout_rate: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[float, float, Dict[str, np.ndarray]]:
    """One full forward/backward pass.

    Returns (l_intent, l_slot, grads) where grads is the gradient of
    gamma*l_intent + (1-gamma)*l_slot, keyed exactly like params.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must be in [0, 1]")
    y_int, slot_scores, _, cache = model_outputs(
        params, cfg, batch, dropout_rate, rng, want_cache=True
    )

    l_int, d_y_ce = _intent_ce(y_int, batch.intent_ids)
    grads: Dict[str, np.ndarray] = {}
    if cfg.slot_mode == "crf":
        l_slot, d_slot, crf_grads = _crf_slot_loss(
            slot_scores, batch.tag_ids, batch.pad_mask, params
        )
        for k, v in crf_grads.items():
            grads[k] = (1.0 - gamma) * v
    else:
        l_slot, d_slot = _softmax_slot_loss(
            slot_scores, batch.tag_ids, batch.pad_mask
        )

    d_slot = (1.0 - gamma) * d_slot
    d_y_from_slot, d_f, d_H_slot, slot_grads = slot_backward(
        d_slot, cache["slot"], params["W_s"]
    )
    grads.update(slot_grads)

    d_y_int = gamma * d_y_ce + d_y_from_slot
    int_params = _sub(params, "int.")
    d_H_int, int_grads = intent_backward(d_y_int, cache["int"], int_params)
    for k, v in int_grads.items():
        grads[f"int.{k}"] = v

    if cfg.slot_features:
        _, feat_grads = feature_backward(d_f, cache["feat"], _feature_params(params))
        for k, v in feat_grads.items():
            grads[f"feat.{k}"] = v

    enc_grads = encode_backward(
        d_H_int + d_H_slot, cache["enc"], _sub(params, "enc."), cfg.encoder
    )
    for k, v in enc_grads.items():
        grads[f"enc.{k}"] = v
    return l_int, l_slot, grads


def predict_batch(
    params: Dict[str, np.ndarray], cfg: ModelConfig, batch: Batch
) -> Tuple[np.ndarray, List[np.ndarray], np.ndarray]:
    """Deterministic decoding.

    Returns (intent id per sequence, piece-level tag ids per sequence
    [unpadded lengths], pooling weights). The structured decoder is used in
    crf mode, independent per-position argmax otherwise.
    """
    y_int, slot_scores, alpha = model_outputs(params, cfg, batch)
    intent_pred = np.argmax(y_int, axis=-1)
    lengths = batch.lengths
    piece_preds: List[np.ndarray] = []
    for i in range(slot_scores.shape[0]):
        emissions = slot_scores[i, : int(lengths[i])]
        if cfg.slot_mode == "crf":
            piece_preds.append(
                viterbi(emissions, params["crf.T"], params["crf.start"],
                        params["crf.end"])
            )
        else:
            piece_preds.append(np.argmax(emissions, axis=-1))
    return intent_pred, piece_preds, alpha


def decode_word_tags(
    seq: AlignedSequence, piece_tag_ids: np.ndarray, slot_vocab: SlotVocab
) -> List[SlotTag]:
    """Map piece-level tag id predictions back to one tag per source word."""
    from .subwords import de_align

    piece_tags = [slot_vocab.decode(int(i)) for i in piece_tag_ids]
    return de_align(seq, piece_tags)


_META_KEY = "archive_meta"


@dataclass(frozen=True)
class Checkpoint:
    """A self-contained trained model: tensors plus every vocabulary and
    resource needed to run it on raw text."""

    params: Dict[str, np.ndarray]
    config: ModelConfig
    intent_vocab: IntentVocab
    slot_vocab: SlotVocab
    piece_vocab: WordPieceVocab
    featurizer: WordFeaturizer


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    if _META_KEY in ckpt.params:
        raise ValueError(f"parameter name {_META_KEY!r} is reserved")
    meta = {
        "config": ckpt.config.to_dict(),
        "intent_labels": list(ckpt.intent_vocab.labels),
        "slot_tags": list(ckpt.slot_vocab.tags),
        "pieces": list(ckpt.piece_vocab.pieces),
        "resources": ckpt.featurizer.to_dict(),
    }
    arrays = dict(ckpt.params)
    arrays[_META_KEY] = np.frombuffer(
        json.dumps(meta).encode("utf-8"), dtype=np.uint8
    )
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> Checkpoint:
    with np.load(path) as archive:
        arrays = {k: archive[k] for k in archive.files}
    if _META_KEY not in arrays:
        raise ValueError(f"{path}: not a model archive (missing metadata)")
    meta = json.loads(arrays.pop(_META_KEY).tobytes().decode("utf-8"))
    return Checkpoint(
        params=arrays,
        config=ModelConfig.from_dict(meta["config"]),
        intent_vocab=IntentVocab(tuple(meta["intent_labels"])),
        slot_vocab=SlotVocab(tuple(meta["slot_tags"])),
        piece_vocab=WordPieceVocab(tuple(meta["pieces"])),
        featurizer=WordFeaturizer.from_dict(meta["resources"]),
    )
