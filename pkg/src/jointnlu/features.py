"""Per-word casing and entity features, and the small network that embeds them.

Each word gets a 23-dim one-hot pair: 19 entity classes followed by 4 case
classes. Casing comes from a lexicon of canonical forms; entities come from a
longest-match gazetteer plus a few deterministic rules (digits, years,
airport codes). A two-layer PReLU network maps the 23-dim vector to a 32-dim
embedding that the slot classifier consumes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np


class EntityClass(IntEnum):
    PERSON = 0
    LOCATION = 1
    ORGANIZATION = 2
    MISC = 3
    CITY = 4
    STATE_OR_PROVINCE = 5
    COUNTRY = 6
    NATIONALITY = 7
    RELIGION = 8
    DATE = 9
    TIME = 10
    DURATION = 11
    MONEY = 12
    NUMBER = 13
    ORDINAL = 14
    PERCENT = 15
    OTHER = 16
    AIRPORT_CODE = 17
    NONE = 18


class CaseClass(IntEnum):
    UPPER = 0
    LOWER = 1
    INIT_UPPER = 2
    O = 3


ENTITY_DIM = len(EntityClass)
CASE_DIM = len(CaseClass)
FEATURE_DIM = ENTITY_DIM + CASE_DIM
FEATURE_HIDDEN = 32

# Annotator labels folded into OTHER rather than given their own class.
MERGED_RAW_LABELS = frozenset(
    {"TITLE", "IDEOLOGY", "CRIMINAL_CHARGE", "CAUSE_OF_DEATH"}
)

_AIRPORT_RE = re.compile(r"[A-Z]{3}")
_DIGITS_RE = re.compile(r"[0-9]+")


def canonical_form(word: str, lexicon: Mapping[str, str]) -> str:
    """Case-insensitive lexicon lookup; unknown words pass through as given."""
    if not word:
        raise ValueError("empty word")
    return lexicon.get(word.lower(), word)


def classify_case(word: str) -> CaseClass:
    if not word:
        raise ValueError("empty word")
    if word.isupper():
        return CaseClass.UPPER
    if word.islower():
        return CaseClass.LOWER
    if word[0].isupper() and (len(word) == 1 or word[1:].islower()):
        return CaseClass.INIT_UPPER
    return CaseClass.O


def truecase(word: str, lexicon: Mapping[str, str]) -> CaseClass:
    """Restore the word's canonical form and classify its capitalization."""
    return classify_case(canonical_form(word, lexicon))


def resolve_raw_label(raw: str) -> EntityClass:
    if raw in MERGED_RAW_LABELS:
        return EntityClass.OTHER
    try:
        return EntityClass[raw]
    except KeyError:
        raise ValueError(f"unknown entity label {raw!r}") from None


def _rule_entity(word: str, english_dict: frozenset[str] | set[str]) -> EntityClass:
    if _DIGITS_RE.fullmatch(word):
        if len(word) == 4 and 1900 <= int(word) <= 2099:
            return EntityClass.DATE
        return EntityClass.NUMBER
    if _AIRPORT_RE.fullmatch(word):
        # Ordinary English words that happen to be three capitals stay
        # unlabeled, so a capitalized "FOR" is not an airport.
        if word.lower() in english_dict:
            return EntityClass.NONE
        return EntityClass.AIRPORT_CODE
    return EntityClass.NONE


def annotate_entities(
    words: Sequence[str],
    gazetteer: Mapping[str, str],
    english_dict: frozenset[str] | set[str],
) -> list[EntityClass]:
    """Label each word with an entity class.

    Gazetteer phrases match longest-first on lowercased text and label every
    word they cover; remaining words fall through to the digit/year/airport
    rules, and then to NONE.
    """
    lowered = [w.lower() for w in words]
    phrase_words = {tuple(p.split()) for p in gazetteer}
    max_phrase = max((len(p) for p in phrase_words), default=0)

    out: list[EntityClass] = []
    i = 0
    while i < len(words):
        matched = 0
        for span in range(min(max_phrase, len(words) - i), 0, -1):
            cand = tuple(lowered[i:i + span])
            if cand in phrase_words:
                label = resolve_raw_label(gazetteer[" ".join(cand)])
                out.extend([label] * span)
                matched = span
                break
        if matched:
            i += matched
        else:
            out.append(_rule_entity(words[i], english_dict))
            i += 1
    return out


def encode_features(entity: EntityClass, case: CaseClass) -> np.ndarray:
    """One-hot pair: entity block first, case block after it."""
    vec = np.zeros(FEATURE_DIM)
    vec[int(entity)] = 1.0
    vec[ENTITY_DIM + int(case)] = 1.0
    return vec


@dataclass
class FeatureNetParams:
    """Two-layer embedding net: affine, PReLU, affine."""

    W_w: np.ndarray     # (23, 32), applied as x @ W_w
    b_w: np.ndarray     # (32,)
    a_prelu: np.ndarray  # scalar slope, stored 0-d for optimizer uniformity
    W_proj: np.ndarray  # (32, 32)
    b_proj: np.ndarray  # (32,)

    def __post_init__(self):
        if self.W_w.shape != (FEATURE_DIM, FEATURE_HIDDEN):
            raise ValueError(f"W_w must be ({FEATURE_DIM}, {FEATURE_HIDDEN})")
        if self.b_w.shape != (FEATURE_HIDDEN,):
            raise ValueError("b_w shape mismatch")
        if self.a_prelu.shape != ():
            raise ValueError("a_prelu must be a scalar array")
        if self.W_proj.shape != (FEATURE_HIDDEN, FEATURE_HIDDEN):
            raise ValueError("W_proj shape mismatch")
        if self.b_proj.shape != (FEATURE_HIDDEN,):
            raise ValueError("b_proj shape mismatch")
        for name, value in self.tensors().items():
            if not np.all(np.isfinite(value)):
                raise ValueError(f"non-finite entries in {name}")

    def tensors(self) -> dict[str, np.ndarray]:
        return {
            "W_w": self.W_w,
            "b_w": self.b_w,
            "a_prelu": self.a_prelu,
            "W_proj": self.W_proj,
            "b_proj": self.b_proj,
        }


def init_feature_params(rng: np.random.Generator, scale: float = 0.02) -> FeatureNetParams:
    return FeatureNetParams(
        W_w=rng.normal(0.0, scale, (FEATURE_DIM, FEATURE_HIDDEN)),
        b_w=np.zeros(FEATURE_HIDDEN),
        a_prelu=np.array(0.25),
        W_proj=rng.normal(0.0, scale, (FEATURE_HIDDEN, FEATURE_HIDDEN)),
        b_proj=np.zeros(FEATURE_HIDDEN),
    )


def feature_forward(
    x: np.ndarray, params: FeatureNetParams, want_cache: bool = False
):
    """Embed feature vectors: s = x W_w + b_w, h = PReLU(s), out = h W_proj + b_proj.

    Accepts a single 23-vector or any (..., 23) batch; the output replaces
    the last axis with 32. With want_cache=True also returns the
    intermediates needed by feature_backward.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != FEATURE_DIM:
        raise ValueError(f"last axis must be {FEATURE_DIM}, got {x.shape}")
    s = x @ params.W_w + params.b_w
    a = float(params.a_prelu)
    h = np.maximum(s, 0.0) + a * np.minimum(s, 0.0)
    out = h @ params.W_proj + params.b_proj
    if want_cache:
        return out, (x, s, h)
    return out


def feature_backward(
    d_out: np.ndarray, cache, params: FeatureNetParams
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Backprop through feature_forward.

    Returns (d_x, grads) where grads is keyed like FeatureNetParams.tensors().
    """
    x, s, h = cache
    d_out = np.asarray(d_out, dtype=np.float64)
    if d_out.shape != h.shape[:-1] + (FEATURE_HIDDEN,):
        raise ValueError("upstream gradient shape mismatch")

    flat_dout = d_out.reshape(-1, FEATURE_HIDDEN)
    flat_h = h.reshape(-1, FEATURE_HIDDEN)
    d_W_proj = flat_h.T @ flat_dout
    d_b_proj = flat_dout.sum(axis=0)
    d_h = d_out @ params.W_proj.T

    a = float(params.a_prelu)
    pos = s > 0
    d_s = d_h * np.where(pos, 1.0, a)
    d_a = np.array(np.sum(d_h * np.minimum(s, 0.0)))

    flat_x = x.reshape(-1, FEATURE_DIM)
    flat_ds = d_s.reshape(-1, FEATURE_HIDDEN)
    d_W_w = flat_x.T @ flat_ds
    d_b_w = flat_ds.sum(axis=0)
    d_x = d_s @ params.W_w.T

    grads = {
        "W_w": d_W_w,
        "b_w": d_b_w,
        "a_prelu": d_a,
        "W_proj": d_W_proj,
        "b_proj": d_b_proj,
    }
    return d_x, grads


def load_gazetteer(path: str | Path) -> dict[str, str]:
    """Read tab-separated "phrase<TAB>RAW_LABEL" lines into a phrase map."""
    out: dict[str, str] = {}
    for ln, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
            raise ValueError(f"{path}:{ln}: expected 'phrase<TAB>LABEL', got {line!r}")
        phrase, raw = parts[0].strip().lower(), parts[1].strip()
        resolve_raw_label(raw)  # fail fast on labels outside the inventory
        out[phrase] = raw
    return out


def load_lexicon(path: str | Path) -> dict[str, str]:
    """Read canonical cased forms, one per line, keyed by lowercase."""
    out: dict[str, str] = {}
    for ln, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        form = line.strip()
        if not form:
            continue
        out[form.lower()] = form
    return out


def load_english_dict(path: str | Path) -> frozenset[str]:
    words = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        w = line.strip()
        if w:
            words.add(w.lower())
    return frozenset(words)


@dataclass(frozen=True)
class WordFeaturizer:
    """Bundles the three annotation resources behind one featurize call."""

    lexicon: Mapping[str, str]
    gazetteer: Mapping[str, str]
    english_dict: frozenset[str]

    @classmethod
    def from_files(
        cls,
        lexicon_path: str | Path,
        gazetteer_path: str | Path,
        english_dict_path: str | Path,
    ) -> "WordFeaturizer":
        return cls(
            lexicon=load_lexicon(lexicon_path),
            gazetteer=load_gazetteer(gazetteer_path),
            english_dict=load_english_dict(english_dict_path),
        )

    def annotate(
        self, words: Sequence[str]
    ) -> tuple[list[EntityClass], list[CaseClass], list[str]]:
        canonical = [canonical_form(w, self.lexicon) for w in words]
        cases = [classify_case(c) for c in canonical]
        entities = annotate_entities(canonical, self.gazetteer, self.english_dict)
        return entities, cases, canonical

    def featurize(self, words: Sequence[str]) -> np.ndarray:
        """Per-word 23-dim feature rows, shape (len(words), 23)."""
        if not words:
            return np.zeros((0, FEATURE_DIM))
        entities, cases, _ = self.annotate(words)
        return np.stack([encode_features(e, c) for e, c in zip(entities, cases)])

    def to_dict(self) -> dict:
        return {
            "lexicon": dict(self.lexicon),
            "gazetteer": dict(self.gazetteer),
            "english_dict": sorted(self.english_dict),
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "WordFeaturizer":
        return cls(
            lexicon=dict(payload["lexicon"]),
            gazetteer=dict(payload["gazetteer"]),
            english_dict=frozenset(payload["english_dict"]),
        )
