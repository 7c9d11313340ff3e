"""
Corpus format and evaluation measures
=====================================

Walks the tab-separated corpus format, BIO chunk extraction, and the two
slot scores: entity-level F1 (a chunk counts only when its label and both
boundaries match) and the looser per-token micro F1.
"""

import tempfile
from pathlib import Path

from jointnlu import (
    combine_intents,
    extract_chunks,
    intent_accuracy,
    lint_corpus,
    load_corpus,
    per_token_micro_f1,
    sentence_accuracy,
    slot_f1,
)
from jointnlu.tagging import parse_tags

# ------------------------------------------------------------------
# The corpus format: one "# intent=" header per utterance, then one
# word<TAB>tag line per word, utterances separated by a blank line.
# ------------------------------------------------------------------
corpus_text = """\
# intent=play_music
play\tO
purple\tB-song
rain\tI-song
by\tO
prince\tB-artist

# intent=get_weather
forecast\tO
for\tO
boston\tB-city
"""

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "demo.txt"
    path.write_text(corpus_text)
    corpus = load_corpus(path)

for utt in corpus:
    print(utt.intent, "::", " ".join(utt.words))
print("continuity problems:", lint_corpus(corpus))

# Multi-intent labels are normalized by splitting on '#', deduplicating,
# and sorting, so the combined label never depends on input order.
print("combined:", combine_intents(["atis_flight", "atis_airfare", "atis_flight"]))

# ------------------------------------------------------------------
# Chunk extraction: a B- tag opens a chunk, matching I- tags extend it.
# Spans are inclusive word indices.
# ------------------------------------------------------------------
tags = parse_tags(["O", "B-song", "I-song", "O", "B-artist"])
for chunk in extract_chunks(tags):
    print(f"chunk label={chunk.label} words {chunk.start}..{chunk.end}")

# ------------------------------------------------------------------
# Entity-level F1 vs per-token F1. The prediction below clips one chunk
# short: every one of its tokens outside the missed one is still right,
# so the token score stays high while the chunk score drops to 0.5.
# ------------------------------------------------------------------
gold = [parse_tags(["B-song", "I-song", "I-song", "O", "B-artist"])]
pred = [parse_tags(["B-song", "I-song", "O", "O", "B-artist"])]

chunk_scores = slot_f1(gold, pred)
print("chunk-level:", chunk_scores)
print("per-token micro F1:", round(per_token_micro_f1(gold, pred), 3))

# Sentence accuracy is the strictest measure: the intent and every slot
# tag must be right at once.
gold_intents, pred_intents = ["play_music"], ["play_music"]
print("intent accuracy:", intent_accuracy(gold_intents, pred_intents))
print("sentence accuracy:",
      sentence_accuracy(gold_intents, pred_intents, gold, pred))
