"""Reference order-n path model with additive smoothing.

Stands in for a neural path generator behind the same text interface:
training counts n-grams over the head/tail-formatted token streams
(bos-padded, eos-terminated) of a path corpus, so one model serves both
plain head/tail queries and constrained will-contain queries (the wc
block only ever affects decoding, never training counts).
"""

import json
import math
import os
from collections import Counter

from .errors import EmptyCorpus, FileFormatError, UnknownConcept
from .sequence import BOS_TOKEN, EOS_TOKEN, MODE_HT, SPECIAL_TOKENS, format_sequence

MODEL_FORMAT = "bridgekit-path-ngram"
MODEL_VERSION = 1


class PathModel:
    """Immutable n-gram model over path sequence tokens, smoothed by an
    additive constant on conditional frequencies."""

    def __init__(self, order, smoothing, counts, concept_tokens, relation_tokens):
        if order < 2:
            raise ValueError("order must be >= 2")
        if smoothing <= 0:
            raise ValueError("smoothing must be > 0")
        self.order = order
        self.smoothing = smoothing
        self.counts = counts
        self.context_totals = {ctx: sum(c.values()) for ctx, c in counts.items()}
        self.concept_tokens = frozenset(concept_tokens)
        self.relation_tokens = frozenset(relation_tokens)
        self.vocabulary = frozenset(
            self.concept_tokens | self.relation_tokens | SPECIAL_TOKENS
        )
        self.vocab_size = len(self.vocabulary)

    def prob(self, context, token):
        """Smoothed P(token | context); context is the last order-1 tokens.

        The additive constant applies to conditional frequencies, not raw
        counts, so probabilities (and perplexities) are exactly invariant
        under corpus duplication. Unseen contexts are uniform.
        """
        if token not in self.vocabulary:
            raise UnknownConcept(token)
        counter = self.counts.get(context)
        if counter is None:
            return 1.0 / self.vocab_size
        eps = self.smoothing
        freq = counter.get(token, 0) / self.context_totals[context]
        return (freq + eps) / (1.0 + eps * self.vocab_size)

    def logprob(self, context, token):
        return math.log(self.prob(context, token))

    def stream(self, tokens):
        """bos-padded, eos-terminated prediction stream for `tokens`."""
        return [BOS_TOKEN] * (self.order - 1) + list(tokens) + [EOS_TOKEN]

    def sequence_logprob(self, tokens):
        """Sum of log P over every token of `tokens` plus the eos marker."""
        stream = self.stream(tokens)
        k = self.order - 1
        total = 0.0
        for i in range(k, len(stream)):
            total += self.logprob(tuple(stream[i - k : i]), stream[i])
        return total


def train_path_model(corpus, order=3, smoothing=1e-3):
    """Count n-grams over the ht-formatted sequences of a path corpus."""
    if not corpus:
        raise EmptyCorpus("no paths to train on")
    counts = {}
    concepts = set()
    relations = set()
    k = order - 1
    for path in corpus:
        concepts.update(path.nodes)
        relations.update(path.relations)
        toks = format_sequence(path, MODE_HT).split()
        stream = [BOS_TOKEN] * k + toks + [EOS_TOKEN]
        for i in range(k, len(stream)):
            ctx = tuple(stream[i - k : i])
            counter = counts.get(ctx)
            if counter is None:
                counter = counts[ctx] = Counter()
            counter[stream[i]] += 1
    return PathModel(order, smoothing, counts, concepts, relations)


def path_perplexity(model, path):
    """exp of mean negative log-probability per predicted token.

    Scores the ht-formatted sequence of `path`; the eos marker counts as
    one prediction. Raises UnknownConcept for out-of-vocabulary tokens.
    """
    for tok in list(path.nodes) + list(path.relations):
        if tok not in model.vocabulary:
            raise UnknownConcept(tok)
    toks = format_sequence(path, MODE_HT).split()
    nll = -model.sequence_logprob(toks)
    return math.exp(nll / (len(toks) + 1))


def save_model(model, path):
    """Versioned JSON serialization; round-trips counts and floats exactly."""
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "order": model.order,
        "smoothing": model.smoothing,
        "concept_tokens": sorted(model.concept_tokens),
        "relation_tokens": sorted(model.relation_tokens),
        "counts": {
            " ".join(ctx): dict(sorted(counter.items()))
            for ctx, counter in sorted(model.counts.items())
        },
    }
    data = json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as f:
        f.write(data)
    os.replace(tmp, path)


def load_model(path):
    with open(path, encoding="utf-8") as f:
        payload = json.load(f)
    if not isinstance(payload, dict) or payload.get("format") != MODEL_FORMAT:
        raise FileFormatError(f"{path}: not a path model file")
    if payload.get("version") != MODEL_VERSION:
        raise FileFormatError(f"{path}: unsupported version {payload.get('version')}")
    counts = {
        tuple(ctx.split(" ")): Counter(tokens)
        for ctx, tokens in payload["counts"].items()
    }
    return PathModel(
        payload["order"],
        payload["smoothing"],
        counts,
        payload["concept_tokens"],
        payload["relation_tokens"],
    )
