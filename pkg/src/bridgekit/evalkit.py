"""Reference-based metrics, rank correlation, the metric-bias probe, and
test-set copy cleaning.

BLEU is corpus-level BLEU-4 from the original definition (modified
n-gram precision, closest-reference brevity penalty, no smoothing);
ROUGE-L is the max-over-references LCS F1. Both lowercase and split on
whitespace.
"""

import math
from collections import Counter
from dataclasses import dataclass, field

from .errors import (
    DegenerateInput,
    EmptyCorpus,
    InsufficientReferences,
    LengthMismatch,
)
from .textutil import content_tokens, tokenize


@dataclass
class EvalInstance:
    context: str
    target: str
    hypothesis: str
    references: list = field(default_factory=list)

    def __post_init__(self):
        if not self.references:
            raise ValueError("references must be non-empty")


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(corpus, max_order=4):
    """Corpus-level BLEU over (hypothesis, references) pairs.

    Geometric mean of modified n-gram precisions (n = 1..4) times the
    brevity penalty with closest-reference lengths. A zero precision
    yields 0.0 (no smoothing); an order with no candidate n-grams
    anywhere (ultra-short corpora) is treated as neutral so identical
    texts still score 1.0.
    """
    corpus = list(corpus)
    if not corpus:
        raise EmptyCorpus("bleu needs at least one instance")
    clipped = [0] * max_order
    totals = [0] * max_order
    hyp_len = 0
    ref_len = 0
    for hypothesis, references in corpus:
        hyp_toks = tokenize(hypothesis)
        ref_toks = [tokenize(r) for r in references]
        hyp_len += len(hyp_toks)
        ref_len += min((abs(len(r) - len(hyp_toks)), len(r)) for r in ref_toks)[1]
        for n in range(1, max_order + 1):
            hyp_ngrams = _ngrams(hyp_toks, n)
            if not hyp_ngrams:
                continue
            max_ref = Counter()
            for r in ref_toks:
                for gram, count in _ngrams(r, n).items():
                    if count > max_ref[gram]:
                        max_ref[gram] = count
            totals[n - 1] += sum(hyp_ngrams.values())
            clipped[n - 1] += sum(min(c, max_ref[g]) for g, c in hyp_ngrams.items())
    log_precision = 0.0
    for n in range(max_order):
        if totals[n] == 0:
            continue
        if clipped[n] == 0:
            return 0.0
        log_precision += math.log(clipped[n] / totals[n]) / max_order
    if hyp_len == 0:
        return 0.0
    bp = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / hyp_len)
    return bp * math.exp(log_precision)


def _lcs_length(a, b):
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(hypothesis, references):
    """Max over references of the LCS-based F1 (beta = 1)."""
    if not references:
        raise ValueError("references must be non-empty")
    hyp = tokenize(hypothesis)
    best = 0.0
    for reference in references:
        ref = tokenize(reference)
        if not hyp or not ref:
            continue
        lcs = _lcs_length(hyp, ref)
        if lcs == 0:
            continue
        p = lcs / len(hyp)
        r = lcs / len(ref)
        best = max(best, 2 * p * r / (p + r))
    return best


def _fractional_ranks(xs):
    order = sorted(range(len(xs)), key=lambda i: xs[i])
    ranks = [0.0] * len(xs)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and xs[order[j + 1]] == xs[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def spearman(xs, ys):
    """Spearman rank correlation with average-rank tie handling."""
    if len(xs) != len(ys):
        raise LengthMismatch(f"{len(xs)} vs {len(ys)}")
    if len(xs) < 3:
        raise DegenerateInput("need at least 3 points")
    if len(set(xs)) == 1 or len(set(ys)) == 1:
        raise DegenerateInput("constant series has no rank order")
    rx = _fractional_ranks(list(xs))
    ry = _fractional_ranks(list(ys))
    n = len(rx)
    mx = sum(rx) / n
    my = sum(ry) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    vx = sum((a - mx) ** 2 for a in rx)
    vy = sum((b - my) ** 2 for b in ry)
    # One sqrt of the product keeps perfectly monotone inputs at exactly 1.
    return cov / math.sqrt(vx * vy)


ROW_TARGET = "target_as_response"
ROW_CONTEXT = "context_as_response"
ROW_REFERENCE = "reference_as_response"


@dataclass
class BiasProbeReport:
    scores: dict
    degenerate_targets: int = 0
    degenerate_contexts: int = 0

    @property
    def flagged(self):
        return self.degenerate_targets + self.degenerate_contexts > 0


def bias_probe(dataset, metric):
    """Score target/context/held-out-reference substituted as the response.

    `metric` is any corpus-level callable over (hypothesis, references)
    pairs. The reference row holds out each instance's first reference
    and scores it against the rest (needs >= 2 references). Instances
    whose target or context appears verbatim among the references are
    counted as degenerate and flagged.
    """
    dataset = list(dataset)
    if not dataset:
        raise EmptyCorpus("bias probe needs instances")
    for inst in dataset:
        if len(inst.references) < 2:
            raise InsufficientReferences(
                "reference-as-response needs >= 2 references per instance"
            )
    scores = {
        ROW_TARGET: metric([(inst.target, inst.references) for inst in dataset]),
        ROW_CONTEXT: metric([(inst.context, inst.references) for inst in dataset]),
        ROW_REFERENCE: metric(
            [(inst.references[0], inst.references[1:]) for inst in dataset]
        ),
    }
    return BiasProbeReport(
        scores,
        degenerate_targets=sum(inst.target in inst.references for inst in dataset),
        degenerate_contexts=sum(inst.context in inst.references for inst in dataset),
    )


def response_target_overlap(response, target, denominator="target"):
    """Content-token multiset overlap between response and target.

    The intersection is normalized by the target length (default), the
    response length, or the multiset-union size.
    """
    r = Counter(content_tokens(response))
    t = Counter(content_tokens(target))
    shared = sum((r & t).values())
    if denominator == "target":
        base = sum(t.values())
    elif denominator == "response":
        base = sum(r.values())
    elif denominator == "union":
        base = sum((r | t).values())
    else:
        raise ValueError(f"unknown denominator: {denominator}")
    return shared / base if base else 0.0


def clean_test_set(instances, overlap_threshold=0.75, denominator="target"):
    """Drop instances whose response copies the target (overlap > threshold)."""
    kept = []
    for inst in instances:
        if inst.response is None:
            raise ValueError("clean_test_set needs responses")
        if response_target_overlap(inst.response, inst.target, denominator) <= overlap_threshold:
            kept.append(inst)
    return kept
