"""Adversarial training-data synthesis for a smoothness classifier, plus
the pluggable scorer contract with a lexical baseline.

Three negative mechanisms per gold (context, target, response) triple:
swap one field for a random donor's, generate a response conditioned on
a random target, or borrow a response that shares the target under a
different context. The baseline scorer makes the pipelines runnable end
to end; it claims nothing beyond being a deterministic [0, 1] signal.
"""

import random
import shlex
import subprocess
import warnings
from dataclasses import dataclass

from .errors import InsufficientDataset, NoPositives
from .seeding import derive_seed
from .textutil import content_tokens

LABEL_POSITIVE = "positive"
LABEL_NEGATIVE = "negative"

PROV_GOLD = "GOLD"
PROV_REPEAT = "REPEAT_POSITIVE"
PROV_GEN_RANDOM_TARGET = "GEN_RANDOM_TARGET"
PROV_SAME_TARGET = "SAME_TARGET_OTHER_CONTEXT"


def prov_rand_swap(which):
    return f"RAND_SWAP({which})"


@dataclass(frozen=True)
class LabeledTriple:
    context: str
    response: str
    target: str
    label: str
    provenance: str

    def to_dict(self):
        return {
            "context": self.context,
            "response": self.response,
            "target": self.target,
            "label": self.label,
            "provenance": self.provenance,
        }


@dataclass(frozen=True)
class SynthConfig:
    max_per_mechanism: int = 2
    seed: int = 0
    mechanisms: frozenset = frozenset({1, 2, 3})

    def __post_init__(self):
        if self.max_per_mechanism < 0:
            raise ValueError("max_per_mechanism must be >= 0")


def _gold_triples(dataset):
    triples = []
    for inst in dataset:
        context = inst.context if isinstance(inst.context, str) else " [sep] ".join(inst.context)
        if not inst.response:
            raise ValueError("gold instances need responses")
        triples.append((context, inst.response, inst.target))
    return triples


def synthesize_negatives(dataset, generator=None, cfg=None):
    """Build the labeled triple set: gold positives plus synthesized
    negatives, at most max_per_mechanism per mechanism per positive.

    Mechanism 2 needs `generator` (a (context, target) -> response
    callable); without one it is skipped with a warning. Output order is
    deterministic for a fixed seed: per positive, gold first, then
    mechanism 1, 2, 3 draws.
    """
    cfg = cfg or SynthConfig()
    triples = _gold_triples(dataset)
    if len(triples) < 2:
        raise InsufficientDataset(f"need >= 2 instances, got {len(triples)}")
    if 2 in cfg.mechanisms and generator is None:
        warnings.warn("mechanism 2 skipped: no response generator supplied")
    contexts = [c for c, _, _ in triples]
    responses = [r for _, r, _ in triples]
    targets = [t for _, _, t in triples]
    out = []
    for i, (c, r, t) in enumerate(triples):
        rng = random.Random(derive_seed(cfg.seed, "positive", i))
        out.append(LabeledTriple(c, r, t, LABEL_POSITIVE, PROV_GOLD))
        if 1 in cfg.mechanisms:
            seen = set()
            for _ in range(cfg.max_per_mechanism):
                which = rng.choice("ctr")
                pool = {"c": contexts, "t": targets, "r": responses}[which]
                current = {"c": c, "t": t, "r": r}[which]
                donors = [v for v in pool if v != current]
                if not donors:
                    continue
                donor = rng.choice(donors)
                if (which, donor) in seen:
                    continue
                seen.add((which, donor))
                swapped = {
                    "c": (donor, r, t),
                    "t": (c, r, donor),
                    "r": (c, donor, t),
                }[which]
                out.append(LabeledTriple(*swapped, LABEL_NEGATIVE, prov_rand_swap(which)))
        if 2 in cfg.mechanisms and generator is not None:
            other_targets = [v for v in targets if v != t]
            seen = set()
            for _ in range(cfg.max_per_mechanism):
                if not other_targets:
                    break
                t_prime = rng.choice(other_targets)
                r_prime = generator(c, t_prime)
                if not r_prime or r_prime == r or r_prime in seen:
                    continue
                seen.add(r_prime)
                out.append(LabeledTriple(c, r_prime, t, LABEL_NEGATIVE, PROV_GEN_RANDOM_TARGET))
        if 3 in cfg.mechanisms:
            donors = [
                (cj, rj)
                for j, (cj, rj, tj) in enumerate(triples)
                if j != i and tj == t and cj != c and rj != r
            ]
            picks = donors if len(donors) <= cfg.max_per_mechanism else rng.sample(
                donors, cfg.max_per_mechanism
            )
            for _, r_prime in picks[: cfg.max_per_mechanism]:
                out.append(LabeledTriple(c, r_prime, t, LABEL_NEGATIVE, PROV_SAME_TARGET))
    return out


def balance(labeled, seed=0):
    """Equalize positive and negative counts by cyclic repetition of the
    minority side (normally the positives), then shuffle with `seed`.

    Repeated positives carry the REPEAT_POSITIVE provenance with the gold
    triple unchanged; repeated negatives keep their own provenance.
    """
    positives = [x for x in labeled if x.label == LABEL_POSITIVE]
    negatives = [x for x in labeled if x.label == LABEL_NEGATIVE]
    if not positives:
        raise NoPositives("cannot balance with zero positives")
    rows = list(labeled)
    if len(positives) < len(negatives):
        for i in range(len(negatives) - len(positives)):
            src = positives[i % len(positives)]
            rows.append(
                LabeledTriple(src.context, src.response, src.target, LABEL_POSITIVE, PROV_REPEAT)
            )
    elif len(negatives) and len(negatives) < len(positives):
        for i in range(len(positives) - len(negatives)):
            rows.append(negatives[i % len(negatives)])
    random.Random(seed).shuffle(rows)
    return rows


# Copy penalties for the baseline scorer: full echo of the target zeroes
# the score, full echo of the context floors it near zero; both start
# biting above the 0.75 overlap mark used for test-set cleaning.
_COPY_KNEE = 0.75
_CONTEXT_FLOOR = 0.2


def _jaccard(a, b):
    if not a and not b:
        return 0.0
    union = a | b
    return len(a & b) / len(union) if union else 0.0


def _copy_fraction(response_toks, side_toks):
    if not side_toks:
        return 0.0
    return len(response_toks & side_toks) / len(side_toks)


def reference_scorer(context, response, target):
    """Deterministic lexical smoothness baseline in [0, 1].

    Harmonic mean of the response's content-token overlap with context
    and with target, penalized for near-verbatim copying of either side
    (target copies go to zero, context copies to a small floor). Empty
    texts score 0.
    """
    r = set(content_tokens(response))
    c = set(content_tokens(context))
    t = set(content_tokens(target))
    if not r:
        return 0.0
    ov_c = _jaccard(r, c)
    ov_t = _jaccard(r, t)
    if ov_c + ov_t == 0:
        return 0.0
    hmean = 2 * ov_c * ov_t / (ov_c + ov_t)
    copy_t = _copy_fraction(r, t)
    copy_c = _copy_fraction(r, c)
    pen_t = 1.0 if copy_t <= _COPY_KNEE else (1.0 - copy_t) / (1.0 - _COPY_KNEE)
    pen_c = (
        1.0
        if copy_c <= _COPY_KNEE
        else 1.0 - (1.0 - _CONTEXT_FLOOR) * (copy_c - _COPY_KNEE) / (1.0 - _COPY_KNEE)
    )
    return hmean * pen_t * pen_c


class ResponseGeneratorProcess:
    """Mechanism-2 response generator over a line-protocol subprocess.

    One "context<TAB>target" line in, one response line out.
    """

    def __init__(self, cmd):
        if isinstance(cmd, str):
            cmd = shlex.split(cmd)
        self.proc = subprocess.Popen(
            cmd,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )

    def __call__(self, context, target):
        for piece in (context, target):
            if "\t" in piece or "\n" in piece:
                raise ValueError("protocol fields must not contain tabs or newlines")
        self.proc.stdin.write(f"{context}\t{target}\n")
        self.proc.stdin.flush()
        line = self.proc.stdout.readline()
        if not line:
            raise RuntimeError("generator subprocess closed its output")
        return line.strip()

    def close(self):
        if self.proc.poll() is None:
            self.proc.terminate()
        for stream in (self.proc.stdin, self.proc.stdout):
            if stream and not stream.closed:
                stream.close()
        self.proc.wait(timeout=5)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False
