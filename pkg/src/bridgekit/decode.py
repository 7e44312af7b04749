"""Constrained path generation over a path model.

Beam search with a constraint-coverage state: every hypothesis tracks
the required entities not yet emitted, completes only when it emits the
requested tail with full coverage, and is pruned once the remaining
token budget cannot fit the outstanding entities. Temperature and
nucleus truncation restrict which continuations a hypothesis may expand
(seeded weighted sampling without replacement when the nucleus is wider
than the beam); hypotheses are ranked by raw model log-probability, so
with top_p=1 and a wide beam the search is exhaustive and its top result
equals the model-probability argmax over valid sequences.

The reference model scores full vocabularies per step, which is intended
for desk-scale graphs; a neural generator plugs in through the external
line protocol for anything larger.
"""

import math
import random
import shlex
import subprocess
from dataclasses import dataclass, replace

from .errors import BridgekitError, NoPathFound, UnknownConcept
from .ngram import path_perplexity
from .paths import KnowledgePath
from .sequence import EOS_TOKEN, SEP_TOKEN, TARGET_TOKEN, parse_sequence


@dataclass(frozen=True)
class DecodeConfig:
    temperature: float = 0.7
    top_p: float = 0.9
    beam_width: int = 8
    max_len: int = 13  # body token budget; 2*K+1 tokens for a K-hop path
    num_samples: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")


def _expansion(model, ctx, allowed_sorted, cfg, rng, must_include=()):
    """Candidate (token, raw logprob) pairs for one hypothesis expansion.

    Tokens in `must_include` (outstanding constraints and the tail) stay
    expandable even when temperature/nucleus truncation would drop them;
    their scores remain raw model log-probabilities, so they only win by
    actually being probable.
    """
    probs = [model.prob(ctx, tok) for tok in allowed_sorted]
    if cfg.temperature == 1.0:
        weights = probs
    else:
        inv_t = 1.0 / cfg.temperature
        weights = [p**inv_t for p in probs]
    total = sum(weights)
    order = sorted(range(len(allowed_sorted)), key=lambda i: (-weights[i], allowed_sorted[i]))
    nucleus = []
    acc = 0.0
    threshold = cfg.top_p * total
    for i in order:
        nucleus.append(i)
        acc += weights[i]
        if acc >= threshold - 1e-12:
            break
    if len(nucleus) > cfg.beam_width:
        # Weighted sampling without replacement (largest log(u)/w keys).
        keyed = []
        for i in sorted(nucleus):
            u = rng.random()
            keyed.append((math.log(u) / weights[i] if weights[i] > 0 else -math.inf, i))
        keyed.sort(key=lambda kv: (-kv[0], allowed_sorted[kv[1]]))
        nucleus = [i for _, i in keyed[: cfg.beam_width]]
    if must_include:
        chosen = {allowed_sorted[i] for i in nucleus}
        index = {tok: i for i, tok in enumerate(allowed_sorted)}
        for tok in must_include:
            if tok not in chosen and tok in index:
                nucleus.append(index[tok])
    return [(allowed_sorted[i], math.log(probs[i])) for i in nucleus]


def generate_path(model, head, tail, required=(), decode=None):
    """Generate up to num_samples distinct paths from head to tail.

    Every returned path starts at `head`, ends at `tail`, and contains
    each entity in `required` as a node; paths need not exist in the
    source graph. Results are sorted by model probability. Raises
    UnknownConcept for out-of-vocabulary inputs and NoPathFound when the
    search exhausts its beam within max_len.
    """
    cfg = decode or DecodeConfig()
    for tok in [head, tail, *required]:
        if tok not in model.concept_tokens:
            raise UnknownConcept(tok)
    rng = random.Random(cfg.seed)
    k = model.order - 1
    prompt = model.stream([TARGET_TOKEN, tail, SEP_TOKEN])[:-1]  # drop eos
    concepts = sorted(model.concept_tokens)
    relations = sorted(model.relation_tokens)

    def context_for(body):
        stream = prompt + list(body)
        return tuple(stream[-k:])

    start_remaining = frozenset(required) - {head}
    live = [(0.0, (head,), start_remaining)]
    completed = {}
    while live:
        # Relation slot.
        rel_children = []
        for score, body, remaining in live:
            if len(body) + 2 > cfg.max_len:
                continue
            ctx = context_for(body)
            for tok, lp in _expansion(model, ctx, relations, cfg, rng):
                rel_children.append((score + lp, body + (tok,), remaining))
        rel_children.sort(key=lambda h: (-h[0], h[1]))
        rel_children = rel_children[: cfg.beam_width]
        # Concept slot.
        children = []
        for score, body, remaining in rel_children:
            ctx = context_for(body)
            forced = sorted(remaining) + [tail]
            for tok, lp in _expansion(model, ctx, concepts, cfg, rng, must_include=forced):
                new_body = body + (tok,)
                new_remaining = remaining - {tok} if tok in remaining else remaining
                new_score = score + lp
                if tok == tail and not new_remaining:
                    eos_lp = model.logprob(context_for(new_body), EOS_TOKEN)
                    prev = completed.get(new_body)
                    if prev is None or new_score + eos_lp > prev:
                        completed[new_body] = new_score + eos_lp
                # Keep the hypothesis alive only if the tail plus any
                # outstanding entities still fit in the token budget.
                needed = len(new_remaining - {tail}) + 1
                if (cfg.max_len - len(new_body)) // 2 >= needed:
                    children.append((new_score, new_body, new_remaining))
        children.sort(key=lambda h: (-h[0], h[1]))
        live = children[: cfg.beam_width]
    if not completed:
        raise NoPathFound(f"no path from {head} to {tail} within {cfg.max_len} tokens")
    ranked = sorted(completed.items(), key=lambda kv: (-kv[1], kv[0]))
    paths = []
    for body, _ in ranked[: cfg.num_samples]:
        paths.append(KnowledgePath(tuple(body[0::2]), tuple(body[1::2])))
    return paths


class ReferencePathGenerator:
    """The in-process generator contract backed by the reference model."""

    def __init__(self, model, decode=None):
        self.model = model
        self.decode = decode or DecodeConfig()

    @property
    def concept_vocab(self):
        return self.model.concept_tokens

    def generate(self, head, tail, required=(), num_samples=None, seed=None):
        cfg = self.decode
        if num_samples is not None:
            cfg = replace(cfg, num_samples=num_samples)
        if seed is not None:
            cfg = replace(cfg, seed=seed)
        return generate_path(self.model, head, tail, required, cfg)

    def perplexity(self, path):
        return path_perplexity(self.model, path)


class ExternalPathGenerator:
    """Generator contract over a line-protocol subprocess.

    Query lines are "HT<TAB>head<TAB>tail" or "WC<TAB>head<TAB>tail<TAB>
    e1,e2" (entities comma-joined); the subprocess answers one path
    sequence per query line. Lines that fail to parse or violate the
    query constraints are skipped. Perplexities come from an optional
    reference model and default to a constant (which neutralizes the
    perplexity filter downstream).
    """

    def __init__(self, cmd, perplexity_model=None):
        if isinstance(cmd, str):
            cmd = shlex.split(cmd)
        self.proc = subprocess.Popen(
            cmd,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self.perplexity_model = perplexity_model

    @property
    def concept_vocab(self):
        if self.perplexity_model is not None:
            return self.perplexity_model.concept_tokens
        return None

    def generate(self, head, tail, required=(), num_samples=1, seed=None):
        required = list(required)
        if required:
            query = f"WC\t{head}\t{tail}\t{','.join(required)}"
        else:
            query = f"HT\t{head}\t{tail}"
        paths = []
        seen = set()
        for _ in range(num_samples):
            self.proc.stdin.write(query + "\n")
            self.proc.stdin.flush()
            line = self.proc.stdout.readline()
            if not line:
                break
            try:
                path = parse_sequence(line.strip())
            except BridgekitError:
                continue
            if path.head != head or path.tail != tail:
                continue
            if required and not set(required) <= set(path.nodes):
                continue
            if path not in seen:
                seen.add(path)
                paths.append(path)
        if not paths:
            raise NoPathFound(f"external generator produced no valid path for {query!r}")
        return paths

    def perplexity(self, path):
        if self.perplexity_model is not None:
            return path_perplexity(self.perplexity_model, path)
        return 1.0

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
