"""CRG data preparation: pair selection, path generation, filtering,
and conditioning-sequence assembly.

Training uses will-contain generation with the gold response's entities
(falling back to each singleton when full coverage is unsatisfiable) and
all three filters; inference uses plain head/tail generation for the
single best pair, perplexity and repetition filters, and a seeded
uniform pick from the survivors.
"""

import json
import multiprocessing
import os
import random
from dataclasses import dataclass, field, replace

from .decode import DecodeConfig
from .entities import (
    PHASE_INFER,
    PHASE_TRAIN,
    extract_entities,
    lemmatize_verb,
    lexicon_tag,
    parse_tagged,
    score_pairs,
    select_pairs,
)
from .errors import BridgekitError, NoEntities, NoPathSurvived, UnknownConcept
from .render import render_text
from .seeding import derive_seed

TARGET_MARK = "[target]"
CONTEXT_MARK = "[context]"
RESPONSE_MARK = "[response]"
CONTEXT_JOIN = " [sep] "


@dataclass
class TransitionInstance:
    """One (context, target, response) unit; response is training-only."""

    context: list
    target: str
    response: str = None

    def __post_init__(self):
        if not self.context:
            raise ValueError("context must be non-empty")
        if not self.target:
            raise ValueError("target must be non-empty")


@dataclass(frozen=True)
class PipelineConfig:
    q: int = 10  # paths generated per entity pair
    D: int = 2  # train-phase pair budget
    perplexity_factor: float = 2.0
    seed: int = 0
    decode: DecodeConfig = field(default_factory=DecodeConfig)
    # When set, the perplexity mean excludes repetition-filtered paths
    # before the cutoff is applied (filter-order variant).
    mean_excludes_repeats: bool = False
    lemma_match_gold: bool = False

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if self.perplexity_factor <= 1:
            raise ValueError("perplexity_factor must be > 1")


@dataclass
class ScoredPathSet:
    instance: TransitionInstance
    paths: list  # (KnowledgePath, perplexity) pairs
    phase: str
    skip_reason: str = ""
    pair_failures: list = field(default_factory=list)


def _lemma_signature(concept_id):
    return "_".join(lemmatize_verb(w) for w in concept_id.split("_"))


def filter_paths(
    candidates,
    gold_entities=None,
    factor=2.0,
    ppl_mean=None,
    mean_excludes_repeats=False,
    lemma_match=False,
):
    """Apply the perplexity cutoff, repetition, and gold-containment filters.

    `candidates` is one entity pair's list of (path, perplexity). The
    cutoff is factor x the pair's mean perplexity; pass `ppl_mean` to pin
    the pair mean explicitly (re-filtering a survivor set with the pinned
    mean is then a no-op). Gold containment compares normalized ids, or
    lemma signatures when `lemma_match` is set. Order is preserved.
    """
    candidates = list(candidates)
    if not candidates:
        return []
    if ppl_mean is None:
        pool = candidates
        if mean_excludes_repeats:
            pool = [c for c in candidates if not c[0].has_repeated_node()] or candidates
        ppl_mean = sum(p for _, p in pool) / len(pool)
    cutoff = factor * ppl_mean
    key = _lemma_signature if lemma_match else (lambda x: x)
    gold = None if gold_entities is None else {key(g) for g in gold_entities}
    kept = []
    for path, ppl in candidates:
        if ppl > cutoff:
            continue
        if path.has_repeated_node():
            continue
        if gold is not None and not {key(n) for n in path.intermediates} <= gold:
            continue
        kept.append((path, ppl))
    return kept


def _tag(text, tagger):
    return (tagger or lexicon_tag)(text)


def instance_entity_sets(instance, tagger=None, tagged=None, kg_vocab=None, stop_entities=None):
    """Extract (E_h, E_t, E_r) entity sets from an instance.

    `tagged` optionally supplies pre-tagged text per side: context is a
    list of "surface/TAG" lines, target/response one line each.
    """
    tagged = tagged or {}
    extract_kwargs = {} if stop_entities is None else {"stop_entities": stop_entities}

    def side_sentences(side, texts):
        pre = tagged.get(side)
        if pre is not None:
            lines = pre if isinstance(pre, list) else [pre]
            return [parse_tagged(line) for line in lines]
        return [_tag(text, tagger) for text in texts]

    e_h = []
    for sent in side_sentences("context", instance.context):
        for e in extract_entities(sent, kg_vocab, source="context", **extract_kwargs):
            if e not in e_h:
                e_h.append(e)
    e_t = list(
        extract_entities(
            side_sentences("target", [instance.target])[0], kg_vocab, source="target", **extract_kwargs
        )
    )
    e_r = []
    if instance.response:
        e_r = list(
            extract_entities(
                side_sentences("response", [instance.response])[0],
                kg_vocab,
                source="response",
                **extract_kwargs,
            )
        )
    return e_h, e_t, e_r


def _generate_with_relaxation(generator, head, tail, required, q, seed):
    """Full required set first, then each singleton before giving up."""
    try:
        return generator.generate(head, tail, required=required, num_samples=q, seed=seed)
    except (BridgekitError, ValueError):
        if not required:
            raise
    paths = []
    seen = set()
    for i, entity in enumerate(required):
        try:
            got = generator.generate(
                head, tail, required=[entity], num_samples=q, seed=derive_seed(seed, "relax", i)
            )
        except (BridgekitError, ValueError):
            continue
        for p in got:
            if p not in seen:
                seen.add(p)
                paths.append(p)
    return paths[:q]


def build_training_paths(instance, generator, cfg, idf, tagger=None, tagged=None, stop_entities=None):
    """Generate and filter gold-aligned paths for one training instance."""
    if not instance.response:
        raise ValueError("training instances need a response")
    e_h, e_t, e_r = instance_entity_sets(
        instance, tagger, tagged, generator.concept_vocab, stop_entities
    )
    if not e_h:
        raise NoEntities("context")
    if not e_t:
        raise NoEntities("target")
    ranked = score_pairs(e_h, e_t, idf)
    pairs = select_pairs(ranked, PHASE_TRAIN, cfg.D)
    survivors = []
    failures = []
    for pair_idx, (head, tail) in enumerate(pairs):
        try:
            cands = _generate_with_relaxation(
                generator, head, tail, e_r, cfg.q, derive_seed(cfg.seed, "pair", pair_idx)
            )
        except BridgekitError as exc:
            failures.append(f"pair ({head}, {tail}): {exc}")
            continue
        if not cands:
            failures.append(f"pair ({head}, {tail}): no candidates")
            continue
        scored = [(p, generator.perplexity(p)) for p in cands]
        survivors.extend(
            filter_paths(
                scored,
                gold_entities=e_r,
                factor=cfg.perplexity_factor,
                mean_excludes_repeats=cfg.mean_excludes_repeats,
                lemma_match=cfg.lemma_match_gold,
            )
        )
    reason = "" if survivors else "no path survived filtering"
    return ScoredPathSet(instance, survivors, PHASE_TRAIN, reason, failures)


def build_inference_path(
    context, target, generator, cfg, idf, templates=None, tagger=None, tagged=None, stop_entities=None
):
    """Pick one filtered path for an inference instance; returns
    (path, rendered text)."""
    instance = TransitionInstance(list(context), target)
    e_h, e_t, _ = instance_entity_sets(
        instance, tagger, tagged, generator.concept_vocab, stop_entities
    )
    if not e_h:
        raise NoEntities("context")
    if not e_t:
        raise NoEntities("target")
    ranked = score_pairs(e_h, e_t, idf)
    (head, tail), = select_pairs(ranked, PHASE_INFER)
    try:
        cands = generator.generate(
            head, tail, required=[], num_samples=cfg.q, seed=derive_seed(cfg.seed, "generate")
        )
    except UnknownConcept as exc:
        raise NoPathSurvived(f"pair ({head}, {tail}) not generable: {exc}") from exc
    scored = [(p, generator.perplexity(p)) for p in cands]
    survivors = filter_paths(
        scored, factor=cfg.perplexity_factor, mean_excludes_repeats=cfg.mean_excludes_repeats
    )
    if not survivors:
        raise NoPathSurvived(f"all {len(scored)} candidates filtered out")
    rng = random.Random(derive_seed(cfg.seed, "choose"))
    path, _ = survivors[rng.randrange(len(survivors))]
    return path, render_text(path, templates)


def assemble_crg_sequence(path_text, target, context, response=None):
    """Concatenate the conditioning segments in their canonical order."""
    joined = CONTEXT_JOIN.join(context)
    parts = f"{path_text} {TARGET_MARK} {target} {CONTEXT_MARK} {joined}"
    if response:
        parts += f" {RESPONSE_MARK} {response}"
    return parts


def instance_from_record(record):
    context = record["context"]
    if isinstance(context, str):
        context = [context]
    return TransitionInstance(list(context), record["target"], record.get("response"))


def _tagged_from_record(record):
    tagged = {}
    for side in ("context", "target", "response"):
        key = f"{side}_tagged"
        if key in record:
            tagged[side] = record[key]
    return tagged or None


def _process_record(index, record, phase, generator, cfg, idf, templates, tagger, stop_entities):
    """One record -> ("out", rows) or ("skip", row)."""
    try:
        instance = instance_from_record(record)
    except (KeyError, ValueError) as exc:
        return "skip", {"index": index, "reason": f"bad record: {exc}"}
    tagged = _tagged_from_record(record)
    inst_cfg = _reseed(cfg, derive_seed(cfg.seed, "instance", index))
    base = {"index": index, "context": instance.context, "target": instance.target}
    if "id" in record:
        base["id"] = record["id"]
    try:
        if phase == PHASE_TRAIN:
            result = build_training_paths(
                instance, generator, inst_cfg, idf, tagger, tagged, stop_entities
            )
            if not result.paths:
                return "skip", {"index": index, "reason": result.skip_reason or "empty path set"}
            rows = []
            for path, _ in result.paths:
                text = render_text(path, templates)
                rows.append(
                    dict(
                        base,
                        response=instance.response,
                        path=path.line(),
                        path_text=text,
                        crg_sequence=assemble_crg_sequence(
                            text, instance.target, instance.context, instance.response
                        ),
                    )
                )
            return "out", rows
        path, text = build_inference_path(
            instance.context,
            instance.target,
            generator,
            inst_cfg,
            idf,
            templates,
            tagger,
            tagged,
            stop_entities,
        )
        row = dict(
            base,
            path=path.line(),
            path_text=text,
            crg_sequence=assemble_crg_sequence(text, instance.target, instance.context),
        )
        return "out", [row]
    except BridgekitError as exc:
        return "skip", {"index": index, "reason": str(exc)}


# Fork-inherited batch state for pool workers (same pattern as sampler).
_POOL_STATE = None


def _pool_record(args):
    index, record = args
    return _process_record(index, record, *_POOL_STATE)


def run_prep_crg(
    records, phase, generator, cfg, idf, templates=None, tagger=None, stop_entities=None, workers=1
):
    """Batch CRG preparation over instance records.

    Returns (output records, skip records). Per-instance seeds derive
    from the batch seed and the record index, so output is identical for
    any worker count; workers only run instances in parallel. Generators
    holding a live subprocess cannot be shared across forks and force
    serial execution.
    """
    shared = (phase, generator, cfg, idf, templates, tagger, stop_entities)
    jobs = list(enumerate(records))
    can_fork = (
        workers > 1
        and getattr(generator, "proc", None) is None
        and getattr(tagger, "proc", None) is None
        and "fork" in multiprocessing.get_all_start_methods()
    )
    if can_fork:
        global _POOL_STATE
        _POOL_STATE = shared
        try:
            ctx = multiprocessing.get_context("fork")
            with ctx.Pool(workers) as pool:
                results = pool.map(_pool_record, jobs, chunksize=max(1, len(jobs) // (workers * 4)))
        finally:
            _POOL_STATE = None
    else:
        results = [_process_record(i, r, *shared) for i, r in jobs]
    outputs = []
    skips = []
    for kind, payload in results:
        if kind == "out":
            outputs.extend(payload)
        else:
            skips.append(payload)
    return outputs, skips


def _reseed(cfg, seed):
    return replace(cfg, seed=seed)


def read_jsonl(path):
    rows = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                rows.append(json.loads(line))
    return rows


def write_jsonl(rows, path):
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True, ensure_ascii=False))
            f.write("\n")
    os.replace(tmp, path)
