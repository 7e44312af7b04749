"""Entity extraction from tagged sentences and IDF pair scoring.

Chunking runs two tag-grammar patterns over Penn-Treebank tags: noun
phrases {<NN.*|JJ>*<NN.*>} first, then verb phrases
{<RB.?>*<VB.?>*<JJ>*<VB.?>+<VB>?} over the uncovered gaps, so chunks
never overlap. Chunks are made concise (function words dropped, verbs
lemmatized) and, when a concept vocabulary is supplied, snapped to the
surface variant that actually exists as a node, including merging
adjacent chunks across function-word gaps ("watching the star" ->
watch_stars).
"""

import math
import os
import re
from dataclasses import dataclass, field

from .errors import EmptyEntitySet, NoPairs
from .textutil import normalize_concept

PHASE_TRAIN = "train"
PHASE_INFER = "infer"

NP_PATTERN = "<NN.*|JJ>*<NN.*>"
VP_PATTERN = "<RB.?>*<VB.?>*<JJ>*<VB.?>+<VB>?"

DEFAULT_STOP_ENTITIES = frozenset({"today", "enough"})

# Tags dropped inside chunks and allowed in the gap between two chunks
# that merge into one vocabulary concept.
_DROP_TAGS = frozenset({"DT", "PDT", "WDT", "PRP", "PRP$", "POS", "EX"})
_GAP_TAGS = frozenset({"DT", "PDT", "PRP", "PRP$", "POS", "IN", "TO"})

_TAG_ATOM = re.compile(r"<([^>]+)>([*+?]?)")

_VOWELS = "aeiou"

_IRREGULAR_VERBS = {
    "is": "be",
    "am": "be",
    "are": "be",
    "was": "be",
    "were": "be",
    "been": "be",
    "being": "be",
    "has": "have",
    "had": "have",
    "did": "do",
    "done": "do",
    "went": "go",
    "gone": "go",
    "goes": "go",
    "ran": "run",
    "ate": "eat",
    "saw": "see",
    "made": "make",
    "got": "get",
    "took": "take",
    "came": "come",
    "said": "say",
    "told": "tell",
    "gave": "give",
    "found": "find",
    "knew": "know",
    "thought": "think",
    "bought": "buy",
    "felt": "feel",
    "left": "leave",
    "kept": "keep",
    "met": "meet",
}


def lemmatize_verb(word):
    """Rule-based verb lemmatizer: suffix stripping plus a small
    irregular list. Exactness only matters through the vocabulary
    preference step, so the rules stay deliberately simple."""
    w = word.lower()
    if w in _IRREGULAR_VERBS:
        return _IRREGULAR_VERBS[w]
    if len(w) > 4 and w.endswith("ies"):
        return w[:-3] + "y"
    if len(w) > 4 and w.endswith(("ses", "xes", "zes", "ches", "shes", "oes")):
        return w[:-2]
    if len(w) > 3 and w.endswith("s") and not w.endswith("ss"):
        return w[:-1]
    for suffix in ("ing", "ed"):
        if len(w) > len(suffix) + 2 and w.endswith(suffix):
            stem = w[: -len(suffix)]
            if len(stem) >= 3 and stem[-1] == stem[-2] and stem[-1] not in _VOWELS + "ls":
                return stem[:-1]
            if (
                len(stem) >= 3
                and stem[-1] not in _VOWELS + "wxy"
                and stem[-2] in _VOWELS
                and stem[-3] not in _VOWELS
            ):
                return stem + "e"
            return stem
    return w


def _plural(word):
    if re.search(r"(s|x|z|ch|sh)$", word):
        return word + "es"
    if len(word) > 2 and word.endswith("y") and word[-2] not in _VOWELS:
        return word[:-1] + "ies"
    return word + "s"


def _singular(word):
    if len(word) > 3 and word.endswith("ies"):
        return word[:-3] + "y"
    if len(word) > 3 and word.endswith("es") and re.search(r"(s|x|z|ch|sh)es$", word):
        return word[:-2]
    if len(word) > 2 and word.endswith("s") and not word.endswith("ss"):
        return word[:-1]
    return word


def _variants(tokens):
    """Candidate concept ids for a token phrase, most literal first."""
    base = "_".join(tokens)
    forms = [base]
    last = tokens[-1]
    for alt in (_plural(last), _singular(last)):
        if alt != last:
            forms.append("_".join(tokens[:-1] + [alt]))
    seen = []
    for f in forms:
        if f and f not in seen:
            seen.append(f)
    return seen


def compile_tag_pattern(pattern):
    """Compile an angle-bracket tag pattern to a regex over "(TAG)(TAG)..."
    encodings. "." inside a tag expression matches within one tag only."""
    pieces = []
    last_end = 0
    for m in _TAG_ATOM.finditer(pattern):
        if pattern[last_end : m.start()].strip():
            raise ValueError(f"unsupported pattern syntax: {pattern!r}")
        body = m.group(1).replace(".", "[^()]")
        pieces.append(f"(?:\\((?:{body})\\)){m.group(2)}")
        last_end = m.end()
    if pattern[last_end:].strip():
        raise ValueError(f"unsupported pattern syntax: {pattern!r}")
    return re.compile("".join(pieces))


_NP_RE = compile_tag_pattern(NP_PATTERN)
_VP_RE = compile_tag_pattern(VP_PATTERN)


def _match_spans(regex, tags, start_token=0):
    """Leftmost, maximal, non-overlapping matches as token index spans."""
    encoded = "".join(f"({t})" for t in tags)
    starts = {}
    pos = 0
    for i, t in enumerate(tags):
        starts[pos] = i
        pos += len(t) + 2
    starts[pos] = len(tags)
    spans = []
    for m in regex.finditer(encoded):
        if m.start() == m.end():
            continue
        spans.append((start_token + starts[m.start()], start_token + starts[m.end()]))
    return spans


@dataclass
class EntitySet:
    entities: list
    source: str = ""

    def __bool__(self):
        return bool(self.entities)

    def __iter__(self):
        return iter(self.entities)

    def __len__(self):
        return len(self.entities)


def parse_tagged(line):
    """Parse a "surface/TAG surface/TAG" line into (surface, tag) pairs."""
    tokens = []
    for chunk in line.split():
        surface, sep, tag = chunk.rpartition("/")
        if not sep or not surface or not tag:
            raise ValueError(f"bad tagged token: {chunk!r}")
        tokens.append((surface, tag.upper()))
    return tokens


def extract_entities(sentence, kg_vocab=None, source="", stop_entities=DEFAULT_STOP_ENTITIES):
    """Extract concept candidates from a tagged sentence.

    `sentence` is a list of (surface, tag) pairs. Returns an EntitySet of
    normalized concept ids, deduplicated in first-occurrence order.
    """
    if not sentence:
        return EntitySet([], source)
    tags = [tag.upper() for _, tag in sentence]
    np_spans = _match_spans(_NP_RE, tags)
    covered = set()
    for a, b in np_spans:
        covered.update(range(a, b))
    vp_spans = []
    gap_start = 0
    for a, b in np_spans + [(len(tags), len(tags))]:
        if gap_start < a:
            seg = tags[gap_start:a]
            vp_spans.extend(_match_spans(_VP_RE, seg, start_token=gap_start))
        gap_start = b
    chunks = sorted(np_spans + vp_spans)

    processed = []
    for a, b in chunks:
        words = []
        word_tags = []
        for i in range(a, b):
            surface, tag = sentence[i][0].lower(), tags[i]
            if tag in _DROP_TAGS:
                continue
            words.append(lemmatize_verb(surface) if tag.startswith("VB") else surface)
            word_tags.append(tag)
        if words:
            processed.append({"span": (a, b), "tokens": words, "tags": word_tags})

    def vocab_form(tokens, token_tags=None):
        if not kg_vocab:
            return None
        for form in _variants(tokens):
            if form in kg_vocab:
                return form
        # Snap to a known node by shedding leading modifiers.
        if token_tags:
            for start in range(1, len(tokens)):
                if not all(t == "JJ" for t in token_tags[:start]):
                    break
                for form in _variants(tokens[start:]):
                    if form in kg_vocab:
                        return form
        return None

    # Merge adjacent chunks separated only by function words when the
    # combined phrase is a known concept.
    merged = []
    i = 0
    while i < len(processed):
        cur = processed[i]
        if kg_vocab and i + 1 < len(processed):
            nxt = processed[i + 1]
            gap = range(cur["span"][1], nxt["span"][0])
            if len(gap) <= 2 and all(tags[g] in _GAP_TAGS for g in gap):
                combo = vocab_form(cur["tokens"] + nxt["tokens"])
                if combo is not None:
                    merged.append({"span": (cur["span"][0], nxt["span"][1]), "id": combo})
                    i += 2
                    continue
        merged.append(cur)
        i += 1

    entities = []
    for chunk in merged:
        cid = chunk.get("id")
        if cid is None:
            cid = vocab_form(chunk["tokens"], chunk.get("tags")) or normalize_concept(
                " ".join(chunk["tokens"])
            )
        if not cid or cid in stop_entities:
            continue
        if cid not in entities:
            entities.append(cid)
    return EntitySet(entities, source)


@dataclass
class IdfTable:
    values: dict = field(default_factory=dict)
    default: float = 0.0

    def __getitem__(self, token):
        return self.values.get(token, self.default)

    def entity_score(self, concept_id):
        """Maximum idf over the tokens of one concept id."""
        return max(self[tok] for tok in concept_id.split("_"))


def score_pairs(e_h, e_t, idf):
    """Rank all head x tail entity pairs by summed max-token idf."""
    if not e_h:
        raise EmptyEntitySet("head")
    if not e_t:
        raise EmptyEntitySet("tail")
    scored = [
        ((h, t), idf.entity_score(h) + idf.entity_score(t))
        for h in e_h
        for t in e_t
    ]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored


def select_pairs(ranked, phase, budget=1):
    """Keep the top `budget` pairs for training, the single best otherwise."""
    if not ranked:
        raise NoPairs("no ranked pairs to select from")
    if phase == PHASE_TRAIN:
        if budget < 1:
            raise ValueError("training pair budget must be >= 1")
        return [pair for pair, _ in ranked[:budget]]
    return [ranked[0][0]]


def build_idf_table(documents):
    """idf(token) = ln(N / (1 + df)); unknown tokens default to ln(N)."""
    df = {}
    n_docs = 0
    for doc in documents:
        n_docs += 1
        for tok in set(doc.lower().split()):
            df[tok] = df.get(tok, 0) + 1
    if n_docs == 0:
        raise ValueError("no documents")
    values = {tok: math.log(n_docs / (1 + c)) for tok, c in df.items()}
    return IdfTable(values, default=math.log(n_docs))


DEFAULT_ROW = "__default__"


def save_idf_table(table, path):
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as f:
        f.write(f"{DEFAULT_ROW}\t{table.default!r}\n")
        for tok in sorted(table.values):
            f.write(f"{tok}\t{table.values[tok]!r}\n")
    os.replace(tmp, path)


def load_idf_table(path):
    values = {}
    default = None
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            tok, _, value = line.partition("\t")
            if tok == DEFAULT_ROW:
                default = float(value)
            else:
                values[tok] = float(value)
    if default is None:
        default = max(values.values(), default=0.0)
    return IdfTable(values, default)


def load_stop_entities(path):
    stops = set(DEFAULT_STOP_ENTITIES)
    with open(path, encoding="utf-8") as f:
        for line in f:
            entry = normalize_concept(line)
            if entry:
                stops.add(entry)
    return frozenset(stops)


# Minimal lexicon tagger: enough for fixtures and CLI smoke runs; real
# pipelines supply pre-tagged text or an external tagger command.
_TAG_LEXICON = {
    "i": "PRP", "you": "PRP", "he": "PRP", "she": "PRP", "it": "PRP",
    "we": "PRP", "they": "PRP", "me": "PRP", "him": "PRP", "them": "PRP",
    "my": "PRP$", "your": "PRP$", "his": "PRP$", "her": "PRP$",
    "our": "PRP$", "their": "PRP$", "its": "PRP$",
    "the": "DT", "a": "DT", "an": "DT", "this": "DT", "that": "DT",
    "these": "DT", "those": "DT", "some": "DT", "any": "DT", "no": "DT",
    "is": "VBZ", "am": "VBP", "are": "VBP", "was": "VBD", "were": "VBD",
    "be": "VB", "been": "VBN", "being": "VBG",
    "have": "VBP", "has": "VBZ", "had": "VBD", "do": "VBP", "does": "VBZ",
    "like": "VBP", "likes": "VBZ", "love": "VBP", "loves": "VBZ",
    "enjoy": "VBP", "enjoys": "VBZ", "want": "VBP", "wants": "VBZ",
    "need": "VBP", "needs": "VBZ", "ride": "VBP", "rides": "VBZ",
    "eat": "VBP", "eats": "VBZ", "go": "VBP", "run": "VBP", "make": "VBP",
    "call": "VBP", "called": "VBN", "try": "VBP", "donate": "VBP",
    "saw": "VBD", "see": "VBP", "tell": "VB", "know": "VBP",
    "there": "RB", "here": "RB", "now": "RB", "then": "RB",
    "on": "IN", "in": "IN", "at": "IN", "with": "IN", "of": "IN",
    "from": "IN", "for": "IN", "by": "IN", "about": "IN", "as": "IN",
    "to": "TO", "and": "CC", "or": "CC", "but": "CC",
    "not": "RB", "very": "RB", "really": "RB", "everywhere": "RB",
    "big": "JJ", "red": "JJ", "nice": "JJ", "good": "JJ", "best": "JJ",
    "amazing": "JJ", "favorite": "JJ", "greasy": "JJ", "new": "JJ",
    "can": "MD", "will": "MD", "would": "MD", "should": "MD", "could": "MD",
}

class SubprocessTagger:
    """POS tagger over a line-protocol subprocess: one raw sentence in,
    one "surface/TAG surface/TAG" line out."""

    def __init__(self, cmd):
        import shlex
        import subprocess

        if isinstance(cmd, str):
            cmd = shlex.split(cmd)
        self.proc = subprocess.Popen(
            cmd,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )

    def __call__(self, sentence):
        if "\n" in sentence:
            raise ValueError("protocol sentences must be single lines")
        self.proc.stdin.write(sentence + "\n")
        self.proc.stdin.flush()
        line = self.proc.stdout.readline()
        if not line:
            raise RuntimeError("tagger subprocess closed its output")
        return parse_tagged(line.strip())

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


_PUNCT_RE = re.compile(r"^\W+$")


def lexicon_tag(text):
    """Tag a raw sentence with the built-in fixture lexicon."""
    tokens = []
    for raw in re.findall(r"[A-Za-z0-9']+|[^\sA-Za-z0-9]", text):
        if _PUNCT_RE.match(raw):
            tokens.append((raw, "."))
            continue
        low = raw.lower()
        tag = _TAG_LEXICON.get(low)
        if tag is None:
            if low.endswith("ing"):
                tag = "VBG"
            elif low.endswith("ly"):
                tag = "RB"
            elif low.isdigit():
                tag = "CD"
            elif low.endswith("s") and len(low) > 3:
                tag = "NNS"
            else:
                tag = "NN"
        tokens.append((raw, tag))
    return tokens
