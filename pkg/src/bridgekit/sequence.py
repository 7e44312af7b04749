"""Path sequence formats and their inverse parser.

Three query/training layouts over plain space-separated tokens:

  ht:     [target] n_t [sep] n_h e_0 n_1 ... n_t
  wc:     [wc] k1 [wc] k2 ... [target] n_t [sep] body
  oneent: wc with exactly one [wc] entry

Relation tokens are recognized by a leading underscore or any uppercase
character; normalized concept ids are all-lowercase, so the two families
never collide for graphs loaded by this package.
"""

from .errors import EntityNotOnPath, ParseError, TargetMismatch
from .paths import KnowledgePath

TARGET_TOKEN = "[target]"
SEP_TOKEN = "[sep]"
WC_TOKEN = "[wc]"
BOS_TOKEN = "[bos]"
EOS_TOKEN = "[eos]"
SPECIAL_TOKENS = frozenset({TARGET_TOKEN, SEP_TOKEN, WC_TOKEN, BOS_TOKEN, EOS_TOKEN})

MODE_HT = "ht"
MODE_WC = "wc"
MODE_ONEENT = "oneent"
MODES = (MODE_HT, MODE_WC, MODE_ONEENT)


def is_relation_token(token, relations=None):
    if token in SPECIAL_TOKENS:
        return False
    if relations is not None:
        return token.lstrip("_") in relations
    return token.startswith("_") or any(c.isupper() for c in token)


def format_sequence(path, mode, wc_entities=None, rng=None, allow_external=False):
    """Serialize a path into one of the three sequence layouts.

    In wc mode, `wc_entities=None` draws a seeded random permutation of
    all intermediate nodes (`rng` required). Explicit entities must lie
    on the path unless `allow_external` is set (query use); duplicates
    are rejected. oneent additionally requires exactly one entity.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode: {mode}")
    body = " ".join(path.tokens())
    core = f"{TARGET_TOKEN} {path.tail} {SEP_TOKEN} {body}"
    if mode == MODE_HT:
        if wc_entities:
            raise ValueError("wc_entities only apply to wc/oneent modes")
        return core
    if wc_entities is None:
        if mode == MODE_ONEENT:
            raise ValueError("oneent mode needs an explicit entity")
        if rng is None:
            raise ValueError("drawing a wc permutation needs an rng")
        wc_entities = list(path.intermediates)
        rng.shuffle(wc_entities)
    else:
        wc_entities = list(wc_entities)
        if len(set(wc_entities)) != len(wc_entities):
            raise ValueError("wc entities must be distinct")
        if not allow_external:
            on_path = set(path.intermediates)
            for entity in wc_entities:
                if entity not in on_path:
                    raise EntityNotOnPath(entity)
    if mode == MODE_ONEENT and len(wc_entities) != 1:
        raise ValueError("oneent mode takes exactly one entity")
    prefix = "".join(f"{WC_TOKEN} {e} " for e in wc_entities)
    return prefix + core


def parse_sequence(text, relations=None):
    """Invert format_sequence; returns the body as a KnowledgePath.

    Raises ParseError(position) on grammar violations (for two adjacent
    relation tokens the position is the first of the pair) and
    TargetMismatch when the declared target is not the final concept.
    """
    toks = text.split()
    pos = 0
    wc_entities = []
    while pos < len(toks) and toks[pos] == WC_TOKEN:
        if pos + 1 >= len(toks) or toks[pos + 1] in SPECIAL_TOKENS:
            raise ParseError(pos + 1, "dangling [wc] marker")
        wc_entities.append(toks[pos + 1])
        pos += 2
    if pos >= len(toks) or toks[pos] != TARGET_TOKEN:
        raise ParseError(pos, "expected [target]")
    if pos + 1 >= len(toks) or toks[pos + 1] in SPECIAL_TOKENS:
        raise ParseError(pos + 1, "expected target concept")
    declared = toks[pos + 1]
    if pos + 2 >= len(toks) or toks[pos + 2] != SEP_TOKEN:
        raise ParseError(pos + 2, "expected [sep]")
    body_start = pos + 3
    body = toks[body_start:]
    if not body:
        raise ParseError(body_start, "empty body")
    for j, tok in enumerate(body):
        at = body_start + j
        if tok in SPECIAL_TOKENS:
            raise ParseError(at, "special token inside body")
        rel = is_relation_token(tok, relations)
        if j % 2 == 0 and rel:
            if j > 0:
                raise ParseError(at - 1, "two adjacent relation tokens")
            raise ParseError(at, "body must start with a concept")
        if j % 2 == 1 and not rel:
            raise ParseError(at, "two adjacent concept tokens")
    if len(body) % 2 == 0:
        raise ParseError(body_start + len(body) - 1, "body ends with a relation")
    if len(body) < 3:
        raise ParseError(body_start + len(body) - 1, "path needs at least one hop")
    path = KnowledgePath(tuple(body[0::2]), tuple(body[1::2]))
    if path.tail != declared:
        raise TargetMismatch(declared, path.tail)
    return path


def parse_sequence_with_entities(text, relations=None):
    """Like parse_sequence but also returns the [wc] entity list."""
    toks = text.split()
    wc_entities = []
    pos = 0
    while pos < len(toks) and toks[pos] == WC_TOKEN:
        if pos + 1 < len(toks):
            wc_entities.append(toks[pos + 1])
        pos += 2
    return parse_sequence(text, relations), wc_entities
