"""Tokenization and concept-id normalization helpers."""

import re

_WORD = re.compile(r"[a-z0-9]+")
_WS = re.compile(r"\s+")

# Function words ignored by content-token overlap measures. Possessive
# pronouns are deliberately kept: in short dialogue turns they carry
# topical signal ("my puppy") that bare function words do not.
STOPWORDS = frozenset(
    """
    a an the this that these those there here
    i you he she it we they me him us them
    is am are was were be been being
    do does did done have has had having
    will would can could should shall may might must
    of in on at to from with for by about as into over
    after before between through during under along across
    off above below near until
    and or but if while because so than then too also just
    not no nor yes
    who what when where which how why whom
    s t d ll m re ve don didn isn wasn aren won
    very really quite
    """.split()
)


def tokenize(text):
    """Lowercase whitespace tokenization used by the reference-based metrics."""
    return text.lower().split()


def word_tokens(text):
    """Lowercase alphanumeric tokens, punctuation stripped."""
    return _WORD.findall(text.lower())


def content_tokens(text):
    """word_tokens minus stopwords."""
    return [t for t in word_tokens(text) if t not in STOPWORDS]


def normalize_concept(text):
    """Normalize free text to a concept id.

    Lowercase, collapse internal whitespace to single underscores, and
    strip leading/trailing underscores. Returns "" when nothing is left.
    """
    joined = _WS.sub("_", text.strip().lower())
    return joined.strip("_")


def concept_words(concept_id):
    """Render a concept id with spaces instead of underscores."""
    return concept_id.replace("_", " ")
