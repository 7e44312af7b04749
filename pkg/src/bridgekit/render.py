"""Rendering knowledge paths as natural-language text.

Each relation (and each inverse) maps to a fixed surface string; concepts
render with spaces instead of underscores. Unknown relations are a hard
error rather than a silent passthrough.
"""

import os

from .errors import MissingTemplate
from .textutil import concept_words

# Surface templates for the standard ConceptNet relation inventory, the
# inverse (underscore) form always worded differently from the forward one.
DEFAULT_TEMPLATES = {
    "AtLocation": "is at location",
    "_AtLocation": "is the location of",
    "UsedFor": "is used for",
    "_UsedFor": "belongs to",
    "Desires": "desires",
    "_Desires": "is desired by",
    "IsA": "is a",
    "_IsA": "has instance",
    "HasPrerequisite": "has prerequisite",
    "_HasPrerequisite": "is a dependency of",
    "NotDesires": "not desires",
    "_NotDesires": "is not desired by",
    "CapableOf": "is capable of",
    "_CapableOf": "can be done by",
    "NotCapableOf": "is not capable of",
    "_NotCapableOf": "cannot be done by",
    "Causes": "causes",
    "_Causes": "is caused by",
    "CausesDesire": "causes desire for",
    "_CausesDesire": "is wanted because of",
    "MotivatedByGoal": "is motivated by",
    "_MotivatedByGoal": "motivates",
    "HasSubevent": "has subevent",
    "_HasSubevent": "is a subevent of",
    "HasFirstSubevent": "begins with",
    "_HasFirstSubevent": "is how you begin",
    "HasLastSubevent": "ends with",
    "_HasLastSubevent": "is how you end",
    "HasProperty": "has property",
    "_HasProperty": "is a property of",
    "NotHasProperty": "does not have property",
    "_NotHasProperty": "is not a property of",
    "PartOf": "is part of",
    "_PartOf": "has part",
    "HasA": "has a",
    "_HasA": "is possessed by",
    "MadeOf": "is made of",
    "_MadeOf": "is material for",
    "ReceivesAction": "receives action",
    "_ReceivesAction": "is an action received by",
    "DefinedAs": "is defined as",
    "_DefinedAs": "is a definition of",
    "SymbolOf": "is a symbol of",
    "_SymbolOf": "is symbolized by",
    "MannerOf": "is a manner of",
    "_MannerOf": "has manner",
    "LocatedNear": "is located near",
    "_LocatedNear": "is near to",
    "SimilarTo": "is similar to",
    "_SimilarTo": "is resembled by",
    "DistinctFrom": "is distinct from",
    "_DistinctFrom": "is set apart from",
    "Entails": "entails",
    "_Entails": "is entailed by",
    "InstanceOf": "is an instance of",
    "_InstanceOf": "is the class of",
    "CreatedBy": "is created by",
    "_CreatedBy": "creates",
    "HasContext": "has context",
    "_HasContext": "is the context of",
    # Present for graphs that override the default exclusion set.
    "RelatedTo": "is related to",
    "_RelatedTo": "relates to",
    "Synonym": "is a synonym of",
    "_Synonym": "is a synonym for",
    "Antonym": "is an antonym of",
    "_Antonym": "is an antonym for",
    "DerivedFrom": "is derived from",
    "_DerivedFrom": "derives",
    "FormOf": "is a form of",
    "_FormOf": "has form",
    "EtymologicallyDerivedFrom": "is etymologically derived from",
    "_EtymologicallyDerivedFrom": "etymologically derives",
    "EtymologicallyRelatedTo": "is etymologically related to",
    "_EtymologicallyRelatedTo": "etymologically relates to",
}


def render_text(path, templates=None):
    """Render a path as one sentence, no trailing punctuation.

    Raises MissingTemplate for a relation absent from the table.
    """
    table = DEFAULT_TEMPLATES if templates is None else templates
    parts = [concept_words(path.nodes[0])]
    for rel, node in zip(path.relations, path.nodes[1:]):
        text = table.get(rel)
        if text is None:
            raise MissingTemplate(rel)
        parts.append(text)
        parts.append(concept_words(node))
    return " ".join(" ".join(parts).split())


def load_templates(path):
    """Load a template override TSV: relation<TAB>surface text."""
    table = dict(DEFAULT_TEMPLATES)
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            rel, _, text = line.partition("\t")
            if not text:
                raise ValueError(f"bad template line: {line!r}")
            table[rel.strip()] = text.strip()
    return table


def save_templates(table, path):
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as f:
        for rel in sorted(table):
            f.write(f"{rel}\t{table[rel]}\n")
    os.replace(tmp, path)
