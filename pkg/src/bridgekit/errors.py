"""Exception types shared across the toolkit.

Everything derives from BridgekitError so the CLI can map data problems
to a single exit code.
"""


class BridgekitError(Exception):
    """Base class for toolkit errors (CLI exit code 2)."""


class MalformedLine(BridgekitError):
    """An assertion line did not have the expected relation/head/tail shape."""

    def __init__(self, line_no, reason="wrong field count"):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {reason}")


class EmptyGraph(BridgekitError):
    """No edges survived loading and filtering."""


class NoWalkableNode(BridgekitError):
    """No concept in the graph has an outgoing edge."""


class EntityNotOnPath(BridgekitError):
    """A will-contain entity is not an intermediate node of the path."""

    def __init__(self, entity):
        self.entity = entity
        super().__init__(f"entity not on path: {entity}")


class ParseError(BridgekitError):
    """A token sequence violates the path sequence grammar."""

    def __init__(self, position, reason):
        self.position = position
        super().__init__(f"token {position}: {reason}")


class TargetMismatch(BridgekitError):
    """Declared target concept differs from the final body concept."""

    def __init__(self, declared, actual):
        self.declared = declared
        self.actual = actual
        super().__init__(f"declared target {declared!r} but body ends with {actual!r}")


class MissingTemplate(BridgekitError):
    """No surface template registered for a relation."""

    def __init__(self, relation):
        self.relation = relation
        super().__init__(f"no template for relation: {relation}")


class EmptyCorpus(BridgekitError):
    """A path corpus or evaluation corpus contained no usable items."""


class UnknownConcept(BridgekitError):
    """A token is outside the model vocabulary."""

    def __init__(self, token):
        self.token = token
        super().__init__(f"unknown token: {token}")


class NoPathFound(BridgekitError):
    """Constrained search exhausted its beam without completing a path."""


class EmptyEntitySet(BridgekitError):
    """An entity set that must be non-empty was empty."""

    def __init__(self, side):
        self.side = side
        super().__init__(f"empty entity set: {side}")


class NoPairs(BridgekitError):
    """Pair selection was asked to choose from an empty ranking."""


class NoEntities(BridgekitError):
    """No entities could be extracted from one side of an instance."""

    def __init__(self, side):
        self.side = side
        super().__init__(f"no entities extracted from {side}")


class NoPathSurvived(BridgekitError):
    """Every candidate path was removed by the filters."""


class SpanOutOfRange(BridgekitError):
    """A frame span lies outside the response text."""

    def __init__(self, span, length):
        self.span = span
        super().__init__(f"span {span} exceeds text of length {length}")


class ScorerFailure(BridgekitError):
    """A smoothness scorer failed on one instance."""

    def __init__(self, instance_id, cause):
        self.instance_id = instance_id
        self.cause = cause
        super().__init__(f"scorer failed on instance {instance_id}: {cause}")


class InsufficientDataset(BridgekitError):
    """The dataset is too small for negative synthesis."""


class NoPositives(BridgekitError):
    """Balancing requires at least one positive instance."""


class LengthMismatch(BridgekitError):
    """Paired series have different lengths."""


class DegenerateInput(BridgekitError):
    """Input is constant or too short for a rank correlation."""


class InsufficientReferences(BridgekitError):
    """Reference-as-response probing needs at least two references."""


class FileFormatError(BridgekitError):
    """A versioned file did not match the expected format."""
