"""Knowledge paths and the one-path-per-line corpus format.

A corpus line is "n_h e_0 n_1 ... e_{k-1} n_k": concepts in underscore
form, relation names verbatim (leading underscore marks an inverse).
"""

from dataclasses import dataclass

from .errors import ParseError


@dataclass(frozen=True)
class KnowledgePath:
    """Alternating concept/relation sequence with head and tail roles."""

    nodes: tuple
    relations: tuple

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "relations", tuple(self.relations))
        if len(self.nodes) != len(self.relations) + 1:
            raise ValueError("nodes and relations do not alternate")
        if not self.relations:
            raise ValueError("a path needs at least one hop")

    @property
    def head(self):
        return self.nodes[0]

    @property
    def tail(self):
        return self.nodes[-1]

    @property
    def hops(self):
        return len(self.relations)

    @property
    def intermediates(self):
        return self.nodes[1:-1]

    def tokens(self):
        """Body token list: head, then relation/concept pairs."""
        toks = [self.nodes[0]]
        for rel, node in zip(self.relations, self.nodes[1:]):
            toks.append(rel)
            toks.append(node)
        return toks

    def line(self):
        return " ".join(self.tokens())

    def has_repeated_node(self):
        return len(set(self.nodes)) != len(self.nodes)

    def edges_in_graph(self, graph):
        """True when every hop is a stored edge of `graph`."""
        for i, rel in enumerate(self.relations):
            if (rel, self.nodes[i + 1]) not in graph.neighbors(self.nodes[i]):
                return False
        return True


def path_from_tokens(tokens, offset=0):
    """Parse body tokens (concept relation concept ...) into a path.

    `offset` shifts reported error positions so callers parsing a larger
    sequence can point at the original token index.
    """
    if len(tokens) < 3 or len(tokens) % 2 == 0:
        raise ParseError(offset + max(len(tokens) - 1, 0), "body must be concept (relation concept)+")
    return KnowledgePath(tuple(tokens[0::2]), tuple(tokens[1::2]))


def parse_corpus_line(line, line_no=0):
    toks = line.split()
    if not toks:
        raise ParseError(0, f"empty corpus line {line_no}")
    return path_from_tokens(toks)


def write_corpus_file(paths, out_path):
    with open(out_path, "w", encoding="utf-8") as f:
        for p in paths:
            f.write(p.line())
            f.write("\n")


def read_corpus_file(path):
    paths = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if line.strip():
                paths.append(parse_corpus_line(line, line_no))
    return paths
