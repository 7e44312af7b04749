"""ConceptNet-style assertion loading and the immutable knowledge graph.

Assertions are 3-field TSV lines "relation<TAB>head<TAB>tail". Loading
drops excluded relation types and self loops, deduplicates, synthesizes
inverse edges (leading-underscore relation names), and freezes a
deterministic adjacency: per-node edge lists sorted by (relation,
neighbor). After load the graph is read-only and safe to share across
workers.
"""

import json
import os
from bisect import bisect_left
from dataclasses import dataclass

from .errors import EmptyGraph, FileFormatError, MalformedLine
from .textutil import normalize_concept

# Edge types regarded as uninformative for bridging paths; dropped by
# default before inverse synthesis so neither direction survives.
DEFAULT_EXCLUDED_RELATIONS = frozenset(
    {
        "RelatedTo",
        "Synonym",
        "Antonym",
        "DerivedFrom",
        "FormOf",
        "EtymologicallyDerivedFrom",
        "EtymologicallyRelatedTo",
    }
)

GRAPH_FORMAT = "bridgekit-graph"
GRAPH_VERSION = 1


def invert_relation(name):
    """Map a relation to its inverse: IsA <-> _IsA. Involutive."""
    return name[1:] if name.startswith("_") else "_" + name


def is_inverse_relation(name):
    return name.startswith("_")


def base_relation(name):
    return name.lstrip("_")


@dataclass(frozen=True)
class GraphConfig:
    excluded_relations: frozenset = DEFAULT_EXCLUDED_RELATIONS
    synthesize_inverses: bool = True


class KnowledgeGraph:
    """Immutable concept/relation store with ordered adjacency.

    Adjacency rows are (relation, neighbor, back_index) where back_index
    locates the synthesized reverse edge inside the neighbor's own list
    (-1 when absent); the sampler uses it to veto immediate backtracking
    without scanning.
    """

    def __init__(self, edges, excluded_relations=DEFAULT_EXCLUDED_RELATIONS):
        by_node = {}
        for h, r, t in edges:
            by_node.setdefault(h, set()).add((r, t))
            by_node.setdefault(t, set())
        sorted_adj = {n: sorted(pairs) for n, pairs in by_node.items()}
        adj = {}
        for node, pairs in sorted_adj.items():
            rows = []
            for r, t in pairs:
                back = (invert_relation(r), node)
                tlist = sorted_adj[t]
                i = bisect_left(tlist, back)
                back_idx = i if i < len(tlist) and tlist[i] == back else -1
                rows.append((r, t, back_idx))
            adj[node] = tuple(rows)
        self._adj = adj
        self.excluded_relations = frozenset(excluded_relations)
        self.num_edges = sum(len(v) for v in adj.values())
        self._walkable = None
        self._degree_cum = None

    def __contains__(self, concept):
        return concept in self._adj

    def __len__(self):
        return len(self._adj)

    @property
    def concepts(self):
        return self._adj.keys()

    def neighbors(self, concept):
        """All outgoing (relation, neighbor) edges in deterministic order.

        Absent concepts yield an empty list; use `concept in graph` to
        distinguish absence from isolation.
        """
        rows = self._adj.get(concept, ())
        return [(r, t) for r, t, _ in rows]

    def adjacency_rows(self, concept):
        return self._adj.get(concept, ())

    @property
    def adjacency(self):
        return self._adj

    def walkable_nodes(self):
        """Concepts with at least one outgoing edge, sorted."""
        if self._walkable is None:
            self._walkable = tuple(n for n in sorted(self._adj) if self._adj[n])
        return self._walkable

    def degree_cumulative(self):
        """Cumulative out-degrees over walkable_nodes(), for weighted starts."""
        if self._degree_cum is None:
            cum = []
            total = 0
            for n in self.walkable_nodes():
                total += len(self._adj[n])
                cum.append(total)
            self._degree_cum = tuple(cum)
        return self._degree_cum

    def edges(self):
        """All directed edges (head, relation, tail), deterministic order."""
        for node in sorted(self._adj):
            for r, t, _ in self._adj[node]:
                yield (node, r, t)


def load_graph(lines, config=None):
    """Build a KnowledgeGraph from an iterable of assertion lines.

    Excluded relations (matched on the base name, so "_Synonym" is also
    dropped) and self loops are removed before inverse synthesis;
    duplicates collapse. Raises MalformedLine for a bad line and
    EmptyGraph when nothing survives.
    """
    config = config or GraphConfig()
    excluded = frozenset(config.excluded_relations)
    kept = set()
    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise MalformedLine(line_no)
        rel, head, tail = fields
        rel = rel.strip()
        if not rel or any(c.isspace() for c in rel):
            raise MalformedLine(line_no, "bad relation name")
        h = normalize_concept(head)
        t = normalize_concept(tail)
        if not h or not t:
            raise MalformedLine(line_no, "empty concept")
        if base_relation(rel) in excluded:
            continue
        if h == t:
            continue
        kept.add((h, rel, t))
    if not kept:
        raise EmptyGraph("no edges survived filtering")
    if config.synthesize_inverses:
        kept |= {(t, invert_relation(r), h) for h, r, t in kept}
    return KnowledgeGraph(kept, excluded)


def load_graph_file(path, config=None):
    with open(path, encoding="utf-8") as f:
        return load_graph(f, config)


def save_graph(graph, path):
    """Write the versioned graph cache (deterministic bytes)."""
    payload = {
        "format": GRAPH_FORMAT,
        "version": GRAPH_VERSION,
        "excluded_relations": sorted(graph.excluded_relations),
        "edges": sorted(graph.edges()),
    }
    data = json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as f:
        f.write(data)
    os.replace(tmp, path)


def load_graph_cache(path):
    with open(path, encoding="utf-8") as f:
        payload = json.load(f)
    if not isinstance(payload, dict) or payload.get("format") != GRAPH_FORMAT:
        raise FileFormatError(f"{path}: not a graph cache")
    if payload.get("version") != GRAPH_VERSION:
        raise FileFormatError(f"{path}: unsupported version {payload.get('version')}")
    edges = [tuple(e) for e in payload["edges"]]
    if not edges:
        raise EmptyGraph("cache holds no edges")
    return KnowledgeGraph(edges, frozenset(payload["excluded_relations"]))


def open_graph(path, config=None):
    """Load either a graph cache or a raw assertions TSV, by sniffing."""
    with open(path, "rb") as f:
        first = f.read(1)
    if first == b"{":
        return load_graph_cache(path)
    return load_graph_file(path, config)


def load_exclusion_file(path):
    """Read an exclusion override file: one relation name per line."""
    names = set()
    with open(path, encoding="utf-8") as f:
        for line in f:
            name = line.strip()
            if name and not name.startswith("#"):
                names.add(name)
    return frozenset(names)
