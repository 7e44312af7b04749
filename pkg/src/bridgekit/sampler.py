"""Seeded random-walk sampling of knowledge-path corpora.

Walks start at a uniformly drawn node with outgoing edges, draw a target
length uniformly from {1..K_max}, and take uniform steps over allowed
outgoing edges. Stepping straight back across the edge just used is
vetoed by default. A corpus is produced in shards, one deterministically
derived RNG stream per shard, merged in shard order, so output depends
only on (seed, workers) and never on scheduling.
"""

import multiprocessing
import random
from dataclasses import dataclass

from .errors import NoWalkableNode
from .paths import KnowledgePath
from .seeding import derive_seed


@dataclass(frozen=True)
class SamplerConfig:
    count: int = 1
    seed: int = 0
    K_max: int = 6
    allow_immediate_backtrack: bool = False
    degree_weighted_start: bool = False

    def __post_init__(self):
        if self.K_max < 1:
            raise ValueError("K_max must be >= 1")
        if self.count < 1:
            raise ValueError("count must be >= 1")


def _walk_tokens(graph, rng, count, k_max, allow_backtrack, weighted_start):
    """Hot loop: emit `count` walks as flat token lists.

    Kept branch-light on purpose; adjacency rows carry the precomputed
    back-edge index so the backtrack veto costs one integer compare.
    """
    walkable = graph.walkable_nodes()
    if not walkable:
        raise NoWalkableNode("graph has no node with outgoing edges")
    adj = graph.adjacency
    rand = rng.random
    n_walkable = len(walkable)
    if weighted_start:
        from bisect import bisect_right

        cum = graph.degree_cumulative()
        total = cum[-1]
    out = []
    append = out.append
    for _ in range(count):
        while True:
            if weighted_start:
                node = walkable[bisect_right(cum, int(rand() * total))]
            else:
                node = walkable[int(rand() * n_walkable)]
            target = 1 + int(rand() * k_max)
            toks = [node]
            hops = 0
            blocked = -1
            while hops < target:
                rows = adj[node]
                n = len(rows)
                if n - (blocked >= 0) <= 0:
                    break
                i = int(rand() * n)
                while i == blocked:
                    i = int(rand() * n)
                row = rows[i]
                node = row[1]
                toks.append(row[0])
                toks.append(node)
                blocked = row[2] if not allow_backtrack else -1
                hops += 1
            if hops:
                append(toks)
                break
    return out


def sample_walk(graph, rng, config=None):
    """Draw one walk with an externally owned random.Random stream."""
    config = config or SamplerConfig()
    toks = _walk_tokens(
        graph,
        rng,
        1,
        config.K_max,
        config.allow_immediate_backtrack,
        config.degree_weighted_start,
    )[0]
    return KnowledgePath(tuple(toks[0::2]), tuple(toks[1::2]))


def plan_shards(count, workers):
    """Split `count` into per-shard counts, front-loading the remainder."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    base, extra = divmod(count, workers)
    return [base + (1 if i < extra else 0) for i in range(workers)]


def _shard_token_lists(graph, config, shard_index, shard_count):
    rng = random.Random(derive_seed(config.seed, "shard", shard_index))
    return _walk_tokens(
        graph,
        rng,
        shard_count,
        config.K_max,
        config.allow_immediate_backtrack,
        config.degree_weighted_start,
    )


def sample_corpus(graph, config, workers=1):
    """Sample config.count paths; deterministic for fixed (seed, workers)."""
    paths = []
    for shard_index, shard_count in enumerate(plan_shards(config.count, workers)):
        if shard_count == 0:
            continue
        for toks in _shard_token_lists(graph, config, shard_index, shard_count):
            paths.append(KnowledgePath(tuple(toks[0::2]), tuple(toks[1::2])))
    return paths


# Fork-inherited graph for pool workers; passing the graph through pickle
# would dominate the runtime on large graphs.
_POOL_GRAPH = None


def _pool_shard(args):
    config, shard_index, shard_count = args
    lists = _shard_token_lists(_POOL_GRAPH, config, shard_index, shard_count)
    return "".join(" ".join(toks) + "\n" for toks in lists)


def write_corpus(graph, config, out_path, workers=1):
    """Stream a corpus to a file, optionally with parallel shard workers.

    Output bytes are identical for the same (seed, workers) whether the
    shards run in-process or in a fork pool.
    """
    shards = [
        (config, i, c) for i, c in enumerate(plan_shards(config.count, workers)) if c > 0
    ]
    use_pool = workers > 1 and "fork" in multiprocessing.get_all_start_methods()
    if use_pool:
        global _POOL_GRAPH
        _POOL_GRAPH = graph
        try:
            ctx = multiprocessing.get_context("fork")
            with ctx.Pool(workers) as pool, open(out_path, "w", encoding="utf-8") as f:
                for chunk in pool.imap(_pool_shard, shards):
                    f.write(chunk)
        finally:
            _POOL_GRAPH = None
    else:
        with open(out_path, "w", encoding="utf-8") as f:
            for config_, i, c in shards:
                lists = _shard_token_lists(graph, config_, i, c)
                f.write("".join(" ".join(toks) + "\n" for toks in lists))
    return config.count
