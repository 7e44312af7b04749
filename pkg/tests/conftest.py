"""Shared fixtures: a deterministic 50-node graph with no dead ends, a
sampled corpus, and a trained reference model."""

import pytest

from bridgekit.kg import load_graph
from bridgekit.ngram import train_path_model
from bridgekit.paths import KnowledgePath
from bridgekit.sampler import SamplerConfig, sample_corpus

FIXTURE_RELATIONS = ["IsA", "UsedFor", "AtLocation", "Desires", "CapableOf", "HasA"]
FIXTURE_NODES = 50


def fixture_graph_lines(n_nodes=FIXTURE_NODES):
    """Ring plus chords: every node gets >= 2 forward edges, so after
    inverse synthesis no walk can dead-end even with backtracking vetoed."""
    lines = []
    for i in range(n_nodes):
        r1 = FIXTURE_RELATIONS[i % len(FIXTURE_RELATIONS)]
        r2 = FIXTURE_RELATIONS[(i + 3) % len(FIXTURE_RELATIONS)]
        lines.append(f"{r1}\tn{i:02d}\tn{(i + 1) % n_nodes:02d}")
        lines.append(f"{r2}\tn{i:02d}\tn{(i + 7) % n_nodes:02d}")
    return lines


def mk_path(*tokens):
    return KnowledgePath(tuple(tokens[0::2]), tuple(tokens[1::2]))


@pytest.fixture(scope="session")
def fixture_graph():
    return load_graph(fixture_graph_lines())


@pytest.fixture(scope="session")
def fixture_corpus(fixture_graph):
    return sample_corpus(fixture_graph, SamplerConfig(count=2000, seed=99, K_max=4))


@pytest.fixture(scope="session")
def fixture_model(fixture_corpus):
    return train_path_model(fixture_corpus, order=3, smoothing=1e-4)
