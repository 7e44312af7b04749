"""bridgekit: knowledge-path bridging toolkit for target-guided dialogue
data pipelines.

Non-neural machinery for commonsense-bridged response generation:
knowledge-graph path sampling, constrained bridging-path generation,
path filtering and alignment, dialogue-data re-purposing, adversarial
metric-data synthesis, and evaluation. Sequence models plug in behind a
plain text interface; a reference statistical path model ships for
desk-scale verification.
"""

__version__ = "0.1.0"

from .decode import DecodeConfig, ExternalPathGenerator, ReferencePathGenerator, generate_path
from .kg import GraphConfig, KnowledgeGraph, load_graph
from .ngram import PathModel, path_perplexity, train_path_model
from .paths import KnowledgePath
from .pipeline import PipelineConfig, TransitionInstance, assemble_crg_sequence, filter_paths
from .sampler import SamplerConfig, sample_corpus, sample_walk
from .sequence import format_sequence, parse_sequence

__all__ = [
    "DecodeConfig",
    "ExternalPathGenerator",
    "GraphConfig",
    "KnowledgeGraph",
    "KnowledgePath",
    "PathModel",
    "PipelineConfig",
    "ReferencePathGenerator",
    "SamplerConfig",
    "TransitionInstance",
    "__version__",
    "assemble_crg_sequence",
    "filter_paths",
    "format_sequence",
    "generate_path",
    "load_graph",
    "parse_sequence",
    "path_perplexity",
    "sample_corpus",
    "sample_walk",
    "train_path_model",
]
