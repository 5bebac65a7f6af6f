"""Knowledge-graph embedding training with pluggable negative sampling.

The pipeline: load triples, embed entity texts (file ingest or a hashing
fallback), PCA-reduce, cluster with K-means++, then train TransE, DistMult,
or RotatE with uniform or cluster-guided negative sampling, and evaluate
with filtered link-prediction ranking.
"""

from .clustering import ClusterModel, KMeansPP
from .datasets import TripleStore, Vocab, build_true_index, load_dataset
from .embeddings import PcaReducer, fallback_embed, ingest_embedding_file
from .evaluation import MetricsReport, evaluate, rank_query
from .models import KgeModel, init_model, score
from .sampling import LemonSampler, NegSamplerConfig, UniformSampler
from .training import TrainConfig, TrainLog, preprocess, train

__version__ = "0.1.0"

__all__ = [
    "ClusterModel", "KMeansPP", "TripleStore", "Vocab", "build_true_index",
    "load_dataset", "PcaReducer", "fallback_embed", "ingest_embedding_file",
    "MetricsReport", "evaluate", "rank_query", "KgeModel", "init_model",
    "score", "LemonSampler", "NegSamplerConfig", "UniformSampler",
    "TrainConfig", "TrainLog", "preprocess", "train", "__version__",
]
