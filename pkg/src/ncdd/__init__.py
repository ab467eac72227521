"""Node-centric data-driven graph learning from multichannel signal windows."""
from .core import (
    EmbeddingSet,
    GraphSignalSample,
    NCDDError,
    SimilarityMatrix,
    Topology,
    validate_sample,
)
from .features import FeatureConfig
from .training import TrainConfig, TrainableParameters, infer_similarity, ncdd_loss, sgd_train

__version__ = "0.1.0"

__all__ = [
    "EmbeddingSet", "FeatureConfig", "GraphSignalSample", "NCDDError", "SimilarityMatrix",
    "Topology", "TrainConfig", "TrainableParameters", "infer_similarity", "ncdd_loss",
    "sgd_train", "validate_sample",
]
