"""Binarized neural network CAN intrusion detection.

Thin re-export of the compiled core: generate traffic, fit and apply the
bit featurizer, train, pack, and run packed inference.
"""

from ._core import (
    ConfigError,
    DataError,
    Model,
    PackedModel,
    ParseError,
    __version__,
    evaluate_metrics,
    featurize,
    fit_featurizer,
    generate_csv,
    train,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Model",
    "PackedModel",
    "ParseError",
    "__version__",
    "evaluate_metrics",
    "featurize",
    "fit_featurizer",
    "generate_csv",
    "train",
]
