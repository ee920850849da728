"""Class-splitting GAN training on synthetic multimodal data."""

from ._core import (
    ConfigError,
    ContractError,
    NumericFault,
    __version__,
    default_config,
    evaluate,
    inception_score,
    kmeans2,
    load_dataset,
    make_grid,
    make_ring,
    mode_metrics,
    normalize_rows,
    plot,
    sample,
    save_dataset,
    train,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "NumericFault",
    "__version__",
    "default_config",
    "evaluate",
    "inception_score",
    "kmeans2",
    "load_dataset",
    "make_grid",
    "make_ring",
    "mode_metrics",
    "normalize_rows",
    "plot",
    "sample",
    "save_dataset",
    "train",
]
