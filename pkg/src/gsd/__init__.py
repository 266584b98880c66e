"""Structural disparity toolkit for node classification."""
from .graph import (GraphBundle, aggregate, bundles_equal, hop_shell, load_bundle,
                    node_homophily, save_bundle)

__version__ = "0.1.0"

__all__ = [
    "GraphBundle",
    "aggregate",
    "bundles_equal",
    "hop_shell",
    "load_bundle",
    "node_homophily",
    "save_bundle",
    "__version__",
]
