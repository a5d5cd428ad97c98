"""Python bindings for the snapcluster toolkit."""

from ._snapcluster import (
    SnapclusterError,
    __version__,
    consensus,
    consensus_histogram,
    default_grid,
    extract_clusters,
    hcluster,
    is_stable,
    jl_dimension,
    kmeans,
    pair_counting_agreement,
    pairwise_distances,
    run_cli,
    svd_weights,
)

__all__ = [
    "SnapclusterError",
    "__version__",
    "consensus",
    "consensus_histogram",
    "default_grid",
    "extract_clusters",
    "hcluster",
    "is_stable",
    "jl_dimension",
    "kmeans",
    "pair_counting_agreement",
    "pairwise_distances",
    "run_cli",
    "svd_weights",
]
