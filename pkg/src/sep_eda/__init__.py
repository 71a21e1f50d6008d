"""Stable-equilibrium-point (SEP) representatives for fast exploratory data analysis.

The package builds a k-NN graph over a dataset, compresses it by aggregating
spectrally-correlated nodes, fits a Gaussian-kernel minimal enclosing
hypersphere to the compressed points, and descends the squared radial
distance to find SEPs.  The SEPs act as representative points for spectral
clustering (labels are mapped back through two levels) and for t-SNE
(embedding only the SEPs).
"""

from sep_eda.errors import DataError, NumericalError
from sep_eda.datasets import DataMatrix, load_csv, load_libsvm, load_idx, normalize, make_blobs
from sep_eda.graph import NeighborGraph, LaplacianView, build_knn_graph, laplacian
from sep_eda.coarsen import (
    TestVectors,
    AggregationMap,
    CompressedDataset,
    smooth_test_vectors,
    structural_correlation,
    aggregate,
    aggregate_to_ratio,
    compress,
)
from sep_eda.sphere import SphereModel, kernel_value, fit_sphere, radius_sq, radius_grad, default_kernel_q
from sep_eda.sep import SepSet, descend, find_seps
from sep_eda.cluster import (
    ClusterAssignment,
    EigenPairs,
    PipelineParams,
    PipelineTrace,
    small_eigs,
    kmeans,
    spectral_cluster,
    sep_spectral_cluster,
    backmap,
)
from sep_eda.tsne import (
    AffinityMatrix,
    Embedding2D,
    perplexity_sigmas,
    p_matrix,
    q_matrix,
    kl_cost,
    kl_gradient,
    tsne_embed,
    sep_tsne,
    embedding_class_coverage,
)
from sep_eda.metrics import AccReport, hungarian, accuracy
from sep_eda.svg import render_scatter_svg
from sep_eda.bench import BenchSpec, BenchRecord, run_bench

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "NumericalError",
    "DataMatrix",
    "load_csv",
    "load_libsvm",
    "load_idx",
    "normalize",
    "make_blobs",
    "NeighborGraph",
    "LaplacianView",
    "build_knn_graph",
    "laplacian",
    "TestVectors",
    "AggregationMap",
    "CompressedDataset",
    "smooth_test_vectors",
    "structural_correlation",
    "aggregate",
    "aggregate_to_ratio",
    "compress",
    "SphereModel",
    "kernel_value",
    "fit_sphere",
    "radius_sq",
    "radius_grad",
    "default_kernel_q",
    "SepSet",
    "descend",
    "find_seps",
    "ClusterAssignment",
    "EigenPairs",
    "PipelineParams",
    "PipelineTrace",
    "small_eigs",
    "kmeans",
    "spectral_cluster",
    "sep_spectral_cluster",
    "backmap",
    "AffinityMatrix",
    "Embedding2D",
    "perplexity_sigmas",
    "p_matrix",
    "q_matrix",
    "kl_cost",
    "kl_gradient",
    "tsne_embed",
    "sep_tsne",
    "embedding_class_coverage",
    "AccReport",
    "hungarian",
    "accuracy",
    "render_scatter_svg",
    "BenchSpec",
    "BenchRecord",
    "run_bench",
]
