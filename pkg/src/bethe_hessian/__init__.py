"""Spectral community counting and recovery for sparse stochastic block models.

The central object is the Bethe-Hessian ``H(t) = t^2 I - t A + (D - I)``.
The number of its negative eigenvalues at ``t = +-sqrt(d)`` estimates the
number of informative communities, and the matching eigenvectors give an
embedding for clustering.
"""

from .detect import (
    ClusterConfig,
    CountEstimate,
    DetectionResult,
    TheoryReport,
    TheoryTolerances,
    cluster,
    embed,
    estimate_counts,
    kmeans,
    overlap,
    theory_report,
)
from .eig import (
    count_below,
    inertia,
    leading_eigs_nonsym,
    local_davis_kahan_certificate,
    local_weyl_certificate,
    smallest_eigs,
    subspace_distance,
)
from .graph import SparseGraph, load_graph, mean_degree, oriented_edges, save_graph
from .model import (
    ModelParams,
    SignalSpectrum,
    load_model,
    predicted_cross_moments,
    predicted_outlier_locations,
    sample_graph,
    save_model,
    signal_spectrum,
    validate_model,
)
from .operators import (
    bethe_hessian,
    deformed_difference_check,
    full_nb,
    ihara_bass_residual,
    reduced_nb,
    weighted_bethe_hessian,
)

__version__ = "0.1.0"

__all__ = [
    "SparseGraph",
    "load_graph",
    "mean_degree",
    "oriented_edges",
    "save_graph",
    "ClusterConfig",
    "CountEstimate",
    "DetectionResult",
    "TheoryReport",
    "TheoryTolerances",
    "cluster",
    "embed",
    "estimate_counts",
    "kmeans",
    "overlap",
    "theory_report",
    "count_below",
    "inertia",
    "leading_eigs_nonsym",
    "local_davis_kahan_certificate",
    "local_weyl_certificate",
    "smallest_eigs",
    "subspace_distance",
    "ModelParams",
    "SignalSpectrum",
    "load_model",
    "predicted_cross_moments",
    "predicted_outlier_locations",
    "sample_graph",
    "save_model",
    "signal_spectrum",
    "validate_model",
    "bethe_hessian",
    "deformed_difference_check",
    "full_nb",
    "ihara_bass_residual",
    "reduced_nb",
    "weighted_bethe_hessian",
]
