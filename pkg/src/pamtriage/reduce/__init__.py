"""2-D projections of embeddings: PCA and UMAP, plus triage selections."""

from .pca import PcaModel, pca_fit, pca_project, pca_projection_set
from .projection import (
    ProjectionPoint,
    ProjectionSet,
    farthest_point_indices,
    filter_by_component,
    read_projection,
    sample_subset,
    write_projection,
)
from .umap import (
    UmapConfig,
    combine_strengths,
    exact_knn,
    fit_curve_params,
    membership_strengths,
    smooth_knn_calibration,
    symmetrize,
    umap_fit,
)

__all__ = [
    "PcaModel",
    "pca_fit",
    "pca_project",
    "pca_projection_set",
    "ProjectionPoint",
    "ProjectionSet",
    "farthest_point_indices",
    "filter_by_component",
    "read_projection",
    "sample_subset",
    "write_projection",
    "UmapConfig",
    "combine_strengths",
    "exact_knn",
    "smooth_knn_calibration",
    "membership_strengths",
    "symmetrize",
    "fit_curve_params",
    "umap_fit",
]
