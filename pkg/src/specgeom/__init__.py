"""Finite spectral geometries on metric spaces: supports, Connes metrics, deformations, dimensions."""
from .connes import (
    MetricOnSubset,
    bound_interval,
    connes_metric_on_Y,
    connes_oracle,
    connes_oracle_matrix,
    graph_metric,
    lipschitz_distance,
    uniform_metric_distance,
)
from .deformation import (
    MarkedSpectrum,
    compact_open_distance,
    is_regular,
    is_simple,
    perturb_simple_regular,
    regularize,
    uniform_distance,
    validate_bounded,
    weak_lp_distance,
)
from .dimension import (
    box_dim_estimate,
    build_qqh_support,
    dixmier_proxy,
    hausdorff_bound_check,
    hausdorff_reference,
    spectral_dim_estimate,
)
from .geometry import SpectralGeometry, commutator_norm, dim_E, rebuild_on_connes, spectrum_of_ds
from .spaces import CantorSpec, FiniteMetricSpace, check_uniformly_perfect, gen_cantor, gen_circle, load_space, save_space
from .support import (
    SupportSet,
    bounding_radius,
    brute_density,
    build_multiscale_support,
    complete_support,
    incidence_graph,
    local_density_profile,
    relative_bounding_radius,
)

__version__ = "0.1.0"

__all__ = [
    "CantorSpec",
    "FiniteMetricSpace",
    "MarkedSpectrum",
    "MetricOnSubset",
    "SpectralGeometry",
    "SupportSet",
    "bound_interval",
    "bounding_radius",
    "box_dim_estimate",
    "brute_density",
    "build_multiscale_support",
    "build_qqh_support",
    "check_uniformly_perfect",
    "commutator_norm",
    "compact_open_distance",
    "complete_support",
    "connes_metric_on_Y",
    "connes_oracle",
    "connes_oracle_matrix",
    "dim_E",
    "dixmier_proxy",
    "gen_cantor",
    "gen_circle",
    "graph_metric",
    "hausdorff_bound_check",
    "hausdorff_reference",
    "incidence_graph",
    "is_regular",
    "is_simple",
    "lipschitz_distance",
    "load_space",
    "local_density_profile",
    "perturb_simple_regular",
    "rebuild_on_connes",
    "regularize",
    "relative_bounding_radius",
    "save_space",
    "spectral_dim_estimate",
    "spectrum_of_ds",
    "uniform_distance",
    "uniform_metric_distance",
    "validate_bounded",
    "weak_lp_distance",
]
