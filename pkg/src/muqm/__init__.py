"""Finite-resolution quantum states, resolvable entanglement and collapse."""

from .errors import (
    CollapseContractError,
    ConfigError,
    MuqmError,
    NumericDomainError,
    UnsupportedPrecisionError,
)
from .hilbert import (
    MAX_MU,
    MultipartiteState,
    ResolutionParams,
    algorithmic_information,
    basis_state,
    bell,
    discretize,
    effective_dimension,
    ghz,
    hilbert_angle,
    is_resolvable_pair,
    load_state,
    measurement_state,
    product_state,
    random_state,
    save_state,
    w_state,
)
from .entanglement import (
    EntanglementReport,
    SubsetMask,
    chi,
    invariant_count,
    is_computationally_stable,
    island_decomposition,
    lambda_plus,
    reduced_density,
    von_neumann_entropy,
    xi,
    xi_mu,
)
from .collapse import (
    CollapseEvent,
    TriggerBasis,
    born_probabilities,
    collapse,
    mean_post_chi,
    minimal_basis,
    single_index_form,
)

__version__ = "0.1.0"
