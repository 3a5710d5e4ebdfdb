"""Finite-window analysis of (non)uniform exponential stability for x_{n+1} = A_n x_n."""
from .adapted_norms import (
    SequenceWindow,
    adapted_norm,
    admissible_scan,
    growth_table,
    is_uniformly_bounded,
    membership_c00alpha,
    window_alpha_norm,
)
from .certificates import (
    certify_bounded_orbit,
    certify_stability,
    first_peak,
    space_equivalence_evidence,
    theta_sequence,
    verify_bounded_orbit,
    verify_certificate,
    verify_step_chain,
)
from .dynamics import (
    EvolutionCache,
    OperatorFamily,
    build_cache,
    evolution,
    example1_family,
    example2_family,
    geometric_family,
    identity_family,
    matrix_family,
    operator_norm,
)
from .evolution_operators import (
    T_norm,
    apply_G,
    apply_T,
    inverse_norm_bounds,
    sigma_ap_gap,
    solve_G,
    spectral_radius_estimate,
)

__version__ = "0.1.0"
