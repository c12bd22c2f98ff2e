"""Time-frequency embeddings, outer-measure L^p norms, tent covers, and
wave-packet forms of the Carleson and variational Carleson truncations on
the discretized upper 3-space (y, eta, t)."""

from .geometry import (
    GeometryParams,
    Tent,
    Strip,
    TFGrid,
    classify_point,
    enlarge_tent,
    enlargement_contains,
    q_plus_disjoint,
    strips_disjoint,
    tent_inside_strip,
    tent_region_mask,
    strip_mask,
)
from .wavepackets import build_generators, reconstruct_indicator, xi_lattice
from .embeddings import (
    StoppingSequence,
    SequenceFunction,
    EmbeddedField,
    embed_energy,
    embed_mass,
    embed_var_mass_linear,
    embed_var_mass_sup,
    embed_aux,
    embed_aux_ball,
    maximal_function,
    cz_decompose,
)
from .sizes import (
    SizeSpec,
    local_size,
    generated_size,
    all_local_sizes,
    candidate_scales,
    tent_at,
)
from .outer import (
    greedy_trajectory,
    superlevel_measure,
    outer_lp,
    exact_outer_lp,
    iter_lp_lq,
    NormReport,
    cover_superlevel,
    cover_superlevel_aux,
    mass_project,
    lipschitz_extend,
    stopping_density,
)
from .operators import (
    multiplier_segment,
    carleson,
    var_carleson,
    TruncationLadder,
    var_truncation,
    bilinear_forms,
)
from .harness import (
    Exponents,
    Ensemble,
    conjugate,
    ladder_strong_factor,
    stability_strips,
    verify_duality,
    verify_holder,
    verify_radon_nikodym,
    bound_ratio_sweep,
    verify_interpolation,
    verify_size_control,
    verify_wavepackets,
    write_report,
)

__version__ = "0.1.0"

__all__ = [
    "GeometryParams", "Tent", "Strip", "TFGrid", "classify_point",
    "enlarge_tent", "enlargement_contains", "q_plus_disjoint",
    "strips_disjoint", "tent_inside_strip",
    "tent_region_mask", "strip_mask",
    "build_generators",
    "reconstruct_indicator", "xi_lattice",
    "StoppingSequence", "SequenceFunction", "EmbeddedField",
    "embed_energy", "embed_mass", "embed_var_mass_linear",
    "embed_var_mass_sup", "embed_aux", "embed_aux_ball",
    "maximal_function", "cz_decompose",
    "SizeSpec", "local_size", "generated_size", "all_local_sizes",
    "candidate_scales", "tent_at",
    "greedy_trajectory", "superlevel_measure", "outer_lp", "exact_outer_lp",
    "iter_lp_lq", "NormReport", "cover_superlevel", "cover_superlevel_aux",
    "mass_project", "lipschitz_extend", "stopping_density",
    "multiplier_segment", "carleson", "var_carleson", "TruncationLadder",
    "var_truncation", "bilinear_forms",
    "Exponents", "Ensemble", "conjugate", "ladder_strong_factor",
    "stability_strips", "verify_duality",
    "verify_holder", "verify_radon_nikodym", "bound_ratio_sweep",
    "verify_interpolation", "verify_size_control", "verify_wavepackets",
    "write_report",
]
