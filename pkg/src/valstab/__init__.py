"""Exact valuative-stability invariants of polarised toric varieties."""

from .invariants import (
    InvariantReport,
    VolumeProfile,
    beta_direct,
    beta_fano_identity_check,
    beta_rewritten,
    delta_toric,
    invariant_report,
    j_invariant,
    nef_thresholds,
    s_invariant,
    slope_mu,
    tau,
    vol_derivative,
    volume_profile,
    zeta_toric,
    zeta_ud,
)
from .toric import (
    DivisorClass,
    ToricValuation,
    ToricVariety,
    anticanonical,
    canonical_class,
    enumerate_valuations,
    intersection_number,
    is_ample,
    is_big,
    is_nef,
    load_variety,
    log_discrepancy,
    parse_divisor,
    parse_valuation,
    section_polytope,
    standard_variety,
    volume,
)

__version__ = "0.1.0"

__all__ = [
    "InvariantReport", "VolumeProfile", "beta_direct", "beta_fano_identity_check",
    "beta_rewritten", "delta_toric", "invariant_report", "j_invariant", "nef_thresholds",
    "s_invariant", "slope_mu", "tau", "vol_derivative", "volume_profile", "zeta_toric",
    "zeta_ud", "DivisorClass", "ToricValuation", "ToricVariety", "anticanonical",
    "canonical_class", "enumerate_valuations", "intersection_number", "is_ample", "is_big",
    "is_nef", "load_variety", "log_discrepancy", "parse_divisor", "parse_valuation",
    "section_polytope", "standard_variety", "volume",
]
