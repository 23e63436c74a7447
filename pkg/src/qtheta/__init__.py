"""Quantized theta functions on noncommutative tori, with mirror-duality helpers."""

from .scalar import ComplexField, PAdicField, Coefficient, scalar_mul, scalar_sqrt, log_norm
from .lattice import (
    INFINITE,
    AlternatingPairing,
    CharacterPoint,
    LatticeHom,
    SymmetricPairing,
    coset_reduce,
    coset_reps,
    smith_index,
    smith_normal_form,
)
from .nctorus import (
    FiniteGroupoid,
    GroupRingElement,
    NCTorus,
    TorusMorphism,
    groupoid_convolve,
    make_external_mult,
    make_identity,
    make_mult_n,
    make_mumford,
    make_shift,
    morphism_validate,
    ring_inv,
    ring_mul,
)
from .theta import (
    PeriodLattice,
    ThetaMultiplier,
    ThetaSeries,
    ampleness_gram,
    automorphy_apply,
    certify,
    functional_equation_residual,
    multiplier_compose,
    multiplier_pullback,
    multiplier_solve_pairing,
    multiplier_validate,
    same_automorphy,
    solve_periods,
    theta_basis,
    theta_dimension,
    theta_eval,
    theta_mul,
    theta_pullback,
    theta_series,
)
from .mirror import (
    AbstractTorus,
    FramedTorus,
    complex_structure_from_tau,
    fibration_data,
    framing_from_omega,
    framing_nondegenerate,
    invariant_sublattice,
    mirror_dual,
    monodromy_matrix,
    poincare_dual,
    tau_from_complex_structure,
)

__all__ = [
    "ComplexField",
    "PAdicField",
    "Coefficient",
    "scalar_mul",
    "scalar_sqrt",
    "log_norm",
    "INFINITE",
    "AlternatingPairing",
    "CharacterPoint",
    "LatticeHom",
    "SymmetricPairing",
    "coset_reduce",
    "coset_reps",
    "smith_index",
    "smith_normal_form",
    "FiniteGroupoid",
    "GroupRingElement",
    "NCTorus",
    "TorusMorphism",
    "groupoid_convolve",
    "make_external_mult",
    "make_identity",
    "make_mult_n",
    "make_mumford",
    "make_shift",
    "morphism_validate",
    "ring_inv",
    "ring_mul",
    "PeriodLattice",
    "ThetaMultiplier",
    "ThetaSeries",
    "ampleness_gram",
    "automorphy_apply",
    "certify",
    "functional_equation_residual",
    "multiplier_compose",
    "multiplier_pullback",
    "multiplier_solve_pairing",
    "multiplier_validate",
    "same_automorphy",
    "solve_periods",
    "theta_basis",
    "theta_dimension",
    "theta_eval",
    "theta_mul",
    "theta_pullback",
    "theta_series",
    "AbstractTorus",
    "FramedTorus",
    "complex_structure_from_tau",
    "fibration_data",
    "framing_from_omega",
    "framing_nondegenerate",
    "invariant_sublattice",
    "mirror_dual",
    "monodromy_matrix",
    "poincare_dual",
    "tau_from_complex_structure",
]

__version__ = "0.1.0"
