"""Recovery and certification for group-sparse and total-variation inverse problems."""

from .certify import (
    CertifyConfig,
    Diagnosis,
    check_quadratic_smooth,
    check_recovered,
    check_sharp,
    check_side_conditions,
    check_stable_sufficient,
    check_unique,
    diagnose,
)
from .errors import DomainError, InvalidInputError, NoCertificateError, ResourceError, SolverFailure
from .groups import GroupPartition, IndexReport, active_sets, group_norm, group_prox
from .operators import AnalysisOperator
from .polyhedra import ConeSpec, cone_is_trivial, forced_zero_projection, lp_maximize
from .solvers import (
    ProblemInstance,
    SolverConfig,
    adversarial_sequence,
    solve_basis_pursuit,
    solve_tikhonov,
    source_coefficient,
    stability_probe,
    verify_tikhonov_optimality,
)

__all__ = [
    "active_sets",
    "adversarial_sequence",
    "AnalysisOperator",
    "CertifyConfig",
    "check_quadratic_smooth",
    "check_recovered",
    "check_sharp",
    "check_side_conditions",
    "check_stable_sufficient",
    "check_unique",
    "cone_is_trivial",
    "ConeSpec",
    "diagnose",
    "Diagnosis",
    "DomainError",
    "forced_zero_projection",
    "group_norm",
    "group_prox",
    "GroupPartition",
    "IndexReport",
    "InvalidInputError",
    "lp_maximize",
    "NoCertificateError",
    "ProblemInstance",
    "ResourceError",
    "solve_basis_pursuit",
    "solve_tikhonov",
    "SolverConfig",
    "SolverFailure",
    "source_coefficient",
    "stability_probe",
    "verify_tikhonov_optimality",
]
