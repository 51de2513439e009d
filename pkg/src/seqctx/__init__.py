"""Sequential-measurement contextuality: Pauli algebra, measurement channels,
the four-observable functional, dimension witnesses and an observable search."""

from .contextuality import (
    ALGEBRAIC_MAX,
    NONCONTEXTUAL_BOUND,
    SOS_BOUND,
    Scenario,
    ViolationReport,
    db_optimal_formula,
    delta_value,
    noncontextual_bound,
    witness_min_dimension,
)
from .linalg import DensityMatrix
from .measurement import DichotomicObservable, MeasurementScheme, ProjectorPartition
from .pauli import OperatorExpr, PauliWord, parse_expr, to_dense

__all__ = [
    "ALGEBRAIC_MAX",
    "NONCONTEXTUAL_BOUND",
    "SOS_BOUND",
    "DensityMatrix",
    "DichotomicObservable",
    "MeasurementScheme",
    "OperatorExpr",
    "PauliWord",
    "ProjectorPartition",
    "Scenario",
    "ViolationReport",
    "db_optimal_formula",
    "delta_value",
    "noncontextual_bound",
    "parse_expr",
    "to_dense",
    "witness_min_dimension",
]
