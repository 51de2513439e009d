"""Dense complex operator helpers, algebraic predicates, and density matrices.

Operators are plain square ``numpy`` arrays of complex dtype.  All tolerance
checks use the largest absolute entry of the deviation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TOL = 1e-9


class DimensionError(ValueError):
    pass


class NotHermitianError(ValueError):
    pass


class InvalidStateError(ValueError):
    pass


def as_operator(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("operator has non-finite entries")
    return a


def _check_same(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")


def mul(a, b) -> np.ndarray:
    a, b = as_operator(a), as_operator(b)
    _check_same(a, b)
    return a @ b


def adjoint(a) -> np.ndarray:
    return as_operator(a).conj().T


def trace(a) -> complex:
    return complex(np.trace(as_operator(a)))


def tensor(a, b) -> np.ndarray:
    return np.kron(as_operator(a), as_operator(b))


def commutator(a, b) -> np.ndarray:
    a, b = as_operator(a), as_operator(b)
    _check_same(a, b)
    return a @ b - b @ a


def anticommutator(a, b) -> np.ndarray:
    a, b = as_operator(a), as_operator(b)
    _check_same(a, b)
    return a @ b + b @ a


def max_dev(a) -> float:
    a = np.asarray(a)
    return float(np.abs(a).max()) if a.size else 0.0


def is_hermitian(a, tol: float = TOL) -> bool:
    a = as_operator(a)
    return max_dev(a - a.conj().T) <= tol


def is_involutory(a, tol: float = TOL) -> bool:
    a = as_operator(a)
    return max_dev(a @ a - np.eye(a.shape[0])) <= tol


def is_projector(a, tol: float = TOL) -> bool:
    a = as_operator(a)
    return is_hermitian(a, tol) and max_dev(a @ a - a) <= tol


def is_density(a, tol: float = TOL) -> bool:
    a = as_operator(a)
    if not is_hermitian(a, tol):
        return False
    if abs(np.trace(a) - 1) > tol:
        return False
    return float(np.linalg.eigvalsh((a + a.conj().T) / 2).min()) >= -tol


def commute(a, b, tol: float = TOL) -> bool:
    return max_dev(commutator(a, b)) <= tol


def anticommute(a, b, tol: float = TOL) -> bool:
    return max_dev(anticommutator(a, b)) <= tol


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A validated density operator; construction fails on invalid input."""

    op: np.ndarray
    tol: float = TOL

    def __post_init__(self):
        op = as_operator(self.op)
        if not is_hermitian(op, self.tol):
            raise InvalidStateError("state is not Hermitian")
        tr = np.trace(op)
        if abs(tr - 1) > self.tol:
            raise InvalidStateError(f"state trace is {tr.real:.3g}, expected 1")
        lowest = float(np.linalg.eigvalsh((op + op.conj().T) / 2).min())
        if lowest < -self.tol:
            raise InvalidStateError(f"state has negative eigenvalue {lowest:.3g}")
        op = op.copy()
        op.setflags(write=False)
        object.__setattr__(self, "op", op)

    @classmethod
    def pure(cls, psi, tol: float = TOL) -> DensityMatrix:
        psi = np.asarray(psi, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()), tol)

    @classmethod
    def maximally_mixed(cls, dim: int) -> DensityMatrix:
        return cls(np.eye(dim, dtype=complex) / dim)

    @property
    def dim(self) -> int:
        return self.op.shape[0]

    def purity(self) -> float:
        return float(np.trace(self.op @ self.op).real)

    def is_pure(self, tol: float = TOL) -> bool:
        return abs(self.purity() - 1) <= tol


def expectation(state: DensityMatrix, op, tol: float = TOL) -> float:
    """``Tr(rho op)`` for Hermitian ``op``; rejects a non-negligible imaginary part."""
    op = as_operator(op)
    _check_same(state.op, op)
    if not is_hermitian(op, tol):
        raise NotHermitianError("expectation requires a Hermitian operator")
    value = np.trace(state.op @ op)
    if abs(value.imag) > tol:
        raise NotHermitianError(f"imaginary residue {value.imag:.3g} in expectation")
    return float(value.real)


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Ginibre-ensemble random state (full rank unless ``rank`` is given)."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return DensityMatrix(rho / np.trace(rho).real)


def symmetrize(a: np.ndarray) -> np.ndarray:
    return (a + a.conj().T) / 2
