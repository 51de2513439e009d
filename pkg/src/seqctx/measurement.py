"""Dichotomic observables, projector partitions, and sequential measurements.

A first measurement either keeps each eigenspace whole (Lüders update,
"DP") or splits it into finer orthogonal blocks (von Neumann-type update,
"DB").  The second measurement of a sequence is always the coarse one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .linalg import (
    TOL,
    DensityMatrix,
    DimensionError,
    as_operator,
    is_hermitian,
    is_involutory,
    max_dev,
)


class MeasurementError(ValueError):
    pass


def _rank(p: np.ndarray) -> int:
    return int(round(float(np.trace(p).real)))


@dataclass(frozen=True, eq=False)
class DichotomicObservable:
    op: np.ndarray
    p_plus: np.ndarray
    p_minus: np.ndarray

    @property
    def dim(self) -> int:
        return self.op.shape[0]

    @property
    def rank_plus(self) -> int:
        return _rank(self.p_plus)

    @property
    def rank_minus(self) -> int:
        return _rank(self.p_minus)

    @property
    def balanced(self) -> bool:
        return self.rank_plus == self.rank_minus

    def projector(self, sign: int) -> np.ndarray:
        return self.p_plus if sign > 0 else self.p_minus


def eigen_partition(op, tol: float = TOL) -> DichotomicObservable:
    """Split a Hermitian involution into its +1 and -1 eigenprojectors."""
    op = as_operator(op)
    if not is_hermitian(op, tol):
        raise MeasurementError("observable is not Hermitian")
    if not is_involutory(op, tol):
        raise MeasurementError("observable is not involutory (eigenvalues must be +1/-1)")
    eye = np.eye(op.shape[0])
    p_plus, p_minus = (eye + op) / 2, (eye - op) / 2
    for name, p in (("+1", p_plus), ("-1", p_minus)):
        if np.trace(p).real < 0.5:
            raise MeasurementError(f"eigenvalue {name} is absent; observable is not dichotomic")
    return DichotomicObservable(op, p_plus, p_minus)


class Block(NamedTuple):
    sign: int
    projector: np.ndarray
    rank: int


@dataclass(frozen=True, eq=False)
class ProjectorPartition:
    blocks: tuple[Block, ...]

    @property
    def k(self) -> int:
        return len(self.blocks)

    @property
    def dim(self) -> int:
        return self.blocks[0].projector.shape[0]

    @property
    def is_rank_one(self) -> bool:
        return all(b.rank == 1 for b in self.blocks)

    def signed_sum(self) -> np.ndarray:
        return sum(b.sign * b.projector for b in self.blocks)

    def sector(self, sign: int) -> list[np.ndarray]:
        return [b.projector for b in self.blocks if b.sign == sign]

    def validate(self, observable: DichotomicObservable | None = None, tol: float = TOL) -> None:
        """Raise ``MeasurementError`` unless the blocks form a valid partition."""
        if not self.blocks:
            raise MeasurementError("partition has no blocks")
        d = self.dim
        if not 2 <= self.k <= d:
            raise MeasurementError(f"partition has {self.k} blocks; need 2 <= k <= {d}")
        eye = np.eye(d)
        for i, b in enumerate(self.blocks):
            p = b.projector
            if p.shape != (d, d):
                raise MeasurementError(f"block {i} has shape {p.shape}")
            if b.sign not in (1, -1):
                raise MeasurementError(f"block {i} has sign {b.sign}")
            if max_dev(p - p.conj().T) > tol or max_dev(p @ p - p) > tol:
                raise MeasurementError(f"block {i} is not an orthogonal projector")
            if b.rank < 1 or abs(np.trace(p).real - b.rank) > tol:
                raise MeasurementError(f"block {i} rank mismatch")
        for i in range(self.k):
            for j in range(i + 1, self.k):
                if max_dev(self.blocks[i].projector @ self.blocks[j].projector) > tol:
                    raise MeasurementError(f"blocks {i} and {j} are not orthogonal")
        if max_dev(sum(b.projector for b in self.blocks) - eye) > tol:
            raise MeasurementError("blocks do not sum to the identity")
        if observable is not None and max_dev(self.signed_sum() - observable.op) > tol:
            raise MeasurementError("signed sum of blocks does not reproduce the observable")


def coarse_partition(obs: DichotomicObservable) -> ProjectorPartition:
    return ProjectorPartition(
        (Block(1, obs.p_plus, obs.rank_plus), Block(-1, obs.p_minus, obs.rank_minus))
    )


def refine_partition(
    obs: DichotomicObservable, aux: Sequence, tol: float = TOL
) -> ProjectorPartition:
    """Joint eigenspaces of ``obs`` and a commuting family of auxiliary involutions."""
    aux = [as_operator(a) for a in aux]
    d = obs.dim
    for i, a in enumerate(aux):
        if a.shape != (d, d):
            raise DimensionError(f"aux[{i}] has shape {a.shape}, expected {(d, d)}")
        if not is_hermitian(a, tol):
            raise MeasurementError(f"aux[{i}] is not Hermitian")
        if not is_involutory(a, tol):
            raise MeasurementError(f"aux[{i}] is not involutory")
        if max_dev(a @ obs.op - obs.op @ a) > tol:
            raise MeasurementError(f"aux[{i}] does not commute with the observable")
        for j in range(i):
            if max_dev(a @ aux[j] - aux[j] @ a) > tol:
                raise MeasurementError(f"aux[{j}] and aux[{i}] do not commute")

    eye = np.eye(d)
    blocks = [(1, obs.p_plus), (-1, obs.p_minus)]
    for a in aux:
        split = []
        for sign, p in blocks:
            for s in (1, -1):
                q = p @ (eye + s * a) / 2
                if np.trace(q).real > 0.5:
                    split.append((sign, q))
        blocks = split
    partition = ProjectorPartition(tuple(Block(s, p, _rank(p)) for s, p in blocks))
    partition.validate(obs, tol)
    return partition


def split_partition(
    obs: DichotomicObservable, k: int, basis: np.ndarray | None = None, tol: float = TOL
) -> ProjectorPartition:
    """Split each eigenspace into ``k/2`` blocks of equal rank.

    ``basis`` (columns) must diagonalise ``obs``; by default an eigenbasis from
    ``numpy.linalg.eigh`` is used.
    """
    if k < 2 or k % 2:
        raise MeasurementError(f"k={k}: need an even number of blocks >= 2")
    per_sector = k // 2
    if basis is None:
        _, basis = np.linalg.eigh(obs.op)
    basis = np.asarray(basis, dtype=complex)
    values = np.einsum("ix,ij,jx->x", basis.conj(), obs.op, basis).real
    blocks = []
    for sign in (1, -1):
        cols = basis[:, np.abs(values - sign) < 1e-6]
        m = cols.shape[1]
        if m % per_sector:
            raise MeasurementError(
                f"eigenspace of {sign:+d} has rank {m}, not divisible into {per_sector} equal blocks"
            )
        size = m // per_sector
        for start in range(0, m, size):
            v = cols[:, start : start + size]
            blocks.append(Block(sign, v @ v.conj().T, size))
    partition = ProjectorPartition(tuple(blocks))
    partition.validate(obs, tol)
    return partition


def generating_involutions(partition: ProjectorPartition) -> list[np.ndarray]:
    """Commuting involutions whose joint eigenspaces with the observable are the blocks.

    Each sector must hold the same power-of-two number of blocks; bit ``j`` of
    the block index within its sector sets the eigenvalue of involution ``j``.
    """
    plus, minus = partition.sector(1), partition.sector(-1)
    m = len(plus)
    if len(minus) != m or m & (m - 1):
        raise MeasurementError("sectors need equal, power-of-two block counts")
    gens = []
    for bit in range(m.bit_length() - 1):
        gens.append(
            sum(
                (-1) ** ((x >> bit) & 1) * (plus[x] + minus[x])
                for x in range(m)
            )
        )
    return gens


@dataclass(frozen=True, eq=False)
class MeasurementScheme:
    kind: str
    partition: ProjectorPartition

    @classmethod
    def dp(cls, obs: DichotomicObservable) -> MeasurementScheme:
        return cls("dp", coarse_partition(obs))

    @classmethod
    def db(cls, partition: ProjectorPartition) -> MeasurementScheme:
        return cls("db", partition)

    @property
    def label(self) -> str:
        return "DP" if self.kind == "dp" else f"DB({self.partition.k})"


def _check_dims(state: DensityMatrix, d: int) -> None:
    if state.dim != d:
        raise DimensionError(f"state dimension {state.dim} does not match operator dimension {d}")


def dp_channel(state: DensityMatrix, obs: DichotomicObservable) -> DensityMatrix:
    _check_dims(state, obs.dim)
    rho = state.op
    out = obs.p_plus @ rho @ obs.p_plus + obs.p_minus @ rho @ obs.p_minus
    return DensityMatrix(out, state.tol)


def db_channel(state: DensityMatrix, partition: ProjectorPartition) -> DensityMatrix:
    _check_dims(state, partition.dim)
    rho = state.op
    out = sum(b.projector @ rho @ b.projector for b in partition.blocks)
    return DensityMatrix(out, state.tol)


def joint_probability(
    state: DensityMatrix,
    first: MeasurementScheme,
    a: int,
    second: DichotomicObservable,
    b: int,
    tol: float = TOL,
) -> float:
    """Probability of outcome ``a`` then ``b`` when ``first`` precedes a coarse ``second``."""
    _check_dims(state, first.partition.dim)
    _check_dims(state, second.dim)
    rho = state.op
    b_proj = second.projector(b)
    p = sum(
        np.trace(blk.projector @ rho @ blk.projector @ b_proj)
        for blk in first.partition.blocks
        if blk.sign == a
    )
    p = float(np.real(p))
    if p < -tol or p > 1 + tol:
        raise MeasurementError(f"joint probability {p} outside [0, 1]")
    return p


def sequential_correlation(
    state: DensityMatrix, first: MeasurementScheme, second: DichotomicObservable, tol: float = TOL
) -> float:
    return sum(
        a * b * joint_probability(state, first, a, second, b, tol)
        for a in (1, -1)
        for b in (1, -1)
    )


def db_dp_cross_term(
    state: DensityMatrix,
    partition: ProjectorPartition,
    second: DichotomicObservable,
    tol: float = TOL,
) -> float:
    """Off-diagonal sandwich term separating the coarse and rank-one correlations.

    Computed from the explicit double sum over distinct blocks of each sector;
    the coarse correlation minus this term equals the fine-grained one.  Only
    balanced observables (equal +1 and -1 degeneracy) are accepted.
    """
    _check_dims(state, partition.dim)
    d = partition.dim
    plus, minus = partition.sector(1), partition.sector(-1)
    m_plus = sum(b.rank for b in partition.blocks if b.sign == 1)
    if 2 * m_plus != d:
        raise MeasurementError(
            f"cross term needs balanced degeneracy {d // 2}/{d // 2}, got {m_plus}/{d - m_plus}"
        )
    rho = state.op
    total = np.zeros((d, d), dtype=complex)
    for sign, sector in ((1, plus), (-1, minus)):
        for x, px in enumerate(sector):
            rest = sum((q for y, q in enumerate(sector) if y != x), np.zeros((d, d)))
            total += sign * (px @ rho @ rest)
    value = np.trace(total @ second.op)
    if abs(value.imag) > tol:
        raise MeasurementError(f"cross term has imaginary part {value.imag:.3g}")
    return float(value.real)
