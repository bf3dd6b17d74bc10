"""Small dense complex-matrix helpers.

Everything here works on plain ``numpy`` arrays of complex dtype. Sizes are
tiny (a few tens of rows at most), so dense storage and SVD-based condition
numbers are affordable everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, SingularBlock, SingularMatrix

#: Matrices whose reciprocal condition number falls below this are singular.
RCOND_THRESHOLD = 1e-12


def cmatrix(M, *, copy: bool = True) -> np.ndarray:
    """Return ``M`` as a read-only 2-D complex array with finite entries."""
    out = np.array(M, dtype=complex, copy=copy)
    if out.ndim == 1:
        out = out[:, None]
    if out.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got {out.ndim}-D input")
    if not np.all(np.isfinite(out)):
        raise ValueError("matrix entries must be finite")
    out.flags.writeable = False
    return out


def rcond(M: np.ndarray) -> float:
    """Reciprocal 2-norm condition number, 0 for exactly singular input."""
    M = np.asarray(M)
    if M.size == 0:
        return 1.0
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[0] == 0.0:
        return 0.0
    return float(sv[-1] / sv[0])


def solve(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``M X = rhs`` with a pivoted LU factorization."""
    lu, piv = scipy.linalg.lu_factor(M, check_finite=False)
    return scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)


def hermitian_check(M, tol: float = 0.0) -> bool:
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"hermitian_check needs a square matrix, got {M.shape}")
    return bool(np.max(np.abs(M - M.conj().T), initial=0.0) <= tol)


def hermitian_part(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.conj().T)


@dataclass(frozen=True)
class BlockPartition:
    """Square matrix split as ``[[A, B], [C, D]]`` with ``A`` of size m x m."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        for name in "ABCD":
            object.__setattr__(self, name, cmatrix(getattr(self, name)))
        m, p = self.A.shape[0], self.D.shape[0]
        if (
            self.A.shape != (m, m)
            or self.D.shape != (p, p)
            or self.B.shape != (m, p)
            or self.C.shape != (p, m)
        ):
            raise DimensionMismatch(
                "non-conformable blocks: "
                f"A{self.A.shape} B{self.B.shape} C{self.C.shape} D{self.D.shape}"
            )

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.D.shape[0]

    def assemble(self) -> np.ndarray:
        return np.block([[self.A, self.B], [self.C, self.D]])

    @classmethod
    def split(cls, M, m: int) -> "BlockPartition":
        """Partition a square matrix after its first ``m`` rows and columns."""
        M = np.asarray(M, dtype=complex)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise DimensionMismatch(f"cannot partition non-square {M.shape}")
        if not 0 < m < M.shape[0]:
            raise DimensionMismatch(f"split index {m} outside (0, {M.shape[0]})")
        return cls(M[:m, :m], M[:m, m:], M[m:, :m], M[m:, m:])


def schur_complement(part: BlockPartition) -> np.ndarray:
    """Return ``D - C A^{-1} B``.

    Raises:
        SingularBlock: if ``A`` is numerically singular.
    """
    rc = rcond(part.A)
    if rc < RCOND_THRESHOLD:
        raise SingularBlock(f"leading block is singular (rcond={rc:.3e})")
    return part.D - part.C @ solve(part.A, part.B)


def block_inverse(part: BlockPartition) -> BlockPartition:
    """Invert a partitioned matrix blockwise.

    With ``S = D - C A^{-1} B`` the inverse is::

        [[A^{-1} + A^{-1} B S^{-1} C A^{-1},  -A^{-1} B S^{-1}],
         [-S^{-1} C A^{-1},                    S^{-1}         ]]
    """
    rc = rcond(part.assemble())
    if rc < RCOND_THRESHOLD:
        raise SingularMatrix(f"matrix is singular (rcond={rc:.3e})")
    try:
        S = schur_complement(part)
    except SingularBlock as exc:
        raise SingularMatrix(str(exc)) from exc
    AinvB = solve(part.A, part.B)
    CAinv = solve(part.A.T, part.C.T).T
    L = solve(S, np.eye(part.p, dtype=complex))
    J = -AinvB @ L
    K = -L @ CAinv
    I = solve(part.A, np.eye(part.m, dtype=complex)) - J @ CAinv
    return BlockPartition(I, J, K, L)
