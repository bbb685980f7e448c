"""Dense symmetric matrices, eigenvalue helpers, and Loewner-order predicates.

Measurement matrices and their directional derivatives are small (a few
hundred rows at most), so everything here is dense. All functions are pure
and never mutate their inputs; concurrent use is safe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SymMatrix",
    "as_sym_matrix",
    "lambda_max",
    "spectral_norm",
    "loewner_leq",
]


@dataclass(frozen=True, eq=False)
class SymMatrix:
    """Real symmetric matrix with exactly symmetric storage.

    The constructor symmetrizes its input, ``0.5 * (A + A.T)``, so
    ``entries[i, j] == entries[j, i]`` holds exactly, and marks the backing
    array read-only.
    """

    entries: np.ndarray

    def __post_init__(self) -> None:
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if a.shape[0] < 1:
            raise ValueError("matrix dimension must be at least 1")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix entries must be finite")
        a = 0.5 * (a + a.T)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @staticmethod
    def identity(m: int) -> "SymMatrix":
        return SymMatrix(np.eye(m))

    @staticmethod
    def zeros(m: int) -> "SymMatrix":
        return SymMatrix(np.zeros((m, m)))

    def leading_block(self, m: int) -> "SymMatrix":
        """Leading principal m-by-m submatrix (restriction to the first
        m measurement channels)."""
        if not 1 <= m <= self.dim:
            raise ValueError(f"block size {m} out of range for dim {self.dim}")
        return SymMatrix(self.entries[:m, :m])

    def eigenvalues(self) -> np.ndarray:
        """All eigenvalues in ascending order."""
        return np.linalg.eigvalsh(self.entries)

    def __add__(self, other: "SymMatrix") -> "SymMatrix":
        _check_same_dim(self, other)
        return SymMatrix(self.entries + other.entries)

    def __sub__(self, other: "SymMatrix") -> "SymMatrix":
        _check_same_dim(self, other)
        return SymMatrix(self.entries - other.entries)

    def __neg__(self) -> "SymMatrix":
        return SymMatrix(-self.entries)

    def __mul__(self, scalar: float) -> "SymMatrix":
        return SymMatrix(self.entries * float(scalar))

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"SymMatrix(dim={self.dim})"


def as_sym_matrix(a) -> SymMatrix:
    """Coerce an array-like (or pass through a SymMatrix) to SymMatrix."""
    if isinstance(a, SymMatrix):
        return a
    return SymMatrix(np.asarray(a, dtype=float))


def _check_same_dim(a: SymMatrix, b: SymMatrix) -> None:
    if a.dim != b.dim:
        raise ValueError(f"incompatible operands: dims {a.dim} and {b.dim}")


def lambda_max(a) -> float:
    """Largest eigenvalue of a symmetric matrix.

    Computed with a dense symmetric eigensolver; accuracy is at machine
    precision relative to the spectral norm, well inside the 1e-12
    relative tolerance the callers rely on.
    """
    return float(as_sym_matrix(a).eigenvalues()[-1])


def spectral_norm(a) -> float:
    """Spectral norm max(|lambda_min|, |lambda_max|) of a symmetric matrix."""
    eigs = as_sym_matrix(a).eigenvalues()
    return float(max(abs(eigs[0]), abs(eigs[-1])))


def loewner_leq(a, b, slack: float = 0.0) -> bool:
    """Test A <= B in the Loewner order, up to ``slack``.

    True iff lambda_max(A - B) <= slack. ``slack=0`` is the exact
    semidefinite order; a small positive slack absorbs floating-point
    noise in matrices that are equal or ordered only up to round-off.
    """
    if slack < 0:
        raise ValueError("slack must be nonnegative")
    a = as_sym_matrix(a)
    b = as_sym_matrix(b)
    _check_same_dim(a, b)
    return lambda_max(a - b) <= slack
