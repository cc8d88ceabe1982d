"""Small dense complex linear algebra: pivot-free LU, clustered eigendata, nullspaces.

Everything operates on plain ``numpy.ndarray`` with dtype complex128.  Matrices
are small (rank 2 to 12 in practice), so clarity beats asymptotics throughout.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import NotDiagonalizable, ZeroPivot

__all__ = [
    "Normalization",
    "LUFactors",
    "as_cmatrix",
    "lu_decompose",
    "EigenCluster",
    "EigenData",
    "eigen_sorted",
    "nullspace",
    "eig_vector",
    "left_eig_vector",
]


def as_cmatrix(data, shape=None) -> np.ndarray:
    """Validate and convert to a finite complex128 2-d array."""
    m = np.asarray(data, dtype=complex)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    if shape is not None and m.shape != shape:
        raise ValueError(f"expected shape {shape}, got {m.shape}")
    return m


class Normalization(enum.Enum):
    """Which LU factor carries the unit diagonal."""

    UNIT_DIAGONAL_U = "unit_diagonal_u"
    UNIT_DIAGONAL_L = "unit_diagonal_l"


@dataclass(frozen=True)
class LUFactors:
    L: np.ndarray
    U: np.ndarray
    normalization: Normalization

    def recompose(self) -> np.ndarray:
        return self.L @ self.U


def lu_decompose(
    mat,
    normalization: Normalization = Normalization.UNIT_DIAGONAL_U,
    pivot_tol: float = 1e-13,
) -> LUFactors:
    """Pivot-free LU decomposition with an explicit diagonal normalization.

    Row permutation is deliberately not performed: the callers rely on the
    triangular structure being preserved exactly.  A pivot smaller than
    ``pivot_tol`` relative to the matrix scale raises :class:`ZeroPivot`,
    flagging a non-generic parameter point.
    """
    m = as_cmatrix(mat)
    n, nc = m.shape
    if n != nc:
        raise ValueError("lu_decompose requires a square matrix")
    scale = max(np.linalg.norm(m), 1.0)
    a = m.copy()
    # Gaussian elimination storing multipliers; a becomes U with non-unit diagonal.
    lower = np.eye(n, dtype=complex)
    for k in range(n):
        pivot = a[k, k]
        if abs(pivot) <= pivot_tol * scale:
            raise ZeroPivot(k + 1)
        for i in range(k + 1, n):
            f = a[i, k] / pivot
            lower[i, k] = f
            a[i, k:] -= f * a[k, k:]
            a[i, k] = 0.0  # keep structural zeros exact
    if normalization is Normalization.UNIT_DIAGONAL_L:
        L, U = lower, a
        np.fill_diagonal(L, 1.0)
    else:
        # move the diagonal of U into L:  M = (lower D) (D^{-1} a)
        d = np.diag(a).copy()
        L = lower * d[np.newaxis, :]
        U = a / d[:, np.newaxis]
        np.fill_diagonal(U, 1.0)
    L = np.tril(L)
    U = np.triu(U)
    return LUFactors(L=L, U=U, normalization=normalization)


@dataclass(frozen=True)
class EigenCluster:
    value: complex
    multiplicity: int
    vectors: np.ndarray  # n x multiplicity basis of the eigenspace (may be thinner if defective)
    diagonalizable: bool


@dataclass(frozen=True)
class EigenData:
    clusters: tuple[EigenCluster, ...]
    raw_values: np.ndarray = field(repr=False)

    @property
    def values(self) -> list[complex]:
        return [c.value for c in self.clusters]

    @property
    def pairs(self) -> list[tuple[complex, int]]:
        return [(c.value, c.multiplicity) for c in self.clusters]

    def sorted_values_with_multiplicity(self) -> list[complex]:
        out: list[complex] = []
        for c in self.clusters:
            out.extend([c.value] * c.multiplicity)
        return out

    @property
    def diagonalizable(self) -> bool:
        return all(c.diagonalizable for c in self.clusters)


def _lex_key(z: complex) -> tuple[float, float]:
    return (z.real, z.imag)


def eigen_sorted(
    mat,
    tol_eig: float = 1e-9,
    require_diagonalizable: bool = False,
) -> EigenData:
    """Eigenvalues sorted lexicographically on (Re, Im), clustered within ``tol_eig``.

    Each cluster reports its multiplicity, an eigenspace basis, and whether the
    geometric multiplicity matches (``diagonalizable``).
    """
    m = as_cmatrix(mat)
    n = m.shape[0]
    if m.shape[1] != n:
        raise ValueError("eigen_sorted requires a square matrix")
    vals = np.linalg.eigvals(m)
    order = sorted(range(n), key=lambda i: _lex_key(vals[i]))
    vals = vals[order]

    clusters: list[EigenCluster] = []
    i = 0
    while i < n:
        j = i + 1
        while j < n and abs(vals[j] - vals[i]) <= tol_eig:
            j += 1
        group = vals[i:j]
        value = complex(np.mean(group))
        mult = j - i
        vecs = nullspace(m - value * np.eye(n), rtol=max(tol_eig, 1e-12))
        geo = vecs.shape[1]
        diag = geo >= mult
        if require_diagonalizable and not diag:
            raise NotDiagonalizable(
                f"eigenvalue {value} has multiplicity {mult} but eigenspace dimension {geo}"
            )
        clusters.append(
            EigenCluster(value=value, multiplicity=mult, vectors=vecs[:, :mult], diagonalizable=diag)
        )
        i = j
    clusters.sort(key=lambda c: _lex_key(c.value))
    return EigenData(clusters=tuple(clusters), raw_values=vals)


def nullspace(mat, rtol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis of the (numerical) right nullspace, as columns."""
    m = as_cmatrix(mat)
    u, s, vh = np.linalg.svd(m)
    if s.size == 0:
        return np.eye(m.shape[1], dtype=complex)
    cutoff = rtol * max(s[0], 1.0)
    rank = int(np.sum(s > cutoff))
    return vh[rank:].conj().T


def eig_vector(mat, value: complex, tol: float = 1e-8) -> np.ndarray:
    """A right eigenvector for the eigenvalue closest to ``value`` (must be simple)."""
    m = as_cmatrix(mat)
    vals = np.linalg.eigvals(m)
    idx = int(np.argmin(np.abs(vals - value)))
    if abs(vals[idx] - value) > tol * max(1.0, abs(value)):
        raise NotDiagonalizable(f"no eigenvalue of the matrix is close to {value}")
    vecs = nullspace(m - vals[idx] * np.eye(m.shape[0]), rtol=1e-10)
    if vecs.shape[1] != 1:
        raise NotDiagonalizable(f"eigenvalue {value} is not simple")
    return vecs[:, 0]


def left_eig_vector(mat, value: complex, tol: float = 1e-8) -> np.ndarray:
    """A left eigenvector (as a 1-d array) for the eigenvalue closest to ``value``."""
    return eig_vector(as_cmatrix(mat).T, value, tol=tol)
