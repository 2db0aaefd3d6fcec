"""Symmetric positive (semi)definite matrices and the distances between them.

The :class:`SpdMatrix` value type carries its eigendecomposition, computed
once at construction and reused by every spectral operation.  Four distances
are provided: squared Frobenius, Euclidean on half-vectorizations,
log-Euclidean, and the Procrustes size-and-shape distance on symmetric
square roots.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from .exceptions import (
    DecompositionError,
    DimensionMismatchError,
    NotPositiveDefiniteError,
)

__all__ = [
    "PSD_RTOL",
    "EigPair",
    "SpdMatrix",
    "eig_sym",
    "logm",
    "expm",
    "sqrtm_psd",
    "vech",
    "dist_frobenius",
    "dist_euclidean",
    "dist_log_euclidean",
    "dist_procrustes",
    "procrustes_rotation",
    "project_to_spd",
]

# Round-off negatives down to -PSD_RTOL * lambda_max are accepted as PSD.
PSD_RTOL = 1e-10


class EigPair(NamedTuple):
    """Eigendecomposition with eigenvalues sorted in descending order."""

    values: np.ndarray
    vectors: np.ndarray


def _symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def _eigh_desc(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric eigendecomposition, eigenvalues descending."""
    try:
        values, vectors = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(f"eigendecomposition failed: {exc}") from exc
    return np.ascontiguousarray(values[::-1]), np.ascontiguousarray(vectors[:, ::-1])


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class SpdMatrix:
    """Immutable symmetric PSD matrix with a cached eigendecomposition.

    The constructor symmetrizes its input via ``(A + A.T) / 2`` (absorbing
    round-off asymmetry from upstream arithmetic), eigendecomposes it, and
    rejects matrices whose smallest eigenvalue falls below
    ``-PSD_RTOL * lambda_max``.  Strict positive definiteness is *not*
    required here; operations that need it (``logm``, inversion) check for
    themselves.
    """

    __slots__ = ("_data", "_eig")

    def __init__(self, data: np.ndarray | Sequence[Sequence[float]]) -> None:
        a = np.array(data, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise DimensionMismatchError(
                f"expected a nonempty square matrix, got shape {a.shape}"
            )
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix entries must be finite")
        a = _symmetrize(a)
        values, vectors = _eigh_desc(a)
        lmax = max(float(values[0]), 0.0)
        if values[-1] < -PSD_RTOL * lmax:
            raise NotPositiveDefiniteError(
                f"smallest eigenvalue {values[-1]:.6e} is below the PSD "
                f"tolerance {-PSD_RTOL * lmax:.6e}"
            )
        self._data = _freeze(a)
        self._eig = EigPair(_freeze(values), _freeze(vectors))

    @classmethod
    def _from_eig(cls, values: np.ndarray, vectors: np.ndarray) -> "SpdMatrix":
        # Fast path for operations that already hold a valid decomposition
        # (spectral maps, block assembly).  Caller guarantees orthonormal
        # vectors and PSD-admissible values.
        values = np.asarray(values, dtype=float)
        vectors = np.asarray(vectors, dtype=float)
        order = np.argsort(-values, kind="stable")
        values = np.ascontiguousarray(values[order])
        vectors = np.ascontiguousarray(vectors[:, order])
        data = _symmetrize((vectors * values) @ vectors.T)
        obj = object.__new__(cls)
        obj._data = _freeze(data)
        obj._eig = EigPair(_freeze(values), _freeze(vectors))
        return obj

    @property
    def dim(self) -> int:
        return self._data.shape[0]

    @property
    def data(self) -> np.ndarray:
        """The dense matrix (read-only view)."""
        return self._data

    def __array__(self, dtype=None) -> np.ndarray:
        return self._data if dtype is None else self._data.astype(dtype)

    @property
    def eig(self) -> EigPair:
        return self._eig

    def __repr__(self) -> str:  # pragma: no cover
        return f"SpdMatrix(dim={self.dim}, lambda_range=[{self._eig.values[-1]:.4g}, {self._eig.values[0]:.4g}])"


def eig_sym(a: SpdMatrix) -> EigPair:
    """Cached eigendecomposition of ``a``, eigenvalues descending."""
    return a.eig


def logm(a: SpdMatrix) -> np.ndarray:
    """Matrix logarithm of a strictly SPD matrix (symmetric result)."""
    values, vectors = a.eig
    if values[-1] <= 0.0:
        raise NotPositiveDefiniteError(
            f"matrix logarithm requires strictly positive eigenvalues "
            f"(smallest is {values[-1]:.6e})"
        )
    return _symmetrize((vectors * np.log(values)) @ vectors.T)


def expm(s: np.ndarray) -> SpdMatrix:
    """Matrix exponential of a symmetric matrix; the result is strictly SPD."""
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise ValueError("matrix entries must be finite")
    values, vectors = _eigh_desc(_symmetrize(s))
    return SpdMatrix._from_eig(np.exp(values), vectors)


def sqrtm_psd(a: SpdMatrix) -> np.ndarray:
    """Symmetric PSD square root (round-off negatives clipped to zero)."""
    values, vectors = a.eig
    root = np.sqrt(np.maximum(values, 0.0))
    return _symmetrize((vectors * root) @ vectors.T)


def vech(a: SpdMatrix | np.ndarray) -> np.ndarray:
    """Half-vectorization: lower triangle including the diagonal, row-major."""
    a = np.asarray(a, dtype=float)
    rows, cols = np.tril_indices(a.shape[0])
    return a[rows, cols]


def _check_pair(a: SpdMatrix, b: SpdMatrix) -> None:
    if not isinstance(a, SpdMatrix) or not isinstance(b, SpdMatrix):
        raise TypeError("distances are defined on SpdMatrix operands")
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dimension mismatch: {a.dim} vs {b.dim}")


def dist_frobenius(a: SpdMatrix, b: SpdMatrix) -> float:
    """Squared Frobenius norm of the difference."""
    _check_pair(a, b)
    return float(np.sum((a.data - b.data) ** 2))


def dist_euclidean(a: SpdMatrix, b: SpdMatrix) -> float:
    """l2 distance between half-vectorizations (off-diagonals counted once)."""
    _check_pair(a, b)
    return float(np.linalg.norm(vech(a.data) - vech(b.data)))


def dist_log_euclidean(a: SpdMatrix, b: SpdMatrix) -> float:
    """Frobenius distance between matrix logarithms; both operands strictly SPD."""
    _check_pair(a, b)
    return float(np.linalg.norm(logm(a) - logm(b)))


def procrustes_rotation(l1: np.ndarray, l2: np.ndarray) -> np.ndarray:
    """Orthogonal matrix R minimizing ``||l1 - l2 @ R||_F``.

    Computed from the SVD of ``l2.T @ l1``; may include reflections.  Singular
    vector signs are fixed (largest-magnitude entry of each left vector made
    positive) so the factorization backing R is deterministic.
    """
    l1 = np.asarray(l1, dtype=float)
    l2 = np.asarray(l2, dtype=float)
    if l1.shape != l2.shape or l1.ndim != 2 or l1.shape[0] != l1.shape[1]:
        raise DimensionMismatchError(
            f"expected square matrices of equal shape, got {l1.shape} and {l2.shape}"
        )
    try:
        u, _, vt = np.linalg.svd(l2.T @ l1)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(f"SVD failed: {exc}") from exc
    flip = np.where(u[np.argmax(np.abs(u), axis=0), np.arange(u.shape[1])] < 0, -1.0, 1.0)
    u = u * flip
    vt = vt * flip[:, None]
    return u @ vt


def dist_procrustes(a: SpdMatrix, b: SpdMatrix) -> float:
    """Size-and-shape distance: ``min_R ||L_a - L_b R||_F`` over orthogonal R."""
    _check_pair(a, b)
    la = sqrtm_psd(a)
    lb = sqrtm_psd(b)
    return float(np.linalg.norm(la - lb @ procrustes_rotation(la, lb)))


def project_to_spd(a: SpdMatrix | np.ndarray, floor: float) -> SpdMatrix:
    """Nearest-SPD projection: eigenvalues clipped from below at ``floor``.

    Accepts any symmetric matrix (arrays are symmetrized first).  Idempotent
    for matrices already at or above the floor, and the cached decomposition
    of the result has ``lambda_min >= floor`` exactly.
    """
    if not (floor > 0.0):
        raise ValueError(f"floor must be positive, got {floor}")
    if isinstance(a, SpdMatrix):
        values, vectors = a.eig
    else:
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatchError(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix entries must be finite")
        values, vectors = _eigh_desc(_symmetrize(a))
    return SpdMatrix._from_eig(np.maximum(values, floor), vectors)
