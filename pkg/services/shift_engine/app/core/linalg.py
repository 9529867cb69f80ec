"""
Dense linear algebra for the truncated sequence space.

Vectors are 1-D float64 numpy arrays. A Subspace holds an orthonormal basis as
the columns of a (ambient_dim, rank) matrix. Row-wise helpers operate on
particle matrices of shape (n, d) and never mix rows, so a particle's result
does not depend on its position in the ensemble.
"""
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DegenerateError, DimensionMismatchError

Vector = NDArray[np.float64]

ORTHONORMAL_TOL = 1e-10


def as_vector(values: ArrayLike) -> Vector:
    """Coerce to a finite 1-D float64 vector with at least one entry."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise ValueError(f"expected a non-empty 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    return v


def _check_dims(u: Vector, v: Vector, what: str = "vectors") -> None:
    if u.shape[-1] != v.shape[-1]:
        raise DimensionMismatchError(u.shape[-1], v.shape[-1], what)


def inner(u: ArrayLike, v: ArrayLike) -> float:
    """Euclidean inner product Σ uᵢvᵢ."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    _check_dims(u, v)
    return float(np.dot(u, v))


def norm(v: ArrayLike) -> float:
    return float(np.linalg.norm(np.asarray(v, dtype=np.float64)))


def row_inner(rows: NDArray[np.float64], v: Vector) -> NDArray[np.float64]:
    """Inner product of every row with v, computed row by row."""
    _check_dims(rows, v, "particles and direction")
    return (rows * v).sum(axis=1)


def row_norms(rows: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.sqrt((rows * rows).sum(axis=1))


def normalize(v: ArrayLike) -> Vector:
    """Return v/‖v‖; a zero (or non-finite) norm is a degenerate particle."""
    v = np.asarray(v, dtype=np.float64)
    n = norm(v)
    if n == 0.0 or not np.isfinite(n):
        raise DegenerateError("degenerate particle: cannot normalize a zero vector")
    return v / n


@dataclass(frozen=True)
class Subspace:
    """Linear subspace with orthonormal basis columns."""

    basis: NDArray[np.float64]

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=np.float64)
        if b.ndim != 2 or b.shape[1] < 1 or b.shape[1] > b.shape[0]:
            raise ValueError(f"basis must be (ambient_dim, rank) with 1 <= rank <= ambient_dim, got {b.shape}")
        object.__setattr__(self, "basis", b)

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def gram(self) -> NDArray[np.float64]:
        return self.basis.T @ self.basis

    def orthonormality_error(self) -> float:
        return float(np.max(np.abs(self.gram() - np.eye(self.rank))))

    def coordinates(self, v: ArrayLike) -> Vector:
        """Coefficients ⟨v, b_k⟩ for every basis vector."""
        v = np.asarray(v, dtype=np.float64)
        if v.shape[-1] != self.ambient_dim:
            raise DimensionMismatchError(v.shape[-1], self.ambient_dim, "vector and subspace")
        return v @ self.basis

    def lift(self, coords: ArrayLike) -> Vector:
        """Map subspace coordinates back to the ambient space."""
        return np.asarray(coords, dtype=np.float64) @ self.basis.T


def project(v: ArrayLike, s: Subspace) -> Vector:
    """Orthogonal projection Σ_k ⟨v, b_k⟩ b_k."""
    return s.lift(s.coordinates(v))


def orthonormalize(vectors: Sequence[ArrayLike]) -> Subspace:
    """
    Gram-Schmidt with one re-orthogonalization pass.

    Keeps the orientation of the inputs: the k-th basis vector has a positive
    inner product with the k-th input. Raises DegenerateError when the inputs
    are linearly dependent.
    """
    cols = []
    for raw in vectors:
        w = np.array(raw, dtype=np.float64)
        for _ in range(2):
            for q in cols:
                w = w - np.dot(q, w) * q
        n = np.linalg.norm(w)
        if n <= 1e-12 * max(1.0, np.linalg.norm(raw)):
            raise DegenerateError("cannot orthonormalize linearly dependent vectors")
        cols.append(w / n)
    if not cols:
        raise ValueError("at least one vector is required")
    return Subspace(np.column_stack(cols))


def span(vectors: Iterable[ArrayLike]) -> Subspace:
    return orthonormalize(list(vectors))


def haar_subspace(ambient_dim: int, rank: int, seed: int) -> Subspace:
    """
    Uniformly random subspace of the given rank.

    Householder QR of an i.i.d. standard normal matrix, with the column signs
    fixed by diag(R) so the distribution is Haar. Deterministic given seed.
    """
    if ambient_dim < 1:
        raise ValueError("ambient_dim must be positive")
    if rank < 1 or rank > ambient_dim:
        raise ValueError(f"rank must satisfy 1 <= rank <= ambient_dim, got rank={rank}, ambient_dim={ambient_dim}")
    rng = np.random.default_rng(seed)
    gaussian = rng.standard_normal((ambient_dim, rank))
    q, r = np.linalg.qr(gaussian)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    basis = q * signs
    subspace = Subspace(basis)
    if subspace.orthonormality_error() > ORTHONORMAL_TOL:
        # second pass recovers orthonormality lost to an ill-conditioned draw
        q2, r2 = np.linalg.qr(basis)
        subspace = Subspace(q2 * np.sign(np.diag(r2)))
    return subspace
