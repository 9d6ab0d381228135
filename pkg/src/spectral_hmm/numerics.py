"""Small dense linear-algebra helpers shared by the learners."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import SpectralInstability

PINV_RCOND = 1e-12
MAX_PERMUTATION_K = 8


@dataclass
class TruncatedSvd:
    U: np.ndarray  # m x k, left singular vectors
    S: np.ndarray  # k, descending
    V: np.ndarray  # n x k, right singular vectors (as columns)

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.S) @ self.V.T


@dataclass
class EigenDecomposition:
    values: np.ndarray   # complex, length k
    vectors: np.ndarray  # complex k x k, columns are right eigenvectors


def truncated_svd(A, k: int) -> TruncatedSvd:
    A = np.asarray(A, dtype=float)
    if not 1 <= k <= min(A.shape):
        raise ValueError(f"rank k={k} out of range for shape {A.shape}")
    U, S, Vt = np.linalg.svd(A, full_matrices=False)
    return TruncatedSvd(U[:, :k], S[:k], Vt[:k].T)


def eigen_general(A) -> EigenDecomposition:
    """Eigenpairs of a real square matrix; no ordering is imposed."""
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise SpectralInstability("matrix has non-finite entries")
    try:
        values, vectors = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:
        raise SpectralInstability(f"eigendecomposition did not converge: {exc}") from exc
    return EigenDecomposition(values.astype(complex), vectors.astype(complex))


def imaginary_mass(values) -> float:
    """Largest imaginary part relative to the spectral radius."""
    values = np.asarray(values)
    radius = np.max(np.abs(values))
    if radius == 0:
        return 0.0
    return float(np.max(np.abs(values.imag)) / radius)


def pseudoinverse(A) -> np.ndarray:
    return np.linalg.pinv(np.asarray(A, dtype=float), rcond=PINV_RCOND)


def random_rotation(k: int, rng=None) -> np.ndarray:
    """Haar-distributed element of SO(k)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.default_rng(rng)
    Z = rng.standard_normal((k, k))
    Q, R = np.linalg.qr(Z)
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def best_permutation_alignment(est, ref):
    """Reorder the columns of ``est`` to best match ``ref``.

    Returns ``(perm, est[:, perm], squared Frobenius error)``. Exhaustive
    search; ties go to the lexicographically smallest permutation.
    """
    est = np.asarray(est, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if est.shape != ref.shape:
        raise ValueError(f"shape mismatch {est.shape} vs {ref.shape}")
    k = est.shape[1]
    if k > MAX_PERMUTATION_K:
        raise ValueError(f"k={k} too large for exhaustive alignment (max {MAX_PERMUTATION_K})")
    # cost[a, b] = ||est[:, a] - ref[:, b]||^2
    cost = ((est[:, :, None] - ref[:, None, :]) ** 2).sum(axis=0)
    best, best_err = None, np.inf
    for perm in itertools.permutations(range(k)):
        err = cost[list(perm), range(k)].sum()
        if err < best_err:
            best, best_err = perm, err
    perm = np.array(best)
    return perm, est[:, perm], float(best_err)


def stochastic_columns(M):
    """Project each column onto the simplex by sign fix, clamp and rescale.

    Columns whose sum is negative are negated first (eigenvectors carry an
    arbitrary sign). Returns ``(matrix, number of clamped entries)``.
    """
    M = np.array(M, dtype=float)
    sums = M.sum(axis=0)
    M[:, sums < 0] *= -1
    negative = M < 0
    M[negative] = 0.0
    sums = M.sum(axis=0)
    empty = sums <= 0
    M[:, empty] = 1.0 / M.shape[0]
    sums[empty] = 1.0
    return M / sums, int(negative.sum())


def stochastic_vector(v):
    M, clamped = stochastic_columns(np.asarray(v, dtype=float)[:, None])
    return M[:, 0], clamped
