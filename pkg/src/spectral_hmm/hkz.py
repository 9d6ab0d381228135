"""Spectral recovery of (O, T, pi) from eigenvalues of whitened operators.

For each symbol ``r`` the operator ``C_r = (U^T P3r1[r]) (U^T P31)^+`` is
similar to ``diag(O[r, :])`` with an eigenbasis shared across ``r``. The
eigenvalues are paired across ``r`` by diagonalising one random linear
combination of the ``C_r`` and reading every ``C_r`` in that basis. Several
combinations are drawn and the one with the widest relative eigengap wins,
since a near-repeated eigenvalue makes the shared basis ill-conditioned.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateMoments, DivisionGuard, SpectralInstability
from .moments import MomentSet
from .numerics import (eigen_general, imaginary_mass, pseudoinverse,
                       stochastic_columns, stochastic_vector, truncated_svd)

IMAG_TOL = 1e-6
SIGMA_MIN = 1e-10
PI_FLOOR = 1e-8
OFFDIAG_WARN = 0.1
PAIRING_DRAWS = 10


@dataclass
class HkzEstimate:
    O_hat: np.ndarray
    T_hat: np.ndarray
    pi_hat: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def whitened_operators(moments: MomentSet, U: np.ndarray) -> np.ndarray:
    """Stack of ``C_r`` for every symbol ``r``, shape ``(d, k, k)``."""
    UP31_pinv = pseudoinverse(U.T @ moments.P31)
    return np.einsum("ka,rab,bl->rkl", U.T, moments.P3r1, UP31_pinv)


def relative_gap(values: np.ndarray) -> float:
    """Smallest pairwise eigenvalue distance over the spectral radius."""
    if values.size < 2 or not np.all(np.isfinite(values)):
        return 0.0 if values.size >= 2 else 1.0
    dist = np.abs(values[:, None] - values[None, :])
    np.fill_diagonal(dist, np.inf)
    return float(dist.min() / max(np.abs(values).max(), np.finfo(float).tiny))


def learn_hkz(moments: MomentSet, k: int, rng=None) -> HkzEstimate:
    d = moments.d
    if not 1 <= k <= d:
        raise ValueError(f"need 1 <= k <= d, got k={k}, d={d}")
    rng = np.random.default_rng(0 if rng is None else rng)
    diag = {}

    U = truncated_svd(moments.P21, k).U
    s = np.linalg.svd(U.T @ moments.P31, compute_uv=False)
    diag["cond_whitened_P31"] = float(s[0] / s[-1]) if s[-1] > 0 else np.inf
    if s[-1] < SIGMA_MIN:
        raise DegenerateMoments(f"sigma_k(U^T P31) = {s[-1]:.3e} below {SIGMA_MIN}", diag)

    C = whitened_operators(moments, U)
    candidates = np.tensordot(rng.standard_normal((PAIRING_DRAWS, d)), C, axes=1)
    gaps = [relative_gap(np.linalg.eigvals(c)) for c in candidates]
    diag["pairing_gap"] = float(max(gaps))
    eig = eigen_general(candidates[int(np.argmax(gaps))])
    diag["imag_mass"] = imaginary_mass(eig.values)
    if diag["imag_mass"] > IMAG_TOL:
        raise SpectralInstability(
            f"combined operator has complex eigenvalues (imaginary mass {diag['imag_mass']:.3e})", diag)
    R = eig.vectors.real
    try:
        D = np.linalg.solve(R, C @ R)  # R^-1 C_r R for every r
    except np.linalg.LinAlgError as exc:
        raise SpectralInstability(f"eigenvector matrix is singular: {exc}", diag) from exc

    diagonal = np.diagonal(D, axis1=1, axis2=2)
    off = np.linalg.norm(D - np.einsum("rk,kl->rkl", diagonal, np.eye(k)))
    diag["offdiag_ratio"] = float(off / max(np.linalg.norm(diagonal), np.finfo(float).tiny))
    if diag["offdiag_ratio"] > OFFDIAG_WARN:
        warnings.warn(f"operators far from jointly diagonal (ratio {diag['offdiag_ratio']:.3f})",
                      RuntimeWarning, stacklevel=2)

    O_raw = diagonal.copy()  # O_raw[r, j] = lambda_{r, j}
    O_pinv = pseudoinverse(O_raw)
    pi_raw = O_pinv @ moments.P1
    pi_safe = pi_raw.copy()
    low = pi_safe < PI_FLOOR
    diag["pi_floored"] = int(low.sum())
    if low.any():
        warnings.warn(f"{low.sum()} entries of pi_hat floored at {PI_FLOOR}", DivisionGuard, stacklevel=2)
        pi_safe[low] = PI_FLOOR
    T_raw = O_pinv @ moments.P21 @ O_pinv.T / pi_safe[None, :]

    O_hat, c1 = stochastic_columns(O_raw)
    T_hat, c2 = stochastic_columns(T_raw)
    pi_hat, c3 = stochastic_vector(pi_raw)
    diag.update(clamped_entries=c1 + c2 + c3, O_raw=O_raw, T_raw=T_raw, pi_raw=pi_raw)
    return HkzEstimate(O_hat, T_hat, pi_hat, diag)
