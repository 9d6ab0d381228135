"""Three-view method of moments via simultaneous diagonalisation.

Observable operators ``B(eta) = (U3^T P312(eta) U1)(U3^T P31 U1)^-1`` are all
similar to ``diag(O^T eta)`` with the common eigenbasis ``U3^T O T``. Probing
with ``eta_i = U2 theta_i`` for the rows ``theta_i`` of a random rotation
``Theta`` gives ``L = Theta U2^T O``, hence ``O = U2 Theta^T L``; the shared
eigenvectors give ``T`` up to column scale as ``(U3^T O)^-1 R3``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateMoments, SpectralInstability
from .moments import MomentSet, contract_third_order
from .numerics import (eigen_general, imaginary_mass, random_rotation,
                       stochastic_columns, truncated_svd)

IMAG_TOL = 1e-6
GAP_TOL = 1e-8
SIGMA_MIN = 1e-10
MAX_ATTEMPTS = 3


@dataclass
class ObservableOperator:
    B: np.ndarray
    eta: np.ndarray


@dataclass
class AhkEstimate:
    O_hat: np.ndarray
    T_hat: np.ndarray
    Theta: np.ndarray
    L_hat: np.ndarray
    R3_hat: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    attempts: int = 1
    pi_hat: None = None  # not identified by this method


@dataclass
class Whitening:
    U1: np.ndarray
    U2: np.ndarray
    U3: np.ndarray


def whitening(moments: MomentSet, k: int) -> Whitening:
    svd31 = truncated_svd(moments.P31, k)
    svd32 = truncated_svd(moments.P32, k)
    return Whitening(U1=svd31.V, U2=svd32.V, U3=svd31.U)


def _whitened_p31_inverse(moments: MomentSet, U1, U3):
    W = U3.T @ moments.P31 @ U1
    s = np.linalg.svd(W, compute_uv=False)
    if s[-1] < SIGMA_MIN:
        raise DegenerateMoments(f"sigma_min(U3^T P31 U1) = {s[-1]:.3e} below {SIGMA_MIN}",
                                {"sigma_min_whitened_P31": float(s[-1])})
    return np.linalg.inv(W), float(s[0] / s[-1])


def build_operator(moments: MomentSet, U1, U3, eta, _inv=None) -> ObservableOperator:
    eta = np.asarray(eta, dtype=float)
    inv = _whitened_p31_inverse(moments, U1, U3)[0] if _inv is None else _inv
    B = U3.T @ contract_third_order(moments.P312, eta) @ U1 @ inv
    return ObservableOperator(B=B, eta=eta)


def learn_ahk(moments: MomentSet, k: int, rng=None, theta=None) -> AhkEstimate:
    """Single attempt. ``theta`` overrides the random rotation."""
    d = moments.d
    if not 1 <= k <= d:
        raise ValueError(f"need 1 <= k <= d, got k={k}, d={d}")
    W = whitening(moments, k)
    inv, cond = _whitened_p31_inverse(moments, W.U1, W.U3)
    Theta = random_rotation(k, np.random.default_rng(0 if rng is None else rng)) if theta is None \
        else np.asarray(theta, dtype=float)
    diag = {"cond_whitened_P31": cond}

    ops = [build_operator(moments, W.U1, W.U3, W.U2 @ Theta[i], _inv=inv) for i in range(k)]
    eig = eigen_general(ops[0].B)
    diag["imag_mass"] = imaginary_mass(eig.values)
    vals = eig.values.real
    gaps = np.abs(vals[:, None] - vals[None, :])[np.triu_indices(k, 1)]
    diag["eigen_gap"] = float(gaps.min()) if gaps.size else np.inf
    if diag["imag_mass"] > IMAG_TOL:
        raise SpectralInstability(
            f"operator has complex eigenvalues (imaginary mass {diag['imag_mass']:.3e})", diag)
    if diag["eigen_gap"] < GAP_TOL:
        raise SpectralInstability(f"eigenvalue gap {diag['eigen_gap']:.3e} below {GAP_TOL}", diag)

    R3 = eig.vectors.real
    L = np.empty((k, k))
    residual = 0.0
    for i, op in enumerate(ops):
        D = np.linalg.solve(R3, op.B @ R3)
        L[i] = np.diag(D)
        residual = max(residual, np.linalg.norm(D - np.diag(L[i])) / max(np.linalg.norm(L[i]), 1e-300))
    diag["offdiag_ratio"] = float(residual)

    O_raw = W.U2 @ Theta.T @ L  # Theta^-1 = Theta^T for a rotation
    T_raw = np.linalg.solve(W.U3.T @ O_raw, R3)
    O_hat, c1 = stochastic_columns(O_raw)
    T_hat, c2 = stochastic_columns(T_raw)
    diag.update(clamped_entries=c1 + c2, O_raw=O_raw, T_raw=T_raw)
    return AhkEstimate(O_hat, T_hat, Theta, L, R3, diag)


def retry_policy(moments: MomentSet, k: int, seed=0, attempts: int = MAX_ATTEMPTS) -> AhkEstimate:
    """Run ``learn_ahk``, redrawing the rotation on ``SpectralInstability``.

    Each attempt gets a child seed spawned from ``seed``; after the last
    failure the error is re-raised with every attempt's diagnostics attached.
    """
    children = np.random.SeedSequence(seed).spawn(attempts)
    failures = []
    for n, child in enumerate(children, start=1):
        try:
            est = learn_ahk(moments, k, rng=np.random.default_rng(child))
        except SpectralInstability as exc:
            failures.append(exc.diagnostics)
            continue
        est.attempts = n
        est.diagnostics["failed_attempts"] = failures
        return est
    raise SpectralInstability(f"learn_ahk failed {attempts} times", failures[-1], attempts=failures)
