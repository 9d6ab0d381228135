"""Baum-Welch EM baseline with a scaled forward-backward E-step."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .hmm import HmmModel, _check_symbols, _require_valid

COUNT_FLOOR = 1e-10


@dataclass
class BwConfig:
    iterations: int = 3
    init: HmmModel | None = None  # warm start; random Dirichlet(1) init when None
    seed: int | None = 0
    tol: float | None = None  # stop early once the loglik gain drops below tol

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


@dataclass
class BwEstimate:
    model: HmmModel
    loglik_trace: list = field(default_factory=list)
    wall_time: float = 0.0


def forward_backward(model: HmmModel, seq):
    """Posteriors for one categorical sequence.

    Returns ``(gamma, xi, loglik)`` with ``gamma[t, j] = Pr[h_t = j | x]`` and
    ``xi[t, i, j] = Pr[h_{t+1} = i, h_t = j | x]`` (same index order as ``T``).
    """
    _require_valid(model)
    return _posteriors(model, _check_symbols(model, seq))


def _posteriors(model: HmmModel, seq: np.ndarray):
    T, pi = model.T, model.pi
    B = model.O[seq]  # B[t, j] = Pr[x_t | h_t = j]
    L, k = B.shape

    alpha = np.empty((L, k))
    scale = np.empty(L)
    a = pi * B[0]
    for t in range(L):
        if t:
            a = B[t] * (T @ alpha[t - 1])
        scale[t] = a.sum()
        alpha[t] = a / scale[t]

    beta = np.empty((L, k))
    beta[-1] = 1.0
    for t in range(L - 2, -1, -1):
        beta[t] = T.T @ (B[t + 1] * beta[t + 1]) / scale[t + 1]

    gamma = alpha * beta
    gamma /= gamma.sum(axis=1, keepdims=True)
    # xi[t, i, j] ∝ alpha[t, j] T[i, j] B[t+1, i] beta[t+1, i]
    xi = alpha[:-1, None, :] * T[None] * (B[1:] * beta[1:])[:, :, None] / scale[1:, None, None]
    return gamma, xi, float(np.log(scale).sum())


def random_model(k: int, d: int, rng=None) -> HmmModel:
    """Columns of T and O and the vector pi drawn from a flat Dirichlet."""
    rng = np.random.default_rng(rng)
    return HmmModel(
        T=rng.dirichlet(np.ones(k), size=k).T,
        O=rng.dirichlet(np.ones(d), size=k).T,
        pi=rng.dirichlet(np.ones(k)),
    )


def baum_welch(data, k: int, d: int, config: BwConfig | None = None) -> BwEstimate:
    """Fixed-budget EM over a collection of categorical sequences.

    ``loglik_trace[i]`` is the total log-likelihood of ``data`` under the
    parameters entering iteration ``i``.
    """
    config = config or BwConfig()
    seqs = list(data)
    if not seqs:
        raise ValueError("no sequences to learn from")
    start = time.perf_counter()
    model = config.init if config.init is not None else random_model(k, d, config.seed)
    if model.T.shape != (k, k) or model.O.shape != (d, k):
        raise ValueError("initial model does not match (k, d)")
    _require_valid(model)
    seqs = [_check_symbols(model, s) for s in seqs]

    trace = []
    for _ in range(config.iterations):
        trans = np.zeros((k, k))
        emit = np.zeros((d, k))
        first = np.zeros(k)
        loglik = 0.0
        for seq in seqs:
            gamma, xi, ll = _posteriors(model, seq)
            loglik += ll
            first += gamma[0]
            trans += xi.sum(axis=0)
            np.add.at(emit, seq, gamma)
        trace.append(loglik)
        trans += COUNT_FLOOR
        emit += COUNT_FLOOR
        first += COUNT_FLOOR
        model = HmmModel(trans / trans.sum(axis=0), emit / emit.sum(axis=0), first / first.sum(), model.name)
        if config.tol is not None and len(trace) > 1 and trace[-1] - trace[-2] < config.tol:
            break
    return BwEstimate(model=model, loglik_trace=trace, wall_time=time.perf_counter() - start)
