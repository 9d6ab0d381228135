"""Hidden Markov model parameters, sampling and likelihood.

Conventions: ``T[i, j] = Pr[h_{t+1} = i | h_t = j]`` and
``O[x, j] = Pr[x_t = x | h_t = j]``, so both matrices are column-stochastic.
Symbols are 0-indexed in memory and 1-indexed in every text file.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

STOCHASTIC_TOL = 1e-12
RANK_TOL = 1e-10


@dataclass
class HmmModel:
    T: np.ndarray
    O: np.ndarray
    pi: np.ndarray
    name: str = ""

    def __post_init__(self):
        self.T = np.asarray(self.T, dtype=float)
        self.O = np.asarray(self.O, dtype=float)
        self.pi = np.asarray(self.pi, dtype=float)

    @property
    def k(self) -> int:
        return self.T.shape[0]

    @property
    def d(self) -> int:
        return self.O.shape[0]

    def permuted(self, perm) -> "HmmModel":
        """Relabel hidden states: new state ``j`` is old state ``perm[j]``."""
        perm = np.asarray(perm)
        return HmmModel(self.T[np.ix_(perm, perm)], self.O[:, perm], self.pi[perm], self.name)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "d": self.d,
            "T": self.T.tolist(),
            "O": self.O.tolist(),
            "pi": self.pi.tolist(),
        }


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)
    spectral_checked: bool = False

    @property
    def valid(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.valid


class InvalidModel(ValueError):
    pass


@dataclass
class TripleSet:
    """N observation triples.

    Categorical mode stores an ``(N, 3)`` integer array of 0-indexed symbols;
    vector mode stores an ``(N, 3, d)`` float array.
    """

    data: np.ndarray
    d: int
    mode: str = "categorical"

    def __post_init__(self):
        if self.mode == "categorical":
            self.data = np.asarray(self.data, dtype=np.int64)
            if self.data.ndim != 2 or self.data.shape[1] != 3:
                raise ValueError("categorical triples must have shape (N, 3)")
            if self.data.size and (self.data.min() < 0 or self.data.max() >= self.d):
                raise ValueError(f"symbol out of range for d={self.d}")
        elif self.mode == "vector":
            self.data = np.asarray(self.data, dtype=float)
            if self.data.ndim != 3 or self.data.shape[1:] != (3, self.d):
                raise ValueError(f"vector triples must have shape (N, 3, {self.d})")
            if not np.all(np.isfinite(self.data)):
                raise ValueError("vector triples must be finite")
        else:
            raise ValueError(f"unknown triple mode {self.mode!r}")
        if len(self.data) < 1:
            raise ValueError("a triple set needs at least one triple")

    def __len__(self):
        return len(self.data)

    def as_vectors(self) -> "TripleSet":
        if self.mode == "vector":
            return self
        return TripleSet(one_hot(self.data, self.d), self.d, mode="vector")


def one_hot(symbols, d: int) -> np.ndarray:
    """Map 0-indexed symbols to standard basis vectors of length ``d``."""
    return np.eye(d)[np.asarray(symbols)]


def validate_model(model: HmmModel, spectral: bool = False, require_d_ge_k: bool = True) -> ValidationReport:
    report = ValidationReport(spectral_checked=spectral)
    v = report.violations
    T, O, pi = model.T, model.O, model.pi
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        v.append(f"T must be square, got shape {T.shape}")
        return report
    k = T.shape[0]
    if O.ndim != 2 or O.shape[1] != k:
        v.append(f"O must be d x {k}, got shape {O.shape}")
        return report
    if pi.shape != (k,):
        v.append(f"pi must have length {k}, got shape {pi.shape}")
        return report
    d = O.shape[0]
    if d < k and require_d_ge_k:
        v.append(f"d={d} < k={k}")

    for label, M in (("T", T), ("O", O)):
        if not np.all(np.isfinite(M)):
            v.append(f"{label} has non-finite entries")
            continue
        for j in range(M.shape[1]):
            col = M[:, j]
            if col.min() < 0 or abs(col.sum() - 1.0) > STOCHASTIC_TOL:
                v.append(f"{label} column {j + 1} not stochastic")
    if not np.all(np.isfinite(pi)) or pi.min() < 0 or abs(pi.sum() - 1.0) > STOCHASTIC_TOL:
        v.append("pi not a probability vector")

    if spectral and not v:
        if _rank(O) < k:
            v.append("rank(O) < k")
        if _rank(T) < k:
            v.append("rank(T) < k")
        if pi.min() <= 0:
            v.append("min pi not positive")
    return report


def _rank(M: np.ndarray) -> int:
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > RANK_TOL * s[0])) if s[0] > 0 else 0


def _require_valid(model: HmmModel):
    # EM and likelihood evaluation do not need d >= k
    report = validate_model(model, require_d_ge_k=False)
    if not report:
        raise InvalidModel("; ".join(report.violations))


def _draw_columns(cum: np.ndarray, cols: np.ndarray, u: np.ndarray) -> np.ndarray:
    # cum[:, j] is the cumulative distribution of column j
    idx = (u[:, None] >= cum[:, cols].T).sum(axis=1)
    return np.minimum(idx, cum.shape[0] - 1)


def sample_sequence(model: HmmModel, length: int, rng=None):
    """Sample ``(symbols, states)``, both 0-indexed arrays of ``length``."""
    _require_valid(model)
    if length < 1:
        raise ValueError("length must be >= 1")
    rng = np.random.default_rng(rng)
    cum_T = np.cumsum(model.T, axis=0)
    cum_O = np.cumsum(model.O, axis=0)
    u_state = rng.random(length)
    u_emit = rng.random(length)
    states = np.empty(length, dtype=np.int64)
    states[0] = min(np.searchsorted(np.cumsum(model.pi), u_state[0], side="right"), model.k - 1)
    for t in range(1, length):
        prev = states[t - 1]
        states[t] = min(np.searchsorted(cum_T[:, prev], u_state[t], side="right"), model.k - 1)
    symbols = _draw_columns(cum_O, states, u_emit)
    return symbols, states


def sample_triples(model: HmmModel, n: int, rng=None, sliding: bool = False) -> TripleSet:
    """Sample ``n`` observation triples.

    By default each triple is an independent length-3 run started from ``pi``.
    With ``sliding=True`` the triples are consecutive windows of one sequence
    of length ``n + 2``.
    """
    _require_valid(model)
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(rng)
    if sliding:
        symbols, _ = sample_sequence(model, n + 2, rng)
        return TripleSet(sliding_triples(symbols), model.d)

    cum_T = np.cumsum(model.T, axis=0)
    cum_O = np.cumsum(model.O, axis=0)
    h = np.empty((n, 3), dtype=np.int64)
    h[:, 0] = np.minimum(np.searchsorted(np.cumsum(model.pi), rng.random(n), side="right"), model.k - 1)
    for t in (1, 2):
        h[:, t] = _draw_columns(cum_T, h[:, t - 1], rng.random(n))
    x = _draw_columns(cum_O, h.ravel(), rng.random(3 * n)).reshape(n, 3)
    return TripleSet(x, model.d)


def sliding_triples(symbols) -> np.ndarray:
    symbols = np.asarray(symbols)
    if len(symbols) < 3:
        raise ValueError("need at least 3 symbols to form a triple")
    return np.lib.stride_tricks.sliding_window_view(symbols, 3).copy()


def _check_symbols(model: HmmModel, seq) -> np.ndarray:
    seq = np.asarray(seq, dtype=np.int64)
    if seq.ndim != 1 or len(seq) < 1:
        raise ValueError("sequence must be a non-empty 1-d array")
    if seq.min() < 0 or seq.max() >= model.d:
        raise ValueError(f"symbol out of range for d={model.d}")
    return seq


def sequence_log_likelihood(model: HmmModel, seq) -> float:
    """log p(x_1..x_L) by the scaled forward recursion."""
    _require_valid(model)
    seq = _check_symbols(model, seq)
    alpha = model.O[seq[0]] * model.pi
    total = 0.0
    for t in range(len(seq)):
        if t:
            alpha = model.O[seq[t]] * (model.T @ alpha)
        c = alpha.sum()
        if c <= 0:
            return -np.inf
        total += np.log(c)
        alpha = alpha / c
    return float(total)


def brute_force_likelihood(model: HmmModel, seq) -> float:
    """Sum the joint probability over all k**L hidden paths. Test oracle only."""
    seq = np.asarray(seq)
    total = 0.0
    for path in itertools.product(range(model.k), repeat=len(seq)):
        p = model.pi[path[0]] * model.O[seq[0], path[0]]
        for t in range(1, len(seq)):
            p *= model.T[path[t], path[t - 1]] * model.O[seq[t], path[t]]
        total += p
    return total


def stationary_distribution(T: np.ndarray, iters: int = 10_000) -> np.ndarray:
    mu = np.full(T.shape[0], 1.0 / T.shape[0])
    for _ in range(iters):
        nxt = T @ mu
        if np.max(np.abs(nxt - mu)) < 1e-15:
            break
        mu = nxt
    return mu


# -- model files -----------------------------------------------------------

def model_from_dict(data: dict, name: str = "") -> HmmModel:
    model = HmmModel(data["T"], data["O"], data["pi"], name=name or data.get("name", ""))
    k, d = data.get("k"), data.get("d")
    if k is not None and model.T.shape[0] != k:
        raise InvalidModel(f"declared k={k} disagrees with T")
    if d is not None and model.O.shape[0] != d:
        raise InvalidModel(f"declared d={d} disagrees with O")
    report = validate_model(model)
    if not report:
        raise InvalidModel("; ".join(report.violations))
    return model


def load_model(path) -> HmmModel:
    path = Path(path)
    with open(path) as fh:
        return model_from_dict(json.load(fh), name=path.stem)


def save_model(model: HmmModel, path, extra: dict | None = None):
    payload = model.to_dict()
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


BUILTIN_MODELS = ("k2d3", "k2d6", "k3d8", "k3d10")
_ALIASES = {"A": "k2d3"}


def builtin_model(name: str) -> HmmModel:
    """One of the four benchmark models shipped with the package.

    ``"A"`` is an alias for ``"k2d3"``.
    """
    key = _ALIASES.get(name, name)
    if key not in BUILTIN_MODELS:
        raise KeyError(f"unknown builtin model {name!r}; choose from {BUILTIN_MODELS}")
    text = resources.files("spectral_hmm").joinpath(f"data/{key}.json").read_text()
    return model_from_dict(json.loads(text), name=key)


def resolve_model(spec: str) -> HmmModel:
    """Builtin model name or path to a model file."""
    if spec in BUILTIN_MODELS or spec in _ALIASES:
        return builtin_model(spec)
    return load_model(spec)
