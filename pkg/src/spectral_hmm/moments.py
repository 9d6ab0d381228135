"""Low-order moments of observation triples.

Index conventions (0-indexed symbols):

* ``P21[i, j] = Pr[x2 = i, x1 = j]``
* ``P31[i, j] = Pr[x3 = i, x1 = j]``
* ``P32[i, j] = Pr[x3 = i, x2 = j]``
* ``P312[i, j, a] = Pr[x3 = i, x1 = j, x2 = a]``
* ``P3r1[r] = P312[:, :, r]``, indexed ``(x3, x1)``
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .hmm import HmmModel, TripleSet

DIVISION_GUARD = 1e-12


@dataclass
class MomentSet:
    P1: np.ndarray
    P21: np.ndarray
    P31: np.ndarray
    P32: np.ndarray
    P312: np.ndarray
    source: str = "empirical"
    n: int | None = None
    counts: np.ndarray | None = None

    @property
    def d(self) -> int:
        return self.P1.shape[0]

    @property
    def P3r1(self) -> np.ndarray:
        """Slices ``P3r1[r]`` as a view into ``P312``."""
        return np.moveaxis(self.P312, 2, 0)

    def to_dict(self) -> dict:
        out = {"source": self.source, "n": self.n, "d": self.d, "P312_index_order": "x3,x1,x2"}
        for name in ("P1", "P21", "P31", "P32", "P312"):
            arr = getattr(self, name)
            out[name] = {"shape": list(arr.shape), "values": arr.ravel().tolist()}
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "MomentSet":
        arrays = {
            name: np.asarray(data[name]["values"], dtype=float).reshape(data[name]["shape"])
            for name in ("P1", "P21", "P31", "P32", "P312")
        }
        return cls(**arrays, source=data.get("source", "empirical"), n=data.get("n"))


@dataclass
class ViewMeans:
    w: np.ndarray
    M1: np.ndarray
    M2: np.ndarray
    M3: np.ndarray


def _from_tensor(P312: np.ndarray, **kw) -> MomentSet:
    return MomentSet(
        P1=P312.sum(axis=(0, 2)),
        P21=P312.sum(axis=0).T,
        P31=P312.sum(axis=2),
        P32=P312.sum(axis=1),
        P312=P312,
        **kw,
    )


def estimate_moments(triples: TripleSet) -> MomentSet:
    """Empirical moments: symbol frequencies, or averaged outer products in vector mode."""
    n = len(triples)
    if n < 1:
        raise ValueError("empty triple set")
    d = triples.d
    if triples.mode == "categorical":
        x1, x2, x3 = triples.data.T
        counts = np.bincount((x3 * d + x1) * d + x2, minlength=d**3).reshape(d, d, d)
        P312 = counts / n
        return MomentSet(
            P1=np.bincount(x1, minlength=d) / n,
            P21=counts.sum(axis=0).T / n,
            P31=counts.sum(axis=2) / n,
            P32=counts.sum(axis=1) / n,
            P312=P312,
            source="empirical",
            n=n,
            counts=counts,
        )
    X = triples.data
    x1, x2, x3 = X[:, 0], X[:, 1], X[:, 2]
    return MomentSet(
        P1=x1.mean(axis=0),
        P21=x2.T @ x1 / n,
        P31=x3.T @ x1 / n,
        P32=x3.T @ x2 / n,
        P312=np.einsum("ni,nj,na->ija", x3, x1, x2) / n,
        source="empirical",
        n=n,
    )


def contract_third_order(P312, eta) -> np.ndarray:
    """``M[i, j] = sum_a eta[a] * P312[i, j, a]``."""
    P312 = np.asarray(P312)
    eta = np.asarray(eta, dtype=float)
    if P312.ndim != 3 or eta.shape != (P312.shape[2],):
        raise ValueError(f"cannot contract tensor {P312.shape} with vector {eta.shape}")
    return P312 @ eta


def analytic_view_means(model: HmmModel) -> ViewMeans:
    """Three-view mixture parameters with the latent class set to the middle state."""
    w = model.T @ model.pi
    if w.min() < DIVISION_GUARD:
        raise ValueError("state distribution at t=2 has a (near-)zero entry")
    # Bayes: Pr[h1 = i | h2 = j] = T[j, i] pi[i] / w[j]
    M1 = model.O @ (model.pi[:, None] * model.T.T / w[None, :])
    return ViewMeans(w=w, M1=M1, M2=model.O.copy(), M3=model.O @ model.T)


def analytic_moments(model: HmmModel) -> MomentSet:
    """Population moments of a known model (no sampling noise)."""
    vm = analytic_view_means(model)
    P312 = np.einsum("h,ih,jh,ah->ija", vm.w, vm.M3, vm.M1, vm.M2)
    return MomentSet(
        P1=model.O @ model.pi,
        P21=model.O @ model.T @ np.diag(model.pi) @ model.O.T,
        P31=vm.M3 @ np.diag(vm.w) @ vm.M1.T,
        P32=vm.M3 @ np.diag(vm.w) @ vm.M2.T,
        P312=P312,
        source="analytic",
    )


def brute_force_moments(model: HmmModel) -> MomentSet:
    """Enumerate every (h1, h2, h3, x1, x2, x3). Test oracle only."""
    d, k = model.d, model.k
    P312 = np.zeros((d, d, d))
    O, T, pi = model.O, model.T, model.pi
    for h1 in range(k):
        for h2 in range(k):
            for h3 in range(k):
                ph = pi[h1] * T[h2, h1] * T[h3, h2]
                P312 += ph * np.einsum("i,j,a->ija", O[:, h3], O[:, h1], O[:, h2])
    return _from_tensor(P312, source="analytic")


def save_moments(moments: MomentSet, path):
    with open(path, "w") as fh:
        json.dump(moments.to_dict(), fh)
        fh.write("\n")


def load_moments(path) -> MomentSet:
    with open(path) as fh:
        return MomentSet.from_dict(json.load(fh))
