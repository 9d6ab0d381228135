"""Gaussian emissions for categorical sequences and quantile binning.

Bounds are empirical quantiles with linear interpolation between order
statistics (``g = (n - 1) p``). A value equal to a bound goes to the upper bin.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateQuantiles

QUANTILE_CONVENTION = "linear-(n-1)p"


@dataclass
class BinSpec:
    bounds: np.ndarray
    convention: str = QUANTILE_CONVENTION

    def __post_init__(self):
        self.bounds = np.asarray(self.bounds, dtype=float)
        if self.bounds.ndim != 1 or len(self.bounds) < 1:
            raise ValueError("need at least one bound (two bins)")
        if np.any(np.diff(self.bounds) <= 0):
            raise DegenerateQuantiles("bin bounds must be strictly increasing")

    @property
    def bins(self) -> int:
        return len(self.bounds) + 1

    def to_dict(self) -> dict:
        return {"bins": self.bins, "bounds": self.bounds.tolist(), "convention": self.convention}

    @classmethod
    def from_dict(cls, data: dict) -> "BinSpec":
        return cls(data["bounds"], data.get("convention", QUANTILE_CONVENTION))


def generate_gaussian_emissions(symbols, sigma: float, rng=None) -> np.ndarray:
    """``y_t = x_t + sigma * z_t`` with ``x_t`` the 1-indexed symbol value."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    rng = np.random.default_rng(rng)
    means = np.asarray(symbols, dtype=float) + 1.0
    return means + sigma * rng.standard_normal(means.shape)


def quantile_bounds(values, bins: int) -> BinSpec:
    values = np.asarray(values, dtype=float).ravel()
    if bins < 2:
        raise ValueError("bins must be >= 2")
    if not np.all(np.isfinite(values)):
        raise ValueError("values must be finite")
    if len(np.unique(values)) < bins:
        raise DegenerateQuantiles(f"fewer than {bins} distinct values")
    bounds = np.quantile(values, np.arange(1, bins) / bins, method="linear")
    if np.any(np.diff(bounds) <= 0):
        raise DegenerateQuantiles("degenerate quantiles: bounds collide")
    return BinSpec(bounds)


def bin_sequence(values, spec: BinSpec) -> np.ndarray:
    """0-indexed bin of each value (number of bounds ``<= value``); shape preserved."""
    return np.searchsorted(spec.bounds, np.asarray(values, dtype=float), side="right")


def simple_binning(values, bins: int):
    """Quantile bounds from all ``values``, then bin each one.

    Returns ``(symbols, spec)``. ``bins`` may exceed the model's alphabet.
    """
    spec = quantile_bounds(values, bins)
    return bin_sequence(values, spec), spec


def save_binspec(spec: BinSpec, path):
    with open(path, "w") as fh:
        json.dump(spec.to_dict(), fh, indent=2)
        fh.write("\n")


def load_binspec(path) -> BinSpec:
    with open(path) as fh:
        return BinSpec.from_dict(json.load(fh))
