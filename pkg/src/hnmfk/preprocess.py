"""Feature preparation: block concatenation, outlier remapping, min-max scaling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["FeatureBlock", "assemble", "clip_outliers", "minmax_scale", "prepare"]


@dataclass
class FeatureBlock:
    name: str
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        if self.values.ndim != 2:
            raise ValueError(f"block {self.name!r} must be 2-d")


def assemble(blocks) -> tuple[np.ndarray, dict[str, slice]]:
    """Concatenate blocks column-wise; returns the matrix and ``name -> column slice``."""
    blocks = list(blocks)
    if not blocks:
        raise ValueError("at least one feature block is required")
    n = blocks[0].values.shape[0]
    provenance: dict[str, slice] = {}
    start = 0
    for b in blocks:
        if b.values.shape[0] != n:
            raise ValueError(f"block {b.name!r} has {b.values.shape[0]} rows, expected {n}")
        if b.name in provenance:
            raise ValueError(f"duplicate block name {b.name!r}")
        stop = start + b.values.shape[1]
        provenance[b.name] = slice(start, stop)
        start = stop
    return np.hstack([b.values for b in blocks]), provenance


def clip_outliers(X, z_limit: float = 3.0) -> np.ndarray:
    """Remap entries with ``|z| > z_limit`` to ``mean +/- z_limit * std`` per column.

    Statistics use the population standard deviation over all rows. Columns
    with zero spread are returned unchanged.
    """
    X = np.asarray(X, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite entries in feature matrix")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    lo = mean - z_limit * std
    hi = mean + z_limit * std
    with np.errstate(invalid="ignore", divide="ignore"):
        z = (X - mean) / std
    out = X.copy()
    varying = std > 0
    upper = varying & (z > z_limit)
    lower = varying & (z < -z_limit)
    out[upper] = np.broadcast_to(hi, X.shape)[upper]
    out[lower] = np.broadcast_to(lo, X.shape)[lower]
    return out


def minmax_scale(X) -> np.ndarray:
    """Per-column ``(x - min) / (max - min)``; constant columns become 0."""
    X = np.asarray(X, dtype=np.float64)
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    out = np.zeros_like(X)
    nz = span > 0
    out[:, nz] = (X[:, nz] - lo[nz]) / span[nz]
    return np.clip(out, 0.0, 1.0)


def prepare(blocks, z_limit: float = 3.0) -> tuple[np.ndarray, dict[str, slice]]:
    """assemble -> clip_outliers -> minmax_scale."""
    X, provenance = assemble(blocks)
    return minmax_scale(clip_outliers(X, z_limit)), provenance
