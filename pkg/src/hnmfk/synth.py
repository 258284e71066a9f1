"""Planted-hierarchy generator used as a desk-scale stand-in for real family data.

Families are leaves of a tree with ``hierarchy_levels`` levels. Every tree
node owns a block of ``block_width`` features, and a family's pattern is
non-zero exactly on the blocks along its root-to-leaf path, so families that
share an ancestor share features. Rows are the family pattern plus uniform
noise, min-max scaled to [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .preprocess import minmax_scale

__all__ = ["SyntheticSpec", "SyntheticData", "synth_generate", "family_paths"]


@dataclass
class SyntheticSpec:
    family_count: int = 10
    samples_per_family: int | Sequence[int] = 200
    hierarchy_levels: int = 2
    noise_scale: float = 0.05
    unknown_fraction: float = 0.3
    novel_family_count: int = 0
    seed: int = 0
    block_width: int = 5

    def sizes(self) -> list[int]:
        if isinstance(self.samples_per_family, (int, np.integer)):
            return [int(self.samples_per_family)] * self.family_count
        sizes = [int(s) for s in self.samples_per_family]
        if len(sizes) != self.family_count:
            raise ValueError("samples_per_family list must have family_count entries")
        return sizes

    def validate(self):
        if self.family_count < 1:
            raise ValueError("family_count must be >= 1")
        if not 0 <= self.novel_family_count < self.family_count:
            raise ValueError("novel_family_count must be < family_count")
        if not 0 < self.unknown_fraction < 1:
            raise ValueError("unknown_fraction must lie in (0, 1)")
        if self.hierarchy_levels < 1:
            raise ValueError("hierarchy_levels must be >= 1")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be >= 0")
        if self.block_width < 1:
            raise ValueError("block_width must be >= 1")
        if min(self.sizes()) < 1:
            raise ValueError("every family needs at least one sample")


class SyntheticData(NamedTuple):
    X: np.ndarray
    labels: np.ndarray  # true class ids 1..family_count
    known: np.ndarray  # boolean mask of labeled samples
    novel_families: np.ndarray

    @property
    def observed(self) -> np.ndarray:
        """Labels as the classifier sees them (-1 where unknown)."""
        return np.where(self.known, self.labels, -1)


def family_paths(family_count: int, levels: int) -> list[tuple[int, ...]]:
    """Tree node (per level) on the path of each family; the last entry is the family."""
    b = max(2, math.ceil(family_count ** (1.0 / levels))) if levels > 1 else family_count
    paths = []
    for f in range(family_count):
        paths.append(tuple(f // b ** (levels - 1 - lvl) for lvl in range(levels)))
    return paths


def synth_generate(spec: SyntheticSpec) -> SyntheticData:
    spec.validate()
    sizes = spec.sizes()
    F = spec.family_count
    ss = np.random.SeedSequence(spec.seed)
    data_rng, mask_rng, novel_rng = (np.random.default_rng(s) for s in ss.spawn(3))

    paths = family_paths(F, spec.hierarchy_levels)
    blocks = {}
    for path in paths:
        for lvl, node in enumerate(path):
            blocks.setdefault((lvl, node), len(blocks))
    m = len(blocks) * spec.block_width
    patterns = np.zeros((F, m))
    block_values = data_rng.uniform(0.5, 1.0, size=(len(blocks), spec.block_width))
    for f, path in enumerate(paths):
        for lvl, node in enumerate(path):
            b = blocks[(lvl, node)]
            patterns[f, b * spec.block_width:(b + 1) * spec.block_width] = block_values[b]

    labels = np.repeat(np.arange(1, F + 1), sizes)
    X = patterns[labels - 1]
    if spec.noise_scale > 0:
        X = X + data_rng.uniform(0.0, spec.noise_scale, size=X.shape)
    X = minmax_scale(X)

    novel = np.sort(novel_rng.choice(np.arange(1, F + 1), spec.novel_family_count, replace=False))
    known = np.zeros(labels.size, dtype=bool)
    start = 0
    for f, size in enumerate(sizes, start=1):
        # one permutation per family, independent of the fraction, so larger
        # unknown fractions give nested unknown sets
        order = mask_rng.permutation(size)
        if f not in novel:
            n_unknown = int(round(spec.unknown_fraction * size))
            known[start + order[n_unknown:]] = True
        start += size
    return SyntheticData(X, labels, known, novel)
