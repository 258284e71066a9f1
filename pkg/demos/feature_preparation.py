"""
Preparing feature blocks
========================

Feature groups arrive as separate blocks with very different scales, for
example a 256-bin byte histogram next to a handful of header counts with
heavy tails. They are concatenated, values beyond three standard deviations
are pulled back to the three-sigma bound, and every column is scaled to
[0, 1] so the matrix is ready for non-negative factorization.
"""

import numpy as np

from hnmfk import FeatureBlock, clip_outliers, prepare

rng = np.random.default_rng(7)
n = 500
histogram = rng.dirichlet(np.ones(256), size=n)
header = rng.lognormal(mean=3.0, sigma=1.5, size=(n, 4))
blocks = [FeatureBlock("histogram", histogram), FeatureBlock("header", header)]

X, columns = prepare(blocks)
print("matrix", X.shape, "range", (X.min(), X.max()))
for name, span in columns.items():
    print(f"  {name:<10} columns {span.start}..{span.stop - 1}")

###############################################################################
# Which header entries were clipped? Exactly those more than three standard
# deviations from their column mean.

z = (header - header.mean(axis=0)) / header.std(axis=0)
moved = clip_outliers(header) != header
print("entries clipped per header column:", moved.sum(axis=0))
print("matches |z| > 3:", np.array_equal(moved, np.abs(z) > 3))
