"""
Which pairs get connected?
==========================

Both contour methods average outer products of differences between
samples with matching responses. For ``f(x) = x1**2`` on a square the
level sets are pairs of vertical lines, so a pair with ``|y_i - y_j|``
small may still sit on opposite sides of ``x1 = 0``. GCR also asks for a
small response variance inside the thin tube joining the two points, which
discards many of those cross-axis pairs.
"""

import numpy as np

from gcr import Dataset, GcrParams, gcr_connect, scr_pairs
from gcr.io import export_pairs

rng = np.random.default_rng(0)
X = rng.uniform(-0.5, 0.5, (200, 2))
data = Dataset(X, X[:, 0] ** 2)

gcr = np.array(gcr_connect(data, GcrParams(alpha=1e-3, r=0.01)).pairs)
scr = scr_pairs(data, 0.01)


def describe(name, pairs):
    d = np.abs(X[pairs[:, 0]] - X[pairs[:, 1]])
    cross = X[pairs[:, 0], 0] * X[pairs[:, 1], 0] < 0
    print(f"{name}: {len(pairs):5d} pairs, "
          f"{np.mean(d[:, 1] > d[:, 0]):.0%} mostly vertical, "
          f"{np.mean(cross):.0%} cross x1 = 0, "
          f"{np.mean(d[:, 0] > 0.5):.0%} with |dx1| > 0.5")


describe("SCR", scr)
describe("GCR", gcr)

# the pair files hold both endpoints, ready for any plotting tool
export_pairs(gcr, X, "gcr_pairs.csv")
export_pairs(scr, X, "scr_pairs.csv")
print("wrote gcr_pairs.csv and scr_pairs.csv")
