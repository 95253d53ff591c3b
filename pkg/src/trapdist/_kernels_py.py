"""Pure-numpy fallback for the compiled consensus kernel.

Arithmetic mirrors the Cython kernel operation-for-operation so that both
backends select the same candidate model on the same inputs.
"""

from __future__ import annotations

import math

import numpy as np


def ransac_consensus(
    x: np.ndarray, y: np.ndarray, samples: np.ndarray, threshold: float
) -> tuple[float, float, int]:
    """Score candidate affine models y ~ m*x + c over sampled point sets.

    ``samples`` is an (iterations, k) index matrix; each row is least-squares
    fitted and its inliers (|m*x + c - y| <= threshold) counted over all
    points. Returns (m, c, count) of the best candidate, ties going to the
    earliest iteration significance; (nan, nan, 0) if every row was
    degenerate.
    """
    xs = x[samples]  # (iterations, k)
    ys = y[samples]
    k = float(samples.shape[1])
    sx = xs.sum(axis=1)
    sy = ys.sum(axis=1)
    sxx = (xs * xs).sum(axis=1)
    sxy = (xs * ys).sum(axis=1)
    den = k * sxx - sx * sx
    ms = np.where(den != 0.0, (k * sxy - sx * sy) / np.where(den != 0.0, den, 1.0), np.nan)
    cs = (sy - ms * sx) / k

    best_m = math.nan
    best_c = math.nan
    best_count = 0
    for i in range(samples.shape[0]):
        if den[i] == 0.0:
            continue
        count = int(np.count_nonzero(np.abs(ms[i] * x + cs[i] - y) <= threshold))
        if count > best_count:
            best_count = count
            best_m = float(ms[i])
            best_c = float(cs[i])
    return best_m, best_c, best_count
