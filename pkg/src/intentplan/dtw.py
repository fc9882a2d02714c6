"""Dynamic time warping distance and the exponential DTW kernel."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DtwKernelParams:
    """Exponential DTW kernel: k(X, Y) = exp(-dtw(X, Y) / length_scale)."""

    length_scale: float
    band: int | None = None  # Sakoe-Chiba half-width (frames); None disables it

    def __post_init__(self):
        if not (self.length_scale > 0):
            raise ValueError("length_scale must be > 0")
        if self.band is not None and self.band < 0:
            raise ValueError("band must be >= 0")


def _pairwise_sq(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    d = (x * x).sum(axis=1)[:, None] + (y * y).sum(axis=1)[None, :] - 2.0 * (x @ y.T)
    return np.maximum(d, 0.0)


def _dtw_from_cost(cost: np.ndarray, band: int | None) -> float:
    """Cumulative alignment cost via a scanned DP.

    Row recurrence D[j] = cost[i, j] + min(m[j], D[j-1]) with
    m[j] = min(Dprev[j-1], Dprev[j]) is solved in closed form per row:
    D[j] = S[j] + min_{k<=j}(m[k] - S[k-1]) where S is the row cumsum.
    """
    n, mcols = cost.shape
    if band is not None:
        # widen the band so corner-to-corner paths exist for unequal lengths
        eff = max(band, abs(n - mcols))
        jj = np.arange(mcols)
    prev = np.full(mcols, np.inf)
    prev[0] = cost[0, 0]
    if band is None or eff >= mcols:
        prev[1:] = cost[0, 0] + np.cumsum(cost[0, 1:])
    else:
        hi = min(eff + 1, mcols)
        prev[1:hi] = cost[0, 0] + np.cumsum(cost[0, 1:hi])
    for i in range(1, n):
        m = np.empty(mcols)
        m[0] = prev[0]
        m[1:] = np.minimum(prev[:-1], prev[1:])
        if band is not None and eff < mcols:
            m[np.abs(jj - i) > eff] = np.inf
        s = np.cumsum(cost[i])
        shifted = np.concatenate(([0.0], s[:-1]))
        cur = s + np.minimum.accumulate(m - shifted)
        if band is not None and eff < mcols:
            cur[np.abs(jj - i) > eff] = np.inf
        prev = cur
    return float(prev[-1])


def dtw_distance(x: np.ndarray, y: np.ndarray, band: int | None = None) -> float:
    """Minimal cumulative squared-Euclidean cost over monotone alignments.

    Step pattern is (diagonal, right, down); both sequences are (frames, dim)
    arrays with matching per-frame dimension.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if x.shape[0] == 0 or y.shape[0] == 0:
        raise ValueError("sequences must be non-empty")
    if x.shape[1] != y.shape[1]:
        raise ValueError(f"frame dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    return _dtw_from_cost(_pairwise_sq(x, y), band)


def dtw_kernel(x: np.ndarray, y: np.ndarray, params: DtwKernelParams) -> float:
    """exp(-dtw_distance / length_scale); 1 at zero distance."""
    return float(np.exp(-dtw_distance(x, y, params.band) / params.length_scale))


def dtw_distance_matrix(
    seqs_a: np.ndarray, seqs_b: np.ndarray | None = None, band: int | None = None
) -> np.ndarray:
    """All-pairs DTW distances between two stacks of equal-length sequences.

    seqs_a is (A, frames, dim); the symmetric case (seqs_b None) computes each
    unordered pair once.
    """
    a = np.asarray(seqs_a, dtype=float)
    if seqs_b is None:
        n = a.shape[0]
        out = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                out[i, j] = out[j, i] = _dtw_from_cost(_pairwise_sq(a[i], a[j]), band)
        return out
    b = np.asarray(seqs_b, dtype=float)
    out = np.empty((a.shape[0], b.shape[0]))
    for i in range(a.shape[0]):
        for j in range(b.shape[0]):
            out[i, j] = _dtw_from_cost(_pairwise_sq(a[i], b[j]), band)
    return out


def kernel_from_distances(dist: np.ndarray, length_scale: float) -> np.ndarray:
    return np.exp(-dist / length_scale)
