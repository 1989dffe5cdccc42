"""Low-dimensional maps of separation structure.

Classical (Torgerson) multidimensional scaling turns a separation matrix
into coordinates: double-centre the squared dissimilarities, take the
top eigenpairs, scale eigenvectors by root eigenvalue.  Separations are
not guaranteed Euclidean, so negative eigenvalues can appear; they are
counted and their dimensions zeroed rather than silently imagined.

Smoothing is plain Nadaraya-Watson with a Gaussian kernel, used to paint
attribute surfaces over an embedding.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError

__all__ = [
    "EmbeddingResult",
    "classical_mds",
    "silverman_bandwidth",
    "kernel_smooth",
    "conditional_profile",
    "embedding_grid",
]

# exp(x) underflows to exactly 0.0 below roughly -745.13 in float64
_LOG_UNDERFLOW = -745.0


@dataclass(frozen=True)
class EmbeddingResult:
    coordinates: np.ndarray
    eigenvalues: np.ndarray
    n_negative: int
    stress: float

    @property
    def k(self) -> int:
        return self.coordinates.shape[1]


def classical_mds(dissimilarity: np.ndarray, k: int = 2) -> EmbeddingResult:
    """Torgerson scaling of a symmetric dissimilarity matrix into k
    dimensions.

    The input must be square and symmetric with a zero diagonal.
    ``eigenvalues`` holds the full double-centred spectrum in descending
    order; ``n_negative`` counts the clearly negative part of it, and any
    requested dimension whose eigenvalue is not positive comes back as a
    zero coordinate.  ``stress`` is the relative residual
    sqrt(sum (d - dhat)^2 / sum d^2) over distinct pairs.
    """
    D = np.asarray(dissimilarity, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise NumericError("dissimilarity matrix must be square")
    n = D.shape[0]
    if n < 2:
        raise NumericError("need at least two points to embed")
    if not (1 <= k <= n):
        raise NumericError(f"embedding dimension must lie in 1..{n}")
    if not np.all(np.isfinite(D)):
        raise NumericError("dissimilarity matrix contains non-finite entries")
    scale_ref = max(1.0, float(np.abs(D).max()))
    if np.abs(D - D.T).max() > 1e-8 * scale_ref:
        raise NumericError("dissimilarity matrix is not symmetric")
    if np.abs(np.diagonal(D)).max() > 1e-8 * scale_ref:
        raise NumericError("dissimilarity matrix has a non-zero diagonal")

    D = 0.5 * (D + D.T)
    sq = D * D
    row_mean = sq.mean(axis=1)
    B = -0.5 * (sq - row_mean[:, None] - row_mean[None, :] + sq.mean())
    eigval, eigvec = np.linalg.eigh(B)
    order = np.argsort(eigval)[::-1]
    eigval = eigval[order]
    eigvec = eigvec[:, order]

    lam_top = max(1.0, float(abs(eigval[0])))
    n_negative = int(np.sum(eigval < -1e-9 * lam_top))

    lam_k = eigval[:k]
    coords = eigvec[:, :k] * np.sqrt(np.clip(lam_k, 0.0, None))[None, :]
    coords[:, lam_k <= 0.0] = 0.0

    iu = np.triu_indices(n, k=1)
    d_hat = np.sqrt(((coords[:, None, :] - coords[None, :, :]) ** 2).sum(axis=2))
    denom = float((sq[iu]).sum())
    if denom == 0.0:
        stress = 0.0
    else:
        stress = float(np.sqrt(((D[iu] - d_hat[iu]) ** 2).sum() / denom))
    return EmbeddingResult(
        coordinates=coords,
        eigenvalues=eigval,
        n_negative=n_negative,
        stress=stress,
    )


def _as_points(x) -> np.ndarray:
    """Coerce to an (n, d) point array; a flat vector is n points on a line."""
    a = np.asarray(x, dtype=float)
    return a[:, None] if a.ndim == 1 else a


def silverman_bandwidth(points: np.ndarray) -> float:
    """Rule-of-thumb Gaussian bandwidth, pooled over dimensions."""
    pts = _as_points(points)
    n, p = pts.shape
    if n < 2:
        raise NumericError("bandwidth rule needs at least two points")
    sigma = float(np.sqrt(pts.var(axis=0, ddof=1).mean()))
    if sigma == 0.0:
        raise NumericError("bandwidth rule is undefined for coincident points")
    return sigma * (4.0 / ((p + 2.0) * n)) ** (1.0 / (p + 4.0))


def _log_weights(points: np.ndarray, query: np.ndarray, bandwidth: float) -> np.ndarray:
    if bandwidth <= 0:
        raise NumericError("bandwidth must be positive")
    diff = query[:, None, :] - points[None, :, :]
    return -(diff * diff).sum(axis=2) / (2.0 * bandwidth * bandwidth)


def kernel_smooth(
    points: np.ndarray,
    values: np.ndarray,
    query: np.ndarray,
    bandwidth: float | None = None,
) -> np.ndarray:
    """Nadaraya-Watson estimate of ``values`` at ``query`` locations.

    Weights are exponentiated after subtracting the per-query maximum, so
    the estimate stays a convex combination of observed values even far
    from the data.  A query whose nearest point is beyond float range
    (max log-weight below the exp underflow threshold) gets NaN instead
    of a made-up number.
    """
    pts = _as_points(points)
    vals = np.asarray(values, dtype=float)
    q = _as_points(query)
    if vals.shape[0] != pts.shape[0]:
        raise NumericError("points and values disagree in length")
    if q.shape[1] != pts.shape[1]:
        raise NumericError("query dimension does not match the points")
    if bandwidth is None:
        bandwidth = silverman_bandwidth(pts)
    logw = _log_weights(pts, q, bandwidth)
    peak = logw.max(axis=1)
    out = np.full(q.shape[0], np.nan)
    reachable = peak >= _LOG_UNDERFLOW
    if np.any(reachable):
        w = np.exp(logw[reachable] - peak[reachable, None])
        out[reachable] = (w @ vals) / w.sum(axis=1)
    return out


def conditional_profile(
    points: np.ndarray,
    values: np.ndarray,
    query: np.ndarray,
    bandwidth: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Smoothed conditional mean and standard deviation of ``values``
    along ``query``; the sd uses the same kernel weights, clipped at zero
    before the square root."""
    pts = _as_points(points)
    vals = np.asarray(values, dtype=float)
    q = _as_points(query)
    if vals.shape[0] != pts.shape[0]:
        raise NumericError("points and values disagree in length")
    if bandwidth is None:
        bandwidth = silverman_bandwidth(pts)
    logw = _log_weights(pts, q, bandwidth)
    peak = logw.max(axis=1)
    mean = np.full(q.shape[0], np.nan)
    sd = np.full(q.shape[0], np.nan)
    reachable = peak >= _LOG_UNDERFLOW
    if np.any(reachable):
        w = np.exp(logw[reachable] - peak[reachable, None])
        total = w.sum(axis=1)
        m1 = (w @ vals) / total
        m2 = (w @ (vals * vals)) / total
        mean[reachable] = m1
        sd[reachable] = np.sqrt(np.clip(m2 - m1 * m1, 0.0, None))
    return mean, sd


def embedding_grid(
    coordinates: np.ndarray, size: int = 50, pad: float = 0.05
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Regular grid covering the first two embedding dimensions with a
    proportional margin; returns (x axis, y axis, flattened queries)."""
    coords = np.asarray(coordinates, dtype=float)
    if coords.ndim != 2 or coords.shape[1] < 2:
        raise NumericError("need at least two embedding dimensions for a grid")
    if size < 2:
        raise NumericError("grid size must be at least 2")
    lo = coords[:, :2].min(axis=0)
    hi = coords[:, :2].max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    gx = np.linspace(lo[0] - pad * span[0], hi[0] + pad * span[0], size)
    gy = np.linspace(lo[1] - pad * span[1], hi[1] + pad * span[1], size)
    xx, yy = np.meshgrid(gx, gy)
    return gx, gy, np.column_stack((xx.ravel(), yy.ravel()))
