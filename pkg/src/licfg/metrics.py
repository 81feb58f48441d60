"""Sample-quality metrics for 2-D point clouds."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .data import GaussianMixture


@dataclass(frozen=True)
class GaussianFit:
    mean: np.ndarray
    covariance: np.ndarray

    @classmethod
    def from_samples(cls, x) -> "GaussianFit":
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or len(x) < 3:
            raise ValueError("need at least 3 points to fit a Gaussian")
        cov = np.cov(x, rowvar=False)
        return cls(x.mean(axis=0), 0.5 * (cov + cov.T))


def _sqrtm_psd(a: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (a + a.T))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def frechet_2d(p, q) -> float:
    """||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2}) on raw coordinates.

    The trace of (S1 S2)^{1/2} is computed as Tr((S1^{1/2} S2 S1^{1/2})^{1/2}),
    which is symmetric PSD, so an eigendecomposition with eigenvalues
    clamped at 0 is well defined even for degenerate covariances.
    """
    f1, f2 = GaussianFit.from_samples(p), GaussianFit.from_samples(q)
    r1 = _sqrtm_psd(f1.covariance)
    cross = _sqrtm_psd(r1 @ f2.covariance @ r1)
    d = f1.mean - f2.mean
    fd = float(d @ d + np.trace(f1.covariance) + np.trace(f2.covariance) - 2.0 * np.trace(cross))
    return max(fd, 0.0)


def mode_coverage(samples, mixture: GaussianMixture, radius_multiplier: float = 3.0, min_count: int = 1):
    """Return ``(modes_hit, high_quality_fraction)``.

    A sample is high quality when it lies within ``radius_multiplier * sigma``
    of some center; a mode is hit when it has at least ``min_count`` of them.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    x = np.asarray(samples, dtype=np.float64).reshape(-1, mixture.dim)
    if len(x) == 0:
        return 0, 0.0
    dist, idx = cKDTree(mixture.centers).query(x)
    good = dist <= radius_multiplier * mixture.sigma
    counts = np.bincount(idx[good], minlength=mixture.n_components)
    return int(np.sum(counts >= min_count)), float(good.mean())


def _kth_radius(x: np.ndarray, k: int) -> np.ndarray:
    # k+1 because the nearest neighbour of a point in its own set is itself
    dist, _ = cKDTree(x).query(x, k=k + 1)
    return dist[:, -1]


def _manifold_fraction(support: np.ndarray, radii: np.ndarray, queries: np.ndarray) -> float:
    tree = cKDTree(support)
    rmax = radii.max()
    inside = np.zeros(len(queries), dtype=bool)
    for i, nbrs in enumerate(tree.query_ball_point(queries, rmax)):
        if nbrs:
            d = np.linalg.norm(support[nbrs] - queries[i], axis=1)
            inside[i] = np.any(d <= radii[nbrs])
    return float(inside.mean())


def knn_precision_recall(real, fake, k: int = 3) -> tuple[float, float]:
    """Improved precision/recall with k-NN balls as the manifold estimate.

    precision: share of fake points inside some real point's k-NN ball.
    recall: share of real points inside some fake point's k-NN ball.
    """
    real, fake = np.asarray(real, dtype=np.float64), np.asarray(fake, dtype=np.float64)
    if k < 1 or len(real) < k + 1 or len(fake) < k + 1:
        raise ValueError(f"k={k} needs at least k+1 points in each batch")
    precision = _manifold_fraction(real, _kth_radius(real, k), fake)
    recall = _manifold_fraction(fake, _kth_radius(fake, k), real)
    return precision, recall
