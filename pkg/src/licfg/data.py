"""Synthetic 2-D Gaussian-mixture benchmarks, latent sampling and CSV point files."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class GaussianMixture:
    """Uniformly weighted isotropic mixture."""

    centers: np.ndarray
    sigma: float
    name: str = "mixture"

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        c = np.asarray(self.centers, dtype=np.float64)
        d = np.linalg.norm(c[:, None, :] - c[None, :, :], axis=-1)
        if np.any(d[np.triu_indices(len(c), 1)] == 0):
            raise ValueError("mixture centers must be pairwise distinct")
        object.__setattr__(self, "centers", c)

    @property
    def n_components(self) -> int:
        return len(self.centers)

    @property
    def dim(self) -> int:
        return self.centers.shape[1]


def ring_mixture() -> GaussianMixture:
    """Eight components at (2 cos(i pi/4), 2 sin(i pi/4)), i = 1..8, std 0.02."""
    i = np.arange(1, 9)
    centers = np.stack([2 * np.cos(i * np.pi / 4), 2 * np.sin(i * np.pi / 4)], axis=1)
    return GaussianMixture(centers, 0.02, "ring")


def grid_mixture() -> GaussianMixture:
    """25 components at (2i, 2j) for -2 <= i, j <= 2, std 0.02."""
    ij = np.arange(-2, 3)
    centers = np.array([(2.0 * a, 2.0 * b) for a in ij for b in ij])
    return GaussianMixture(centers, 0.02, "grid")


MIXTURES = {"ring": ring_mixture, "grid": grid_mixture}


def get_mixture(name: str) -> GaussianMixture:
    try:
        return MIXTURES[name]()
    except KeyError:
        raise ValueError(f"unknown dataset {name!r}; choose from {sorted(MIXTURES)}") from None


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def sample_mixture(m: GaussianMixture, n: int, seed=0, return_labels: bool = False):
    """Draw a component uniformly, then add isotropic Gaussian noise."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _rng(seed)
    labels = rng.integers(0, m.n_components, size=n)
    pts = m.centers[labels] + m.sigma * rng.standard_normal((n, m.dim))
    return (pts, labels) if return_labels else pts


def sample_latent(n: int, d_z: int = 2, seed=0) -> np.ndarray:
    """Standard-normal latent codes, shape (n, d_z)."""
    if n < 1 or d_z < 1:
        raise ValueError("n and d_z must be >= 1")
    return _rng(seed).standard_normal((n, d_z))


def write_points_csv(points, path) -> None:
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{i}" for i in range(pts.shape[1])])
        for row in pts:
            w.writerow([f"{v:.17g}" for v in row])


def read_points_csv(path) -> np.ndarray:
    """Read a point file written by :func:`write_points_csv`."""
    text = Path(path).read_text().splitlines()
    if not text or not text[0].strip():
        raise ValueError(f"{path}: missing header")
    header = [h.strip() for h in text[0].split(",")]
    if header != [f"x{i}" for i in range(len(header))]:
        raise ValueError(f"{path}: missing header (expected x0,x1,..., got {text[0]!r})")
    rows = []
    for lineno, line in enumerate(text[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise ValueError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise ValueError(f"{path}: line {lineno}: malformed number in {line!r}") from None
    return np.array(rows, dtype=np.float64).reshape(-1, len(header))
