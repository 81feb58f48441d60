import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from licfg.data import ring_mixture, sample_mixture
from licfg.metrics import frechet_2d, knn_precision_recall, mode_coverage


def test_frechet_identical_samples():
    x = np.random.default_rng(0).normal(size=(500, 2))
    assert frechet_2d(x, x) == pytest.approx(0.0, abs=1e-9)


def test_frechet_mean_shift():
    rng = np.random.default_rng(1)
    n = 100_000
    p = rng.normal(size=(n, 2)) + [3.0, 4.0]
    q = rng.normal(size=(n, 2))
    assert frechet_2d(p, q) == pytest.approx(25.0, abs=0.5)


def test_frechet_commuting_covariances():
    rng = np.random.default_rng(2)
    n = 100_000
    assert frechet_2d(2.0 * rng.normal(size=(n, 2)), rng.normal(size=(n, 2))) == pytest.approx(2.0, abs=0.2)


def test_frechet_degenerate_covariance():
    x = np.column_stack([np.linspace(-1, 1, 50), np.zeros(50)])
    assert np.isfinite(frechet_2d(x, x)) and frechet_2d(x, x) < 1e-9


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), shift=st.tuples(st.floats(-5, 5), st.floats(-5, 5)))
def test_frechet_symmetric_and_translation_invariant(seed, shift):
    rng = np.random.default_rng(seed)
    p = rng.normal(size=(200, 2)) @ rng.normal(size=(2, 2))
    q = rng.normal(size=(150, 2)) + 1.0
    assert frechet_2d(p, q) == pytest.approx(frechet_2d(q, p), abs=1e-9)
    s = np.asarray(shift)
    assert frechet_2d(p + s, q + s) == pytest.approx(frechet_2d(p, q), abs=1e-9)


def test_mode_coverage_examples():
    ring = ring_mixture()
    assert mode_coverage(ring.centers, ring) == (8, 1.0)
    assert mode_coverage(np.repeat(ring.centers[:1], 30, axis=0), ring) == (1, 1.0)
    modes, hq = mode_coverage(sample_mixture(ring, 10_000, seed=0), ring, min_count=10)
    # the 2-D Gaussian mass within 3 sigma is 1 - exp(-4.5) ~ 0.9889
    assert modes == 8
    assert hq == pytest.approx(1 - np.exp(-4.5), abs=4 * np.sqrt(0.0111 * 0.9889 / 10_000))


def test_mode_coverage_min_count():
    ring = ring_mixture()
    with pytest.raises(ValueError):
        mode_coverage(ring.centers, ring, min_count=0)
    assert mode_coverage(ring.centers, ring, min_count=2)[0] == 0


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_modes_hit_monotone_in_radius(seed):
    ring = ring_mixture()
    x = sample_mixture(ring, 300, seed) + np.random.default_rng(seed).normal(0, 0.1, size=(300, 2))
    hits = [mode_coverage(x, ring, r, min_count=5)[0] for r in (0.5, 1, 2, 3, 5, 10)]
    assert hits == sorted(hits)


def test_precision_recall_identical_and_disjoint():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(300, 2))
    assert knn_precision_recall(x, x, k=3) == (1.0, 1.0)
    far = rng.normal(size=(300, 2)) * 0.1 + 100.0
    assert knn_precision_recall(x * 0.1, far, k=3) == (0.0, 0.0)


def brute_force(real, fake, k):
    def radii(s):
        d = np.sqrt(((s[:, None] - s[None]) ** 2).sum(-1))
        return np.sort(d, axis=1)[:, k]

    def frac(support, r, queries):
        hits = 0
        for q in queries:
            hits += any(np.sqrt(((q - s) ** 2).sum()) <= ri for s, ri in zip(support, r))
        return hits / len(queries)

    return frac(real, radii(real), fake), frac(fake, radii(fake), real)


def test_precision_recall_matches_double_loop():
    rng = np.random.default_rng(7)
    real, fake = rng.normal(size=(12, 2)), rng.normal(size=(12, 2)) + 0.7
    assert knn_precision_recall(real, fake, k=2) == brute_force(real, fake, 2)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.integers(1, 5))
def test_precision_recall_swap(seed, k):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(40, 2)), rng.normal(size=(30, 2)) * 1.5
    p, r = knn_precision_recall(a, b, k)
    assert 0.0 <= p <= 1.0 and 0.0 <= r <= 1.0
    assert knn_precision_recall(b, a, k) == (r, p)


def test_precision_recall_needs_enough_points():
    with pytest.raises(ValueError):
        knn_precision_recall(np.zeros((3, 2)), np.ones((10, 2)), k=3)
