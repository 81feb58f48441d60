import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats
from scipy.special import log_expit

from licfg.autodiff import Tensor, grad
from licfg.cfg import (
    PenaltyKind,
    TrainConfig,
    discriminator_step,
    disc_logistic_loss,
    functional_step,
    functional_update,
    generate,
    generator_regress,
    generator_step,
    interpolate_pairs,
    penalty_norm_terms,
    penalty_term,
    train,
)
from licfg.data import ring_mixture, sample_latent
from licfg.nn import AdamState, MlpParams, mlp_forward, mlp_init


def linear_disc(a):
    w = Tensor(np.asarray(a, float).reshape(-1, 1))
    return lambda x: x @ w


def test_logistic_loss_examples():
    z = np.zeros(16)
    assert disc_logistic_loss(z, z).item() == pytest.approx(2 * np.log(2), abs=1e-15)
    assert disc_logistic_loss(np.full(4, 50.0), np.full(4, -50.0)).item() <= 1e-20


def test_logistic_loss_matches_log_loss():
    rng = np.random.default_rng(0)
    r, f = rng.uniform(-8, 8, 500), rng.uniform(-8, 8, 500)
    ref = -(log_expit(r).mean() + log_expit(-f).mean())
    assert disc_logistic_loss(r, f).item() == pytest.approx(ref, abs=1e-12)


def test_logistic_loss_rejects_empty():
    with pytest.raises(ValueError):
        disc_logistic_loss(np.zeros(0), np.zeros(3))


def test_interpolate_degenerate_segment():
    x = np.random.default_rng(1).normal(size=(20, 2))
    np.testing.assert_array_equal(interpolate_pairs(x, x, seed=3), x)


def test_interpolates_lie_in_box():
    rng = np.random.default_rng(2)
    a, b = rng.normal(size=(200, 2)), rng.normal(size=(200, 2))
    xh = interpolate_pairs(a, b, seed=0)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    assert np.all(xh >= lo - 1e-15) and np.all(xh <= hi + 1e-15)


def test_interpolation_weights_are_uniform():
    n = 100_000
    real, fake = np.ones((n, 1)), np.zeros((n, 1))
    t = interpolate_pairs(real, fake, seed=5).ravel()
    assert stats.kstest(t, "uniform").pvalue > 0.01


def test_interpolate_shape_mismatch():
    with pytest.raises(ValueError):
        interpolate_pairs(np.zeros((3, 2)), np.zeros((4, 2)))


def test_worked_penalty_values():
    x = np.random.default_rng(0).normal(size=(10, 2))
    d = linear_disc([1.0, 0.0])
    assert penalty_term(PenaltyKind("one", 3.0), d, x).item() == pytest.approx(0.0, abs=1e-15)
    assert penalty_term(PenaltyKind("zero", 0.1), d, x).item() == pytest.approx(0.05, abs=1e-15)
    eps = PenaltyKind("eps", 0.1, 0.1 * np.sqrt(2))
    np.testing.assert_allclose(eps.eps_vector(2), [0.1, 0.1], atol=1e-15)
    assert penalty_term(eps, d, x).item() == pytest.approx(0.041, abs=1e-15)


def test_penalty_none_is_zero():
    x = np.ones((3, 2))
    assert penalty_term(PenaltyKind("none"), linear_disc([3.0, 4.0]), x).item() == 0.0


def test_zero_gamma_leaves_parameter_gradient_unchanged():
    D = mlp_init([2, 8, 1], "tanh", seed=1)
    x = np.random.default_rng(3).normal(size=(12, 2))
    for kind in ("one", "zero", "eps"):
        leaves = D.leaves()
        base = mlp_forward(D, x, leaves).mean()
        g0 = grad(base, leaves)
        leaves = D.leaves()
        total = mlp_forward(D, x, leaves).mean() + penalty_term(PenaltyKind(kind, 0.0), D, x, leaves)
        g1 = grad(total, leaves)
        for a, b in zip(g0, g1):
            np.testing.assert_array_equal(a.data, b.data)


@settings(max_examples=50, deadline=None)
@given(g=st.floats(0.0, 5.0), gamma=st.floats(0.01, 10.0), angle=st.floats(0, 2 * np.pi))
def test_one_below_zero_iff_norm_above_half(g, gamma, angle):
    d = linear_disc([g * np.cos(angle), g * np.sin(angle)])
    x = np.zeros((2, 2))
    one = penalty_term(PenaltyKind("one", gamma), d, x).item()
    zero = penalty_term(PenaltyKind("zero", gamma), d, x).item()
    assert zero == pytest.approx(0.5 * gamma * g * g, rel=1e-12, abs=1e-15)
    assert one == pytest.approx(0.5 * gamma * (g - 1) ** 2, rel=1e-12, abs=1e-15)
    if abs(g - 0.5) > 1e-9:
        assert (one < zero) == (g > 0.5)


@settings(max_examples=50, deadline=None)
@given(
    a=st.lists(st.floats(-5.0, 0.0), min_size=2, max_size=2),
    eps_norm=st.floats(1e-3, 3.0),
)
def test_eps_exceeds_zero_for_nonpositive_gradients(a, eps_norm):
    d = linear_disc(a)
    x = np.ones((3, 2))
    zero = penalty_term(PenaltyKind("zero", 0.1), d, x).item()
    eps = penalty_term(PenaltyKind("eps", 0.1, eps_norm), d, x).item()
    assert eps > zero


def test_penalty_norm_terms():
    g = np.array([0.3, 0.8])
    np.testing.assert_allclose(penalty_norm_terms(g, "one"), [0.7, 0.2])
    np.testing.assert_allclose(penalty_norm_terms(g, "zero"), g)
    np.testing.assert_allclose(penalty_norm_terms(g, "eps", 0.3), [0.6, 1.1])


def test_functional_step_example():
    d = lambda x: (x @ Tensor([[1.0], [2.0]]))  # noqa: E731
    np.testing.assert_allclose(functional_step(np.zeros((1, 2)), d, 1.0, 0.1), [[0.1, 0.2]], atol=1e-15)


def test_functional_step_validation_and_small_delta():
    d = linear_disc([1.0, -1.0])
    x = np.random.default_rng(0).normal(size=(4, 2))
    with pytest.raises(ValueError):
        functional_step(x, d, 1.0, 0.0)
    np.testing.assert_allclose(functional_step(x, d, 1e-12, 0.5), x, atol=1e-10)


def test_functional_update_linear_closed_form():
    a = np.array([0.6, -0.8])
    x = np.random.default_rng(1).normal(size=(5, 2))
    out = functional_update(x, linear_disc(a), 0.7, 0.2, 9)
    np.testing.assert_allclose(out, x + 9 * 0.2 * 0.7 * a, atol=1e-12)


def test_functional_update_composition():
    D = mlp_init([2, 16, 1], "tanh", seed=4)
    x = np.random.default_rng(2).normal(size=(6, 2))
    np.testing.assert_array_equal(functional_update(x, D, 1.0, 0.3, 1), functional_step(x, D, 1.0, 0.3))
    triple = functional_step(functional_step(functional_step(x, D, 1.0, 0.3), D, 1.0, 0.3), D, 1.0, 0.3)
    np.testing.assert_allclose(functional_update(x, D, 1.0, 0.3, 3), triple, atol=1e-12)


def test_transport_increases_trained_logit():
    rng = np.random.default_rng(0)
    D = mlp_init([2, 32, 32, 1], "tanh", rng)
    opt = AdamState.for_params(D, lr=5e-3)
    for _ in range(300):
        real = np.array([1.0, 1.0]) + 0.2 * rng.standard_normal((64, 2))
        fake = rng.uniform(-3, 3, size=(64, 2))
        D, opt, *_ = discriminator_step(D, opt, real, fake, PenaltyKind("none"), rng)
    x = rng.uniform(-3, 3, size=(256, 2))
    means = [generate(D, x).mean()]
    for _ in range(10):
        x = functional_step(x, D, 1.0, 0.02)
        means.append(generate(D, x).mean())
    assert np.all(np.diff(means) > 0)


def test_regression_fixed_point():
    G = mlp_init([2, 8, 2], seed=0)
    z = sample_latent(32, 2, 1)
    G2, _, loss = generator_regress(G, z, generate(G, z), 1, AdamState.for_params(G))
    assert loss == 0.0
    np.testing.assert_array_equal(G.flat(), G2.flat())


def test_regression_linear_generator_converges():
    rng = np.random.default_rng(0)
    G = MlpParams((rng.normal(size=(2, 2)),), (np.zeros(2),))
    z = rng.normal(size=(128, 2))
    opt = AdamState.for_params(G, lr=0.05)
    diff = generate(G, z) - 2 * z
    initial = 0.5 * (diff**2).sum(axis=1).mean()
    _, _, final = generator_regress(G, z, 2 * z, 100, opt)
    assert final < initial / 10


def test_regression_loss_is_permutation_invariant():
    G = mlp_init([2, 8, 2], seed=2)
    rng = np.random.default_rng(3)
    z, t = rng.normal(size=(20, 2)), rng.normal(size=(20, 2))
    perm = rng.permutation(20)
    _, _, a = generator_regress(G, z, t, 0, AdamState.for_params(G))
    _, _, b = generator_regress(G, z[perm], t[perm], 0, AdamState.for_params(G))
    assert a == pytest.approx(b, rel=1e-14)


def test_updates_are_isolated():
    cfg = TrainConfig(n_gen=32, regression_steps=2)
    rng = np.random.default_rng(0)
    G = mlp_init([2, 8, 2], seed=1)
    D = mlp_init([2, 8, 1], "relu", seed=2)
    g_flat, d_flat = G.flat().copy(), D.flat().copy()
    fake = generate(G, sample_latent(16, 2, rng))
    D2, *_ = discriminator_step(D, AdamState.for_params(D), rng.normal(size=(16, 2)), fake, cfg.penalty, rng)
    np.testing.assert_array_equal(G.flat(), g_flat)
    assert not np.array_equal(D2.flat(), d_flat)
    G2, *_ = generator_step(G, AdamState.for_params(G), D2, sample_latent(32, 2, 3), cfg)
    np.testing.assert_array_equal(D2.flat(), D2.flat())
    np.testing.assert_array_equal(D.flat(), d_flat)
    assert not np.array_equal(G2.flat(), g_flat)


def test_zero_epochs_returns_initial_state():
    cfg = TrainConfig(epochs=0, seed=3)
    res = train(cfg, ring_mixture())
    assert len(res.log) == 0 and res.snapshots == []
    again = train(cfg, ring_mixture())
    np.testing.assert_array_equal(res.generator.flat(), again.generator.flat())


def test_training_is_deterministic(tmp_path):
    cfg = TrainConfig(epochs=6, n_gen=64, snapshot_interval=3, seed=11)
    a, b = train(cfg, ring_mixture()), train(cfg, ring_mixture())
    assert a.log == b.log
    a.log.to_csv(tmp_path / "a.csv")
    b.log.to_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert [s.epoch for s in a.snapshots] == [3, 6]
    np.testing.assert_array_equal(a.generator.flat(), b.generator.flat())


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(m_steps=0)
    with pytest.raises(ValueError):
        PenaltyKind("two")
    with pytest.raises(ValueError):
        PenaltyKind("eps", 0.1, 0.0)
