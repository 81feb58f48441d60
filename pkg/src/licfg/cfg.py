"""Composite functional gradient (CFG) GAN training with gradient penalties.

Each epoch:

1. ``U`` discriminator Adam steps on the logistic CFG loss plus a gradient
   penalty evaluated at random interpolates between real and generated points.
2. ``N`` fresh latents are pushed through the generator and then transported
   by ``M`` functional steps ``x <- x + eta_m * delta * grad_x D(x)``.
3. The parametric generator is regressed onto the transported points with
   a squared-error loss.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Union

import numpy as np

from .autodiff import Tensor, grad, input_grad, no_grad, row_norm, softplus
from .data import GaussianMixture, sample_latent, sample_mixture
from .nn import AdamState, MlpParams, adam_step, mlp_forward, mlp_init

PENALTY_KINDS = ("none", "one", "zero", "eps")

Disc = Union[MlpParams, Callable[[Tensor], Tensor]]


@dataclass(frozen=True)
class PenaltyKind:
    """Which gradient penalty to add to the discriminator loss.

    kind: "none", "one" (1-centered), "zero" (0-centered) or "eps"
    (eps-centered; subtracts a constant vector of norm ``eps_norm``).
    """

    kind: str = "eps"
    gamma: float = 0.1
    eps_norm: float = 0.3

    def __post_init__(self):
        if self.kind not in PENALTY_KINDS:
            raise ValueError(f"unknown penalty kind {self.kind!r}; expected one of {PENALTY_KINDS}")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.kind == "eps" and self.eps_norm <= 0:
            raise ValueError("eps_norm must be > 0 for the eps-centered penalty")

    def eps_vector(self, d: int) -> np.ndarray:
        """Equal positive entries eps_norm / sqrt(d), so the norm is eps_norm."""
        return np.full(d, self.eps_norm / np.sqrt(d))

    def label(self) -> str:
        if self.kind == "eps":
            return f"eps({self.eps_norm:g})"
        return self.kind


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64  # B
    disc_updates: int = 1  # U
    n_gen: int = 640  # N
    m_steps: int = 15  # M
    eta_m: float = 0.1
    delta: float = 1.0
    penalty: PenaltyKind = field(default_factory=PenaltyKind)
    lr: float = 1e-2  # discriminator Adam learning rate
    g_lr: float | None = 5e-5  # generator regression lr; None -> lr
    beta1: float = 0.5
    beta2: float = 0.999
    d_z: int = 2
    g_hidden: tuple[int, ...] = (64, 64)
    d_hidden: tuple[int, ...] = (64, 64)
    g_activation: str = "tanh"
    d_activation: str = "tanh"
    epochs: int = 2000
    seed: int = 0
    regression_steps: int = 10
    snapshot_interval: int = 100
    divergence_threshold: float = 1e6

    def __post_init__(self):
        for name in ("batch_size", "disc_updates", "n_gen", "m_steps", "regression_steps", "d_z"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.delta <= 0 or self.eta_m <= 0:
            raise ValueError("delta and eta_m must be > 0")
        if self.epochs < 0 or self.snapshot_interval < 1:
            raise ValueError("epochs must be >= 0 and snapshot_interval >= 1")

    def with_penalty(self, **kw) -> "TrainConfig":
        return replace(self, penalty=replace(self.penalty, **kw))

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    d_loss: float
    penalty: float
    grad_norm_mean: float
    g_loss: float
    seconds: float = field(default=0.0, compare=False)


@dataclass
class TrainLog:
    records: list[EpochRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def to_csv(self, path, timing: bool = False) -> None:
        """Write ``epoch,d_loss,penalty,grad_norm_mean,g_loss,seconds``.

        Wall time is non-deterministic, so the ``seconds`` column is left
        empty unless ``timing`` is set.
        """
        with open(path, "w") as fh:
            fh.write("epoch,d_loss,penalty,grad_norm_mean,g_loss,seconds\n")
            for r in self.records:
                secs = f"{r.seconds:.6f}" if timing else ""
                fh.write(
                    f"{r.epoch},{r.d_loss:.17g},{r.penalty:.17g},"
                    f"{r.grad_norm_mean:.17g},{r.g_loss:.17g},{secs}\n"
                )


@dataclass(frozen=True)
class Snapshot:
    """Generator before/after one epoch's regression, and the D that drove it."""

    epoch: int
    g_before: MlpParams
    g_after: MlpParams
    disc: MlpParams


@dataclass
class TrainResult:
    generator: MlpParams
    discriminator: MlpParams
    log: TrainLog
    snapshots: list[Snapshot]
    config: TrainConfig


class TrainingDiverged(RuntimeError):
    """Training produced a non-finite or exploding loss (the "untrained" outcome)."""

    def __init__(self, epoch: int, reason: str, log: TrainLog | None = None):
        super().__init__(f"training diverged at epoch {epoch}: {reason}")
        self.epoch = epoch
        self.reason = reason
        self.log = log


# -- losses and penalties -----------------------------------------------------
def _disc_fn(disc: Disc, leaves=None) -> Callable[[Tensor], Tensor]:
    if isinstance(disc, MlpParams):
        return lambda x: mlp_forward(disc, x, leaves)
    return disc


def disc_logistic_loss(real_logits, fake_logits) -> Tensor:
    """mean softplus(-D(real)) + mean softplus(D(fake))."""
    real_logits = real_logits if isinstance(real_logits, Tensor) else Tensor(real_logits)
    fake_logits = fake_logits if isinstance(fake_logits, Tensor) else Tensor(fake_logits)
    if real_logits.data.size == 0 or fake_logits.data.size == 0:
        raise ValueError("disc_logistic_loss needs non-empty real and fake batches")
    return softplus(-real_logits).mean() + softplus(fake_logits).mean()


def interpolate_pairs(real, fake, seed=0) -> np.ndarray:
    """x_hat_i = t_i real_i + (1 - t_i) fake_i with t_i ~ U(0, 1)."""
    real, fake = np.asarray(real, dtype=np.float64), np.asarray(fake, dtype=np.float64)
    if real.shape != fake.shape:
        raise ValueError(f"real {real.shape} and fake {fake.shape} batches differ in shape")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    t = rng.uniform(0.0, 1.0, size=(len(real), 1))
    # fake + t (real - fake) is exact when real == fake
    return fake + t * (real - fake)


def penalty_term(kind: PenaltyKind, disc: Disc, xhat, leaves=None, with_norms: bool = False):
    """Gradient penalty at the points ``xhat`` (recorded, differentiable in D's weights).

    Pass the discriminator's parameter ``leaves`` to get gradients w.r.t. them.
    With ``with_norms`` also return the per-point ``||grad_x D||`` values.
    """
    x = Tensor(xhat, requires_grad=True)
    if x.data.size == 0:
        raise ValueError("penalty_term needs at least one point")
    fn = _disc_fn(disc, leaves)
    need_graph = kind.kind != "none"
    gx = input_grad(fn(x), x, create_graph=need_graph)
    if kind.kind == "none":
        value = Tensor(0.0)
    else:
        if kind.kind == "one":
            per = (row_norm(gx) - 1.0) ** 2
        elif kind.kind == "zero":
            per = (gx * gx).sum(axis=1)
        else:
            diff = gx - kind.eps_vector(gx.shape[1])
            per = (diff * diff).sum(axis=1)
        value = (0.5 * kind.gamma) * per.mean()
    if with_norms:
        return value, np.linalg.norm(gx.data, axis=1)
    return value


def penalty_norm_terms(grad_norm, kind: str, eps_norm: float = 0.3, g0: float = 1.0):
    """Penalty-adjusted gradient magnitudes used to compare latent N-sizes.

    one: |g - g0|,  zero: g,  eps: g + eps_norm,  none: g.
    """
    g = np.asarray(grad_norm, dtype=np.float64)
    if kind == "one":
        return np.abs(g - g0)
    if kind in ("zero", "none"):
        return g
    if kind == "eps":
        return g + eps_norm
    raise ValueError(f"unknown penalty kind {kind!r}")


# -- functional transport -----------------------------------------------------
def disc_input_grad(disc: Disc, points) -> np.ndarray:
    x = Tensor(points, requires_grad=True)
    return input_grad(_disc_fn(disc)(x), x, create_graph=False).data


def functional_step(points, disc: Disc, delta: float, eta_m: float) -> np.ndarray:
    """x' = x + eta_m * delta * grad_x D(x), row by row."""
    if delta <= 0 or eta_m <= 0:
        raise ValueError("delta and eta_m must be > 0")
    g = disc_input_grad(disc, points)
    if not np.all(np.isfinite(g)):
        raise FloatingPointError("non-finite discriminator gradient in functional step")
    return np.asarray(points, dtype=np.float64) + (eta_m * delta) * g


def functional_update(points, disc: Disc, delta: float, eta_m: float, m_steps: int) -> np.ndarray:
    """Apply ``m_steps`` functional steps with a fixed discriminator."""
    if m_steps < 1:
        raise ValueError("m_steps must be >= 1")
    x = np.asarray(points, dtype=np.float64)
    for _ in range(m_steps):
        x = functional_step(x, disc, delta, eta_m)
    return x


def generate(G: MlpParams, z) -> np.ndarray:
    with no_grad():
        return mlp_forward(G, z).data


def transported_samples(G: MlpParams, D: MlpParams, z, config: TrainConfig) -> np.ndarray:
    """Full CFG generator output: G(z) followed by M functional steps under D."""
    return functional_update(generate(G, z), D, config.delta, config.eta_m, config.m_steps)


# -- parameter updates -----------------------------------------------------------
def _regression_loss(G: MlpParams, leaves, z, targets) -> Tensor:
    diff = mlp_forward(G, z, leaves) - targets
    return 0.5 * (diff * diff).sum(axis=1).mean()


def generator_regress(G: MlpParams, z, targets, steps: int, opt: AdamState):
    """Fit G(z) to fixed targets by ``steps`` Adam iterations on mean 0.5||G(z) - t||^2.

    Returns ``(G, opt, final_loss)``; the final loss is evaluated after the
    last update.
    """
    z, targets = np.asarray(z, dtype=np.float64), np.asarray(targets, dtype=np.float64)
    if len(z) != len(targets):
        raise ValueError(f"{len(z)} latents but {len(targets)} targets")
    if targets.shape[1] != G.sizes[-1]:
        raise ValueError(f"targets have dimension {targets.shape[1]}, generator outputs {G.sizes[-1]}")
    zt, tt = Tensor(z), Tensor(targets)
    for _ in range(steps):
        leaves = G.leaves()
        loss = _regression_loss(G, leaves, zt, tt)
        grads = [g.data for g in grad(loss, leaves)]
        G, opt = adam_step(G, grads, opt)
    with no_grad():
        final = float(_regression_loss(G, None, zt, tt).data)
    return G, opt, final


def discriminator_step(D: MlpParams, opt: AdamState, real, fake, penalty: PenaltyKind, rng):
    """One Adam step on the logistic loss plus penalty.

    ``fake`` must be a plain array: the generator never enters this graph.
    Returns ``(D, opt, d_loss, penalty_value, mean_grad_norm)``.
    """
    xhat = interpolate_pairs(real, fake, rng)
    leaves = D.leaves()
    loss = disc_logistic_loss(mlp_forward(D, real, leaves), mlp_forward(D, fake, leaves))
    pen, norms = penalty_term(penalty, D, xhat, leaves, with_norms=True)
    total = loss + pen
    grads = [g.data for g in grad(total, leaves)]
    D, opt = adam_step(D, grads, opt)
    return D, opt, float(loss.data), float(pen.data), float(norms.mean())


def generator_step(G: MlpParams, opt: AdamState, D: MlpParams, z, config: TrainConfig):
    """Transport G(z) through M functional steps under a frozen D, then regress G."""
    targets = transported_samples(G, D, z, config)
    return generator_regress(G, z, targets, config.regression_steps, opt)


def _check(value: float, name: str, epoch: int, limit: float, log: TrainLog):
    if not np.isfinite(value) or abs(value) > limit:
        raise TrainingDiverged(epoch, f"{name}={value!r}", log)


def train(config: TrainConfig, mixture: GaussianMixture, progress: Callable | None = None) -> TrainResult:
    """Run CFG training. Deterministic for a fixed ``config.seed``.

    Raises :class:`TrainingDiverged` when a loss becomes non-finite or its
    magnitude exceeds ``config.divergence_threshold``.
    """
    rng = np.random.default_rng(config.seed)
    d = mixture.dim
    G = mlp_init([config.d_z, *config.g_hidden, d], config.g_activation, rng)
    D = mlp_init([d, *config.d_hidden, 1], config.d_activation, rng)
    adam_kw = dict(lr=config.lr, beta1=config.beta1, beta2=config.beta2)
    d_opt = AdamState.for_params(D, **adam_kw)
    g_opt = AdamState.for_params(G, **{**adam_kw, "lr": config.g_lr or config.lr})
    log, snapshots = TrainLog(), []
    limit = config.divergence_threshold

    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        try:
            d_loss = pen = gnorm = 0.0
            for _ in range(config.disc_updates):
                real = sample_mixture(mixture, config.batch_size, rng)
                fake = generate(G, sample_latent(config.batch_size, config.d_z, rng))
                D, d_opt, d_loss, pen, gnorm = discriminator_step(D, d_opt, real, fake, config.penalty, rng)
                _check(d_loss, "d_loss", epoch, limit, log)
            z = sample_latent(config.n_gen, config.d_z, rng)
            G_before = G
            G, g_opt, g_loss = generator_step(G, g_opt, D, z, config)
            _check(g_loss, "g_loss", epoch, limit, log)
        except FloatingPointError as exc:
            raise TrainingDiverged(epoch, str(exc), log) from exc
        log.records.append(EpochRecord(epoch, d_loss, pen, gnorm, g_loss, time.perf_counter() - t0))
        if epoch % config.snapshot_interval == 0 or epoch == config.epochs:
            snapshots.append(Snapshot(epoch, G_before, G, D))
        if progress is not None:
            progress(epoch, log.records[-1])
    return TrainResult(G, D, log, snapshots, config)
