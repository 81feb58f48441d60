"""Training-dynamics checks: CFG vs common-GAN identities and a Dirac toy game.

Dirac toy: real data is a point mass at ``theta_star``, the generator is
``G(z) = theta`` and the discriminator is linear, ``D(x) = psi * x``. The
discriminator takes gradient steps on the CFG logistic loss plus a penalty;
the generator takes one regression step toward its functionally transported
output ``theta + eta_delta * psi``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit

from .autodiff import Tensor, grad, softplus
from .cfg import PenaltyKind, disc_input_grad, generate
from .nn import MlpParams, mlp_forward

DIVERGENCE_LIMIT = 1e6


# -- loss identity -------------------------------------------------------------
def cfg_loss_terms(real_logits, fake_logits) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample ln(1 + exp(-D(real))) and ln(1 + exp(D(fake)))."""
    return np.logaddexp(0.0, -np.asarray(real_logits, float)), np.logaddexp(0.0, np.asarray(fake_logits, float))


def gan_log_terms(real_logits, fake_logits, stable: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample ln d(real) and ln(1 - d(fake)) with d the logistic function.

    ``stable=False`` takes the log of the probabilities d(real) and
    1 - d(fake); the latter is formed as d(-fake), which is the same number
    without the cancellation in ``1 - d``. Probabilities underflow to 0 for
    logits beyond a few hundred. ``stable=True`` uses log-sigmoid instead.
    """
    r, f = np.asarray(real_logits, float), np.asarray(fake_logits, float)
    if stable:
        return log_expit(r), log_expit(-f)
    with np.errstate(divide="ignore"):
        return np.log(expit(r)), np.log(expit(-f))


def loss_equivalence_check(real_logits, fake_logits=None, stable: bool | None = None) -> float:
    """Max |L_CFG + L_GAN| over per-sample terms and over the batch means.

    ``stable=None`` picks the literal formulas unless some |logit| > 30.
    """
    real_logits = np.asarray(real_logits, float).ravel()
    fake_logits = real_logits if fake_logits is None else np.asarray(fake_logits, float).ravel()
    if not (np.all(np.isfinite(real_logits)) and np.all(np.isfinite(fake_logits))):
        raise ValueError("logits must be finite")
    if stable is None:
        stable = max(np.abs(real_logits).max(initial=0), np.abs(fake_logits).max(initial=0)) > 30
    cr, cf = cfg_loss_terms(real_logits, fake_logits)
    gr, gf = gan_log_terms(real_logits, fake_logits, stable)
    per = max(np.abs(cr + gr).max(initial=0.0), np.abs(cf + gf).max(initial=0.0))
    total = abs((cr.mean() + cf.mean()) + (gr.mean() + gf.mean()))
    return float(max(per, total))


# -- generator vector fields -------------------------------------------------------
@dataclass(frozen=True)
class FieldCheck:
    max_deviation: float  # max over samples of 1 - cosine similarity
    max_value_gap: float  # max |v_cfg - v_gan| (meaningful when eta_1*delta = sigmoid(D(G(z))))
    skipped: int
    fields_cfg: np.ndarray
    fields_gan: np.ndarray


def _flat(gs) -> np.ndarray:
    return np.concatenate([g.data.ravel() for g in gs])


def generator_fields(G: MlpParams, D: MlpParams, z, eta_delta) -> tuple[np.ndarray, np.ndarray]:
    """Per-latent parameter-space fields of the CFG and common-GAN generators.

    CFG: gradient of 0.5 |G(z) - target|^2 with the target
    ``G(z) + eta_delta * grad_x D(G(z))`` held fixed (one functional step).
    GAN: gradient of ln(1 - sigmoid(D(G(z)))).
    """
    z = np.atleast_2d(np.asarray(z, float))
    x = generate(G, z)
    eta_delta = np.broadcast_to(np.asarray(eta_delta, float), (len(z),))
    targets = x + eta_delta[:, None] * disc_input_grad(D, x)
    cfg_rows, gan_rows = [], []
    for i in range(len(z)):
        zi = Tensor(z[i : i + 1])
        leaves = G.leaves()
        diff = mlp_forward(G, zi, leaves) - targets[i : i + 1]
        cfg_rows.append(_flat(grad(0.5 * (diff * diff).sum(), leaves)))
        leaves = G.leaves()
        logit = mlp_forward(D, mlp_forward(G, zi, leaves))
        # ln(1 - sigmoid(D)) = -softplus(D)
        gan_rows.append(_flat(grad(-softplus(logit).sum(), leaves)))
    return np.array(cfg_rows), np.array(gan_rows)


def field_equivalence_check(G: MlpParams, D: MlpParams, z, eta_1: float = 1.0, delta: float = 1.0) -> FieldCheck:
    """Directional agreement of the CFG (M=1) and common-GAN generator fields."""
    vc, vg = generator_fields(G, D, z, np.asarray(eta_1, float) * delta)
    nc, ng = np.linalg.norm(vc, axis=1), np.linalg.norm(vg, axis=1)
    ok = (nc > 0) & (ng > 0)
    cos = np.einsum("ij,ij->i", vc[ok], vg[ok]) / (nc[ok] * ng[ok])
    dev = float(np.max(1.0 - cos)) if ok.any() else 0.0
    gap = float(np.max(np.abs(vc - vg))) if len(vc) else 0.0
    return FieldCheck(dev, gap, int((~ok).sum()), vc, vg)


def gan_scaling(G: MlpParams, D: MlpParams, z) -> np.ndarray:
    """sigmoid(D(G(z))): the per-sample eta_1*delta making both fields equal."""
    return expit(generate(D, generate(G, z))[:, 0])


# -- Dirac toy game ---------------------------------------------------------------------
@dataclass
class Trajectory:
    theta: np.ndarray
    psi: np.ndarray
    lr: float
    integrator: str
    penalty: PenaltyKind
    diverged: bool = False

    def __len__(self):
        return len(self.theta)

    def final_distance(self, theta_star: float = 0.0) -> float:
        return float(np.hypot(self.theta[-1] - theta_star, self.psi[-1]))


def _penalty_grad_psi(psi: float, penalty: PenaltyKind) -> float:
    """d/d psi of the penalty for D(x) = psi * x (so grad_x D = psi everywhere)."""
    g = penalty.gamma
    if penalty.kind == "none":
        return 0.0
    if penalty.kind == "zero":
        return g * psi
    if penalty.kind == "one":
        return g * (abs(psi) - 1.0) * np.sign(psi)
    return g * (psi - penalty.eps_norm)  # 1-D eps vector is +eps_norm


def dirac_simulate(
    penalty: PenaltyKind,
    steps: int = 5000,
    lr: float = 0.05,
    init: tuple[float, float] = (1.0, 1.0),
    integrator: str = "alternating",
    theta_star: float = 0.0,
    eta_delta: float = 1.0,
) -> Trajectory:
    """Explicit Euler on the Dirac game; records (theta, psi) after every step."""
    if steps < 1 or lr <= 0:
        raise ValueError("steps must be >= 1 and lr > 0")
    if integrator not in ("alternating", "simultaneous"):
        raise ValueError(f"unknown integrator {integrator!r}")
    theta, psi = map(float, init)
    th, ps = [theta], [psi]
    diverged = False

    def d_grad(theta, psi):
        # d/d psi [softplus(-psi theta*) + softplus(psi theta)] + penalty
        return -theta_star * expit(-psi * theta_star) + theta * expit(psi * theta) + _penalty_grad_psi(psi, penalty)

    for _ in range(steps):
        new_psi = psi - lr * d_grad(theta, psi)
        # regression toward theta + eta_delta * psi: gradient is -eta_delta * psi
        use_psi = new_psi if integrator == "alternating" else psi
        theta = theta + lr * eta_delta * use_psi
        psi = new_psi
        if not (np.isfinite(theta) and np.isfinite(psi)) or max(abs(theta), abs(psi)) > DIVERGENCE_LIMIT:
            diverged = True
            break
        th.append(theta)
        ps.append(psi)
    return Trajectory(np.array(th), np.array(ps), lr, integrator, penalty, diverged)
