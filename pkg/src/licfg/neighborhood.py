"""Latent neighborhood size (N-size) estimators and mode attraction tests.

The N-size of a latent ``z1`` between generator snapshots ``G_t`` and
``G_t1`` is

    r = eps_hat / (2 * inf_z [ |G_t(z1) - G_t(z)| / |z1 - z|
                               + |G_t1(z1) - G_t1(z)| / |z1 - z| ])

The infimum is estimated by a minimum over a finite probe set.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from .cfg import (
    PenaltyKind,
    TrainConfig,
    TrainingDiverged,
    TrainResult,
    disc_input_grad,
    functional_step,
    generate,
    penalty_norm_terms,
    train,
)
from .data import GaussianMixture, sample_latent
from .nn import MlpParams

Gen = Union[MlpParams, Callable[[np.ndarray], np.ndarray]]

COINCIDENT_TOL = 1e-9


@dataclass(frozen=True)
class NSizeEstimate:
    r_hat: float
    epsilon_hat: float
    probe_count: int
    ratio_min: float


@dataclass(frozen=True)
class ModeReport:
    alpha: float
    assignments: np.ndarray  # mode index per sample, -1 when unassigned
    attracted_flags: np.ndarray | None = None
    distracted_flags: np.ndarray | None = None

    @property
    def assigned_fraction(self) -> float:
        return float(np.mean(self.assignments >= 0)) if len(self.assignments) else 0.0


def _gen(g: Gen) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(g, MlpParams):
        return lambda z: generate(g, z)
    return lambda z: np.asarray(g(np.asarray(z, dtype=np.float64)), dtype=np.float64)


def _latent_gaps(z1, probes) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    z1 = np.asarray(z1, dtype=np.float64).reshape(1, -1)
    probes = np.atleast_2d(np.asarray(probes, dtype=np.float64))
    if len(probes) < 1:
        raise ValueError("need at least one probe")
    gap = np.linalg.norm(probes - z1, axis=1)
    if np.any(gap <= COINCIDENT_TOL):
        raise ValueError("a probe coincides with z1")
    return z1, probes, gap


def _finish(ratios: np.ndarray, epsilon_hat: float) -> NSizeEstimate:
    rmin = float(ratios.min())
    r_hat = epsilon_hat / (2.0 * rmin) if rmin > 0 else np.inf
    # probe_count counts z1 plus its probes
    return NSizeEstimate(r_hat, epsilon_hat, len(ratios) + 1, rmin)


def nsize_estimate(G_t: Gen, G_t1: Gen, z1, probes, epsilon_hat: float = 0.1) -> NSizeEstimate:
    """Finite-probe estimate of the latent N-size around ``z1``."""
    if epsilon_hat <= 0:
        raise ValueError("epsilon_hat must be > 0")
    z1, probes, gap = _latent_gaps(z1, probes)
    ft, ft1 = _gen(G_t), _gen(G_t1)
    a = np.linalg.norm(ft(probes) - ft(z1), axis=1)
    b = np.linalg.norm(ft1(probes) - ft1(z1), axis=1)
    return _finish((a + b) / gap, epsilon_hat)


def _transport_q_sum(D, x0: np.ndarray, penalty: PenaltyKind, delta, eta_m, m_steps) -> np.ndarray:
    """Sum over the M transport steps of the penalty-adjusted gradient magnitude."""
    if callable(D) and not isinstance(D, MlpParams):
        grad_at = D
    else:
        grad_at = lambda x: disc_input_grad(D, x)  # noqa: E731
    total = np.zeros(len(x0))
    x = x0
    for _ in range(m_steps):
        g = grad_at(x)
        total += penalty_norm_terms(np.linalg.norm(g, axis=1), penalty.kind, penalty.eps_norm)
        x = x + (eta_m * delta) * g
    return total


def nsize_gp_bound(
    G_t: Gen,
    D,
    penalty: PenaltyKind,
    delta: float,
    eta_m: float,
    m_steps: int,
    z1,
    probes,
    epsilon_hat: float = 0.1,
) -> NSizeEstimate:
    """N-size with the second generator replaced by its gradient-penalty bound.

    Denominator per probe z:
        (2 |G_t(z1) - G_t(z)| + eta_m delta sum_m [q(x_m(z1)) + q(x_m(z))]) / |z1 - z|
    where x_m is the m-th transport iterate starting at G_t(.) and q is the
    penalty-adjusted gradient magnitude: |g - 1| (one), g (zero/none),
    g + eps_norm (eps).

    ``D`` may be an :class:`MlpParams` discriminator or a callable mapping
    an (n, d) array to the (n, d) input gradients.
    """
    if epsilon_hat <= 0:
        raise ValueError("epsilon_hat must be > 0")
    z1, probes, gap = _latent_gaps(z1, probes)
    ft = _gen(G_t)
    x1, xp = ft(z1), ft(probes)
    q1 = _transport_q_sum(D, x1, penalty, delta, eta_m, m_steps)
    qp = _transport_q_sum(D, xp, penalty, delta, eta_m, m_steps)
    num = 2.0 * np.linalg.norm(xp - x1, axis=1) + eta_m * delta * (q1 + qp)
    return _finish(num / gap, epsilon_hat)


# -- modes ---------------------------------------------------------------------
def assign_modes(samples, centers, alpha: float) -> ModeReport:
    """Nearest center within ``alpha``, else -1."""
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    if centers.size == 0:
        raise ValueError("need at least one mode center")
    x = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    d = np.linalg.norm(x[:, None, :] - centers[None, :, :], axis=-1)
    idx = d.argmin(axis=1)
    idx[d[np.arange(len(x)), idx] >= alpha] = -1
    return ModeReport(alpha, idx)


def attracted(z, y_k, G_t: Gen, G_t1: Gen, epsilon_hat: float):
    """|y_k - G_t1(z)| + eps_hat < |y_k - G_t(z)|; rowwise for a batch of z."""
    if epsilon_hat <= 0:
        raise ValueError("epsilon_hat must be > 0")
    z2 = np.atleast_2d(np.asarray(z, dtype=np.float64))
    after = np.linalg.norm(np.asarray(y_k) - _gen(G_t1)(z2), axis=1)
    before = np.linalg.norm(np.asarray(y_k) - _gen(G_t)(z2), axis=1)
    out = after + epsilon_hat < before
    return bool(out[0]) if np.ndim(z) == 1 else out


def distracted(z, y_k, y_m, G_t: Gen, G_t1: Gen, epsilon_hat: float, alpha: float):
    """|y_m - G_t1(z)| + (eps_hat/2 - 2 alpha) < |y_k - G_t(z)|; rowwise for a batch."""
    if epsilon_hat <= 0 or alpha <= 0:
        raise ValueError("epsilon_hat and alpha must be > 0")
    z2 = np.atleast_2d(np.asarray(z, dtype=np.float64))
    away = np.linalg.norm(np.asarray(y_m) - _gen(G_t1)(z2), axis=1)
    near = np.linalg.norm(np.asarray(y_k) - _gen(G_t)(z2), axis=1)
    out = away + (epsilon_hat / 2.0 - 2.0 * alpha) < near
    return bool(out[0]) if np.ndim(z) == 1 else out


def mode_report(G_t: Gen, G_t1: Gen, z, centers, alpha: float = 0.3, epsilon_hat: float = 0.1) -> ModeReport:
    """Assign G_t1(z) to modes and test attraction / distraction per latent.

    The in-mode point is the center nearest G_t1(z); the out-of-mode point is
    the second-nearest center.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    x1 = _gen(G_t1)(z)
    report = assign_modes(x1, centers, alpha)
    d = np.linalg.norm(x1[:, None, :] - centers[None, :, :], axis=-1)
    order = np.argsort(d, axis=1)
    y_k = centers[order[:, 0]]
    att = attracted(z, y_k, G_t, G_t1, epsilon_hat)
    if len(centers) > 1:
        y_m = centers[order[:, 1]]
        dis = distracted(z, y_k, y_m, G_t, G_t1, epsilon_hat, alpha)
    else:
        dis = np.zeros(len(z), dtype=bool)
    return ModeReport(alpha, report.assignments, att, dis)


def nonpositive_grad_fraction(D: MlpParams, points) -> float:
    """Share of grad_x D components that are <= 0 at ``points``."""
    return float(np.mean(disc_input_grad(D, points) <= 0))


# -- ordering experiment ---------------------------------------------------------
DEFAULT_PENALTIES = (
    PenaltyKind("one", 0.1),
    PenaltyKind("zero", 0.1),
    PenaltyKind("eps", 0.1, 0.3),
)


def snapshot_nsize(
    result: TrainResult,
    epsilon_hat: float = 0.1,
    n_z1: int = 64,
    n_probes: int = 4096,
    seed: int = 0,
    skip_first: int = 0,
) -> tuple[float, float]:
    """Median r_hat and ratio_min over snapshots and z1 draws of one run."""
    rng = np.random.default_rng(seed)
    d_z = result.config.d_z
    r_hats, ratios = [], []
    for snap in result.snapshots[skip_first:]:
        z1s = sample_latent(n_z1, d_z, rng)
        probes = sample_latent(n_probes, d_z, rng)
        # batch the generator calls; the estimator itself is per z1
        gt_p, gt1_p = generate(snap.g_before, probes), generate(snap.g_after, probes)
        gt_z, gt1_z = generate(snap.g_before, z1s), generate(snap.g_after, z1s)
        for i, z1 in enumerate(z1s):
            gap = np.linalg.norm(probes - z1, axis=1)
            keep = gap > COINCIDENT_TOL
            ratio = (
                np.linalg.norm(gt_p[keep] - gt_z[i], axis=1) + np.linalg.norm(gt1_p[keep] - gt1_z[i], axis=1)
            ) / gap[keep]
            est = _finish(ratio, epsilon_hat)
            r_hats.append(est.r_hat)
            ratios.append(est.ratio_min)
    return float(np.median(r_hats)), float(np.median(ratios))


@dataclass(frozen=True)
class NSizeRow:
    penalty: str
    seed: int
    epoch: int
    r_hat: float
    ratio_min: float
    grad_norm_mean: float
    untrained: bool = False


def nsize_rows(
    runs: Mapping[tuple[str, int], TrainResult | TrainingDiverged],
    epsilon_hat: float = 0.1,
    n_z1: int = 64,
    n_probes: int = 4096,
    skip_first: int = 0,
) -> list[NSizeRow]:
    """One row per (penalty label, seed) run."""
    rows = []
    for (label, seed), run in runs.items():
        if isinstance(run, TrainingDiverged):
            rows.append(NSizeRow(label, seed, run.epoch, np.nan, np.nan, np.nan, True))
            continue
        r_hat, rmin = snapshot_nsize(run, epsilon_hat, n_z1, n_probes, seed, skip_first)
        gn = float(run.log.column("grad_norm_mean").mean()) if len(run.log) else np.nan
        last = run.snapshots[-1].epoch if run.snapshots else 0
        rows.append(NSizeRow(label, seed, last, r_hat, rmin, gn))
    return rows


def ordering_experiment(
    template: TrainConfig,
    seeds: Sequence[int],
    mixture: GaussianMixture,
    penalties: Sequence[PenaltyKind] = DEFAULT_PENALTIES,
    epsilon_hat: float = 0.1,
    n_z1: int = 64,
    n_probes: int = 4096,
    runs: dict | None = None,
    labels: Sequence[str] | None = None,
) -> list[NSizeRow]:
    """Train one model per (penalty, seed) and tabulate their N-sizes.

    ``runs`` may carry already-trained results keyed by (label, seed); missing
    entries are trained and added to it. Diverged runs become "untrained" rows.
    """
    if len(seeds) < 3:
        raise ValueError("ordering_experiment needs at least 3 seeds")
    runs = {} if runs is None else runs
    labels = list(labels) if labels is not None else [p.label() for p in penalties]
    if len(set(labels)) != len(labels):
        raise ValueError("penalty labels must be unique; pass `labels` for repeated kinds")
    selected = {}
    for label, pen in zip(labels, penalties):
        for seed in seeds:
            key = (label, seed)
            if key not in runs:
                cfg = TrainConfig(**{**_fields(template), "penalty": pen, "seed": seed})
                try:
                    runs[key] = train(cfg, mixture)
                except TrainingDiverged as exc:
                    runs[key] = exc
            selected[key] = runs[key]
    return nsize_rows(selected, epsilon_hat, n_z1, n_probes)


def _fields(cfg: TrainConfig) -> dict:
    return {k: getattr(cfg, k) for k in cfg.__dataclass_fields__}


def median_by_penalty(rows: Sequence[NSizeRow]) -> dict[str, float]:
    """Median r_hat per penalty, ignoring untrained runs."""
    out: dict[str, list[float]] = {}
    for r in rows:
        if not r.untrained:
            out.setdefault(r.penalty, []).append(r.r_hat)
    return {k: float(np.median(v)) for k, v in out.items()}


def write_nsize_csv(rows: Sequence[NSizeRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["penalty", "seed", "epoch", "r_hat", "ratio_min", "grad_norm_mean"])
        for r in rows:
            if r.untrained:
                w.writerow([r.penalty, r.seed, r.epoch, "untrained", "untrained", "untrained"])
            else:
                w.writerow([r.penalty, r.seed, r.epoch, f"{r.r_hat:.17g}", f"{r.ratio_min:.17g}", f"{r.grad_norm_mean:.17g}"])
