"""Command-line experiment runner (``licfg <subcommand>``).

Exit codes: 0 success, 1 usage or input error, 2 training diverged
("untrained").
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .cfg import PENALTY_KINDS, PenaltyKind, TrainingDiverged, train, transported_samples, generate
from .config import ConfigError, ConfigFile, override, parse_config, render_config
from .data import MIXTURES, get_mixture, read_points_csv, sample_latent, sample_mixture, write_points_csv
from .dynamics import dirac_simulate
from .metrics import frechet_2d, knn_precision_recall, mode_coverage
from .neighborhood import median_by_penalty, ordering_experiment, write_nsize_csv
from .nn import save_params

log = logging.getLogger("licfg")

EXIT_OK, EXIT_USAGE, EXIT_UNTRAINED = 0, 1, 2
SVG_SIZE = 400
VIEW = 5.0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- SVG -------------------------------------------------------------------------------
def to_svg_coords(points) -> np.ndarray:
    """Map data coordinates in [-5, 5]^2 to pixel coordinates (y axis flipped)."""
    p = np.asarray(points, float).reshape(-1, 2)
    scale = SVG_SIZE / (2 * VIEW)
    return np.column_stack([(p[:, 0] + VIEW) * scale, (VIEW - p[:, 1]) * scale])


def emit_scatter_svg(points, centers, path, arm: float = 6.0) -> None:
    """Scatter plot with a fixed [-5, 5]^2 viewport and centers drawn as crosses."""
    pts = np.asarray(points, float).reshape(-1, 2)
    if pts.size and pts.shape[1] != 2:
        raise ValueError("points must be 2-D")
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_SIZE}" height="{SVG_SIZE}" '
        f'viewBox="0 0 {SVG_SIZE} {SVG_SIZE}">',
        f'<rect x="0" y="0" width="{SVG_SIZE}" height="{SVG_SIZE}" fill="white"/>',
        '<g id="points" fill="steelblue" fill-opacity="0.5">',
    ]
    out += [f'<circle cx="{x:.3f}" cy="{y:.3f}" r="1.5"/>' for x, y in to_svg_coords(pts)]
    out += ["</g>", '<g id="centers" stroke="crimson" stroke-width="1.5">']
    for x, y in to_svg_coords(centers):
        out.append(
            f'<path class="center" data-x="{x:.3f}" data-y="{y:.3f}" '
            f'd="M{x - arm:.3f},{y:.3f}H{x + arm:.3f}M{x:.3f},{y - arm:.3f}V{y + arm:.3f}"/>'
        )
    out += ["</g>", "</svg>"]
    Path(path).write_text("\n".join(out) + "\n")


# -- helpers -----------------------------------------------------------------------------
def _load_config(args) -> ConfigFile:
    cfg = parse_config(args.config) if args.config else ConfigFile()
    return override(cfg, seed=args.seed, out=args.out)


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def _write_run(result, cfg: ConfigFile, out: Path) -> None:
    mix = get_mixture(cfg.dataset)
    result.log.to_csv(out / "train_log.csv", timing=cfg.output.timing)
    save_params(result.generator, out / "generator.ckpt")
    save_params(result.discriminator, out / "discriminator.ckpt")
    snaps = out / "snapshots"
    snaps.mkdir(exist_ok=True)
    for s in result.snapshots:
        stem = f"epoch_{s.epoch:06d}"
        save_params(s.g_before, snaps / f"{stem}_g_before.ckpt")
        save_params(s.g_after, snaps / f"{stem}_g_after.ckpt")
        save_params(s.disc, snaps / f"{stem}_disc.ckpt")
    z = sample_latent(cfg.output.n_samples, cfg.train.d_z, cfg.output.sample_seed)
    x = generate(result.generator, z)
    xt = transported_samples(result.generator, result.discriminator, z, cfg.train)
    write_points_csv(x, out / "samples.csv")
    write_points_csv(xt, out / "samples_transported.csv")
    emit_scatter_svg(x, mix.centers, out / "samples.svg")
    emit_scatter_svg(xt, mix.centers, out / "samples_transported.svg")


# -- subcommands ------------------------------------------------------------------------
def cmd_data(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    if not args.out:
        raise UsageError("--out is required")
    mix = get_mixture(args.dataset)
    pts = sample_mixture(mix, args.n, seed=args.seed if args.seed is not None else 0)
    write_points_csv(pts, args.out)
    if args.svg:
        emit_scatter_svg(pts, mix.centers, args.svg)
    print(f"wrote {args.n} points from {args.dataset} to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_config(args)
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved").write_text(render_config(cfg))
    mix = get_mixture(cfg.dataset)

    def progress(epoch, rec):
        if epoch % cfg.train.snapshot_interval == 0:
            log.info("epoch %d d_loss %.4f g_loss %.5f grad_norm %.3f", rec.epoch, rec.d_loss, rec.g_loss, rec.grad_norm_mean)

    try:
        result = train(cfg.train, mix, progress=progress)
    except TrainingDiverged as exc:
        if exc.log is not None:
            exc.log.to_csv(out / "train_log.csv", timing=cfg.output.timing)
        print(f"untrained: {exc}")
        return EXIT_UNTRAINED
    _write_run(result, cfg, out)
    z = sample_latent(cfg.output.n_samples, cfg.train.d_z, cfg.output.sample_seed)
    modes, hq = mode_coverage(transported_samples(result.generator, result.discriminator, z, cfg.train), mix)
    print(f"trained {cfg.train.epochs} epochs: modes_hit={modes}/{mix.n_components} hq_fraction={hq:.4f}")
    return EXIT_OK


def cmd_nsize(args) -> int:
    cfg = _load_config(args)
    seeds = _int_list(args.seeds) if args.seeds else list(cfg.nsize.seeds)
    if len(seeds) < 3:
        raise UsageError("the ordering experiment needs at least 3 seeds")
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    p = cfg.train.penalty
    penalties = [PenaltyKind("one", p.gamma), PenaltyKind("zero", p.gamma), PenaltyKind("eps", p.gamma, p.eps_norm)]
    n = cfg.nsize
    rows = ordering_experiment(
        cfg.train, seeds, get_mixture(cfg.dataset), penalties, n.epsilon_hat, n.n_z1, n.n_probes
    )
    write_nsize_csv(rows, out / "nsize.csv")
    for label, med in median_by_penalty(rows).items():
        print(f"{label}: median r_hat = {med:.6g}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    real, fake = read_points_csv(args.real), read_points_csv(args.fake)
    fd2 = frechet_2d(real, fake)
    prec, rec = knn_precision_recall(real, fake, k=args.k)
    modes, hq = mode_coverage(fake, get_mixture(args.dataset))
    row = f"{fd2:.10g},{prec:.10g},{rec:.10g},{modes},{hq:.10g}"
    header = "fd2,precision,recall,modes_hit,hq_fraction"
    print(header)
    print(row)
    if args.out:
        Path(args.out).write_text(header + "\n" + row + "\n")
    return EXIT_OK


def cmd_dynamics(args) -> int:
    kinds = [k.strip() for k in args.penalties.split(",") if k.strip()]
    bad = [k for k in kinds if k not in PENALTY_KINDS]
    if bad or not kinds:
        raise UsageError(f"penalties must be drawn from {PENALTY_KINDS}, got {args.penalties!r}")
    init = _float_list(args.init)
    if len(init) != 2:
        raise UsageError("--init takes two numbers: theta,psi")
    if args.steps < 1 or args.lr <= 0:
        raise UsageError("--steps must be >= 1 and --lr > 0")
    out = Path(args.out or "dynamics")
    out.mkdir(parents=True, exist_ok=True)
    for kind in kinds:
        pen = PenaltyKind(kind, args.gamma, args.eps_norm)
        traj = dirac_simulate(pen, args.steps, args.lr, tuple(init), args.integrator)
        with open(out / f"trajectory_{kind}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "theta", "psi"])
            for i, (t, s) in enumerate(zip(traj.theta, traj.psi)):
                w.writerow([i, f"{t:.17g}", f"{s:.17g}"])
        status = "diverged" if traj.diverged else "ok"
        print(f"{pen.label()}: final_distance={traj.final_distance():.6g} steps={len(traj) - 1} {status}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    eps_values = _float_list(args.eps_values)
    seeds = _int_list(args.seeds)
    if not eps_values or not seeds:
        raise UsageError("--eps-values and --seeds must be non-empty")
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    mix = get_mixture(cfg.dataset)
    z = sample_latent(cfg.output.n_samples, cfg.train.d_z, cfg.output.sample_seed)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["eps_norm", "seed", "status", "epoch", "modes_hit", "hq_fraction"])
        for eps in eps_values:
            for seed in seeds:
                tc = replace(cfg.train, seed=seed, penalty=replace(cfg.train.penalty, eps_norm=eps))
                try:
                    res = train(tc, mix)
                except TrainingDiverged as exc:
                    w.writerow([eps, seed, "untrained", exc.epoch, "", ""])
                    print(f"eps_norm={eps} seed={seed}: untrained at epoch {exc.epoch}")
                    continue
                modes, hq = mode_coverage(transported_samples(res.generator, res.discriminator, z, tc), mix)
                w.writerow([eps, seed, "trained", tc.epochs, modes, f"{hq:.6g}"])
                print(f"eps_norm={eps} seed={seed}: modes_hit={modes} hq_fraction={hq:.4f}")
                fh.flush()
    return EXIT_OK


# -- entry point ---------------------------------------------------------------------------
def _common(p: argparse.ArgumentParser, config: bool = True) -> None:
    if config:
        p.add_argument("--config", help="sectioned key=value config file")
    p.add_argument("--seed", type=int, help="override the run seed")
    p.add_argument("--out", help="output directory (or file for `data` and `metrics`)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="licfg", description="Composite functional gradient GAN experiments on 2-D mixtures.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-q", "--quiet", action="store_true", help="only log warnings")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("data", help="sample a Gaussian mixture to CSV")
    p.add_argument("--dataset", choices=sorted(MIXTURES), default="ring")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--svg", help="also write a scatter plot")
    _common(p, config=False)
    p.set_defaults(func=cmd_data)

    p = sub.add_parser("train", help="train one model from a config file")
    _common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("nsize", help="latent N-size ordering experiment over penalties")
    p.add_argument("--seeds", help="comma-separated seeds (default from [nsize] seeds)")
    _common(p)
    p.set_defaults(func=cmd_nsize)

    p = sub.add_parser("metrics", help="compare two CSV point sets")
    p.add_argument("real")
    p.add_argument("fake")
    p.add_argument("--dataset", choices=sorted(MIXTURES), default="ring", help="mixture for mode coverage")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--out", help="also write the CSV row to this file")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("dynamics", help="Dirac toy trajectories per penalty")
    p.add_argument("--penalties", default="none,one,zero,eps")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--eps-norm", type=float, default=0.3)
    p.add_argument("--steps", type=int, default=5000)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--init", default="1,1")
    p.add_argument("--integrator", choices=["alternating", "simultaneous"], default="alternating")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_dynamics)

    p = sub.add_parser("sweep", help="tabulate trained/untrained outcomes over eps_norm values")
    p.add_argument("--eps-values", default="0.1,0.3,1,5")
    p.add_argument("--seeds", default="0,1,2,3,4")
    _common(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"licfg {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
