"""Train the CFG generator on the 8-component Ring with an eps-centered penalty.

Pass a number of epochs as the first argument (default 300 for a quick look;
the acceptance suite uses 2000). Writes scatter plots of the raw generator
and of its transported samples to ``ring_*.svg`` in the current directory.
"""
import sys

from licfg.cfg import PenaltyKind, TrainConfig, generate, train, transported_samples
from licfg.cli import emit_scatter_svg
from licfg.data import ring_mixture, sample_latent, sample_mixture
from licfg.metrics import frechet_2d, mode_coverage

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 300
ring = ring_mixture()
cfg = TrainConfig(epochs=epochs, penalty=PenaltyKind("eps", 0.1, 0.3), snapshot_interval=max(1, epochs // 5))


def progress(epoch, rec):
    if epoch % cfg.snapshot_interval == 0:
        print(f"epoch {epoch:5d}  d_loss {rec.d_loss:.4f}  penalty {rec.penalty:.5f}  |grad D| {rec.grad_norm_mean:.3f}  g_loss {rec.g_loss:.5f}")


result = train(cfg, ring, progress)

z = sample_latent(2000, cfg.d_z, 1)
x = generate(result.generator, z)
xt = transported_samples(result.generator, result.discriminator, z, cfg)
real = sample_mixture(ring, 2000, 2)
for name, pts in (("raw", x), ("transported", xt)):
    modes, hq = mode_coverage(pts, ring, min_count=10)
    print(f"{name:>12}: modes {modes}/8  high-quality fraction {hq:.3f}  FD2 {frechet_2d(real, pts):.4f}")
    emit_scatter_svg(pts, ring.centers, f"ring_{name}.svg")
