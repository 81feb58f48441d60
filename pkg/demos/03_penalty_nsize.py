"""Compare latent neighborhood sizes under the three centered penalties.

Trains one short Ring run per (penalty, seed), then estimates the latent
N-size between consecutive generator snapshots. Smaller N-sizes mean that
nearby latents are pulled toward different modes sooner, which is the
mechanism behind more diverse samples.
"""
import sys

from licfg.cfg import TrainConfig
from licfg.data import ring_mixture
from licfg.neighborhood import DEFAULT_PENALTIES, median_by_penalty, ordering_experiment

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 200
template = TrainConfig(epochs=epochs, snapshot_interval=max(1, epochs // 4))
rows = ordering_experiment(template, [0, 1, 2], ring_mixture(), DEFAULT_PENALTIES, n_z1=16, n_probes=1024)
for r in rows:
    print(f"{r.penalty:>9} seed {r.seed}: r_hat {r.r_hat:.5f}  min ratio {r.ratio_min:.3f}  mean |grad D| {r.grad_norm_mean:.3f}")
print()
for label, med in median_by_penalty(rows).items():
    print(f"median r_hat {label:>9}: {med:.5f}")
