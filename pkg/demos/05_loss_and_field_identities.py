"""The CFG discriminator loss and generator field versus the common GAN.

Under the logistic link d = sigmoid(D) the CFG loss is the negated GAN
log-loss, and with one functional step the generator's parameter-space
update points the same way as the GAN generator gradient. Only the
per-sample scale differs: eta*delta against sigmoid(D(G(z))).
"""
import numpy as np

from licfg.dynamics import field_equivalence_check, gan_scaling, loss_equivalence_check
from licfg.nn import mlp_init

rng = np.random.default_rng(0)
logits = rng.uniform(-10, 10, 10_000)
print("max |L_CFG + L_GAN| on random logits:", loss_equivalence_check(logits, rng.permutation(logits)))

G = mlp_init([2, 32, 32, 2], "tanh", 1)
D = mlp_init([2, 32, 32, 1], "relu", 2)
z = rng.normal(size=(64, 2))
chk = field_equivalence_check(G, D, z, eta_1=0.25)
print("max (1 - cosine) between the two generator fields:", chk.max_deviation)
print("max |difference| with eta*delta = 0.25:", chk.max_value_gap)
chk = field_equivalence_check(G, D, z, eta_1=gan_scaling(G, D, z))
print("max |difference| with eta*delta = sigmoid(D(G(z))):", chk.max_value_gap)
