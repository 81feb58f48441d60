"""Training dynamics near equilibrium on the Dirac toy problem.

Real data is a point mass at 0, the generator is a single number theta and
the discriminator is D(x) = psi * x. Without a penalty the pair keeps
circling the equilibrium at a roughly fixed distance, and a 0-centered
penalty damps the orbit to the origin. The 1-centered penalty has no
stationary point at psi = 0 and settles at theta = 2, where its pull on
psi balances the loss. The eps-centered penalty settles at theta = eps'.
"""
import numpy as np

from licfg.cfg import PenaltyKind
from licfg.dynamics import dirac_simulate

for pen in (PenaltyKind("none"), PenaltyKind("one", 1.0), PenaltyKind("zero", 1.0), PenaltyKind("eps", 1.0, 0.3)):
    traj = dirac_simulate(pen, steps=5000, lr=0.05, init=(1.0, 1.0))
    radius = np.hypot(traj.theta, traj.psi)
    checkpoints = ", ".join(f"{radius[i]:.3g}" for i in (0, 1000, 2000, 3000, 4000, 5000))
    print(f"{pen.label():>9}: distance from equilibrium at steps 0..5000 by 1000: {checkpoints}")
    print(f"{'':>9}  final (theta, psi) = ({traj.theta[-1]:.4f}, {traj.psi[-1]:.4f})")
