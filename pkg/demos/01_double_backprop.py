"""Gradient penalties need second derivatives.

A penalty on ||grad_x D(x)|| is a function of the discriminator weights only
through the input gradient, so training it means differentiating a
gradient. This script builds a small discriminator, evaluates the three
centered penalties at a few points and checks the weight gradients of each
against central finite differences.
"""
import numpy as np

from licfg.autodiff import fd_check, grad, input_grad, Tensor
from licfg.cfg import PenaltyKind, penalty_term
from licfg.nn import mlp_forward, mlp_init

rng = np.random.default_rng(0)
D = mlp_init([2, 16, 16, 1], "tanh", rng)
x = rng.normal(size=(5, 2))

# the input gradient itself, recorded so it can be differentiated again
xt = Tensor(x, requires_grad=True)
gx = input_grad(mlp_forward(D, xt), xt, create_graph=True)
print("grad_x D at the first point:", gx.data[0])
print("its norm:", np.linalg.norm(gx.data[0]))

params = dict(zip(D.names, D.arrays))
for kind in (PenaltyKind("one", 1.0), PenaltyKind("zero", 1.0), PenaltyKind("eps", 1.0, 0.3)):
    value = penalty_term(kind, D, x).item()

    def pen(p, _inputs, kind=kind):
        return penalty_term(kind, D, x, leaves=[p[n] for n in D.names])

    leaves = D.leaves()
    w_grads = grad(penalty_term(kind, D, x, leaves), leaves)
    err = fd_check(pen, params, {})
    print(f"{kind.label():>9}: value {value:.6f}  |dW0| {np.abs(w_grads[0].data).max():.4f}  fd rel err {err:.1e}")
