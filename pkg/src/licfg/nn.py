"""Dense MLPs for the generator/discriminator, Adam, and checkpoint files."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .autodiff import Tensor, as_tensor, relu, tanh

ACTIVATIONS = {"tanh": tanh, "relu": relu}
CHECKPOINT_MAGIC = "LICFG-MLP"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class MlpParams:
    """Weights ``W[i]`` with shape (fan_in, fan_out) and biases ``b[i]``.

    The hidden activation is applied after every layer but the last, whose
    output is left linear (a logit for D, coordinates for G).
    """

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias per weight matrix and at least one layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError(f"layer {i}: weight {w.shape} / bias {b.shape} mismatch")
            if i and self.weights[i - 1].shape[1] != w.shape[0]:
                raise ValueError(f"layer {i} does not compose with layer {i - 1}")

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def arrays(self) -> list[np.ndarray]:
        """Parameters in canonical order W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    @property
    def names(self) -> list[str]:
        out = []
        for i in range(len(self.weights)):
            out += [f"W{i}", f"b{i}"]
        return out

    def with_arrays(self, arrays) -> "MlpParams":
        arrays = [np.asarray(a, dtype=np.float64) for a in arrays]
        return replace(self, weights=tuple(arrays[0::2]), biases=tuple(arrays[1::2]))

    def leaves(self) -> list[Tensor]:
        """Fresh gradient-tracking leaves for every parameter array."""
        return [Tensor(a, requires_grad=True) for a in self.arrays]

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays])

    def copy(self) -> "MlpParams":
        return self.with_arrays([a.copy() for a in self.arrays])


def mlp_init(sizes, activation: str = "tanh", seed: int | np.random.Generator = 0) -> MlpParams:
    """Uniform(-a, a) weights with a = sqrt(3 / fan_in), so std = 1/sqrt(fan_in); zero biases."""
    sizes = list(sizes)
    if len(sizes) < 2:
        raise ValueError("architecture needs an input size and at least one layer")
    if any(int(s) <= 0 for s in sizes):
        raise ValueError(f"layer sizes must be positive, got {sizes}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        a = np.sqrt(3.0 / fan_in)
        weights.append(rng.uniform(-a, a, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(tuple(weights), tuple(biases), activation)


def mlp_forward(p: MlpParams, x, leaves: list[Tensor] | None = None) -> Tensor:
    """Batched forward pass. Pass ``leaves`` (from ``p.leaves()``) to record
    the graph w.r.t. the parameters; otherwise they enter as constants."""
    x = as_tensor(x)
    if x.ndim != 2 or x.shape[1] != p.sizes[0]:
        raise ValueError(f"expected input of shape (n, {p.sizes[0]}), got {x.shape}")
    arrs = leaves if leaves is not None else [Tensor(a, _copy=False) for a in p.arrays]
    act = ACTIVATIONS[p.activation]
    h = x
    n_layers = len(arrs) // 2
    for i in range(n_layers):
        h = h @ arrs[2 * i] + arrs[2 * i + 1]
        if i < n_layers - 1:
            h = act(h)
    return h


@dataclass
class AdamState:
    lr: float = 2.5e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, p: MlpParams, **kw) -> "AdamState":
        return cls(m=[np.zeros_like(a) for a in p.arrays], v=[np.zeros_like(a) for a in p.arrays], **kw)


def adam_step(p: MlpParams, grads, s: AdamState) -> tuple[MlpParams, AdamState]:
    """One bias-corrected Adam update. Returns new params and new state."""
    arrays = p.arrays
    if len(grads) != len(arrays):
        raise ValueError(f"expected {len(arrays)} gradients, got {len(grads)}")
    if not s.m:
        s = replace(s, m=[np.zeros_like(a) for a in arrays], v=[np.zeros_like(a) for a in arrays])
    for name, a, g in zip(p.names, arrays, grads):
        g = np.asarray(g)
        if g.shape != a.shape:
            raise ValueError(f"gradient for {name} has shape {g.shape}, expected {a.shape}")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {name}")
    t = s.step + 1
    b1, b2 = s.beta1, s.beta2
    new_m, new_v, new_a = [], [], []
    for a, g, m, v in zip(arrays, grads, s.m, s.v):
        g = np.asarray(g, dtype=np.float64)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1**t)
        vhat = v / (1 - b2**t)
        new_a.append(a - s.lr * mhat / (np.sqrt(vhat) + s.eps))
        new_m.append(m)
        new_v.append(v)
    return p.with_arrays(new_a), replace(s, step=t, m=new_m, v=new_v)


def save_params(p: MlpParams, path) -> None:
    """Write a one-line text header followed by little-endian float64 values."""
    header = (
        f"{CHECKPOINT_MAGIC} v{CHECKPOINT_VERSION} "
        f"sizes={','.join(map(str, p.sizes))} activation={p.activation}\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(p.flat().astype("<f8").tobytes())


def load_params(path) -> MlpParams:
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    fields = raw[:nl].decode("ascii").split()
    if len(fields) != 4 or fields[0] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a parameter checkpoint")
    if fields[1] != f"v{CHECKPOINT_VERSION}":
        raise ValueError(f"{path}: unsupported checkpoint version {fields[1]}")
    meta = dict(f.split("=", 1) for f in fields[2:])
    sizes = [int(s) for s in meta["sizes"].split(",")]
    flat = np.frombuffer(raw[nl + 1 :], dtype="<f8").astype(np.float64)
    arrays, k = [], 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        arrays.append(flat[k : k + fan_in * fan_out].reshape(fan_in, fan_out))
        k += fan_in * fan_out
        arrays.append(flat[k : k + fan_out].copy())
        k += fan_out
    if k != flat.size:
        raise ValueError(f"{path}: expected {k} values, found {flat.size}")
    return MlpParams(tuple(arrays[0::2]), tuple(arrays[1::2]), meta["activation"])
