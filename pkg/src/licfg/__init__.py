"""Composite functional gradient GAN training with centered gradient penalties.

A small numpy library: a reverse-mode autodiff engine with double backprop,
MLPs with Adam, 2-D Gaussian mixture benchmarks, the CFG training loop with
1-, 0- and epsilon-centered gradient penalties, latent neighborhood-size
estimation, sample-quality metrics and a Dirac toy for training dynamics.
"""
__version__ = "0.1.0"

from .cfg import PenaltyKind, TrainConfig, TrainingDiverged, train  # noqa: E402
from .data import get_mixture, grid_mixture, ring_mixture  # noqa: E402

__all__ = ["PenaltyKind", "TrainConfig", "TrainingDiverged", "train", "get_mixture", "grid_mixture", "ring_mixture"]
