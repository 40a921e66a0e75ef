"""Relational autoencoder family: training library and benchmark CLI.

Autoencoders that reconstruct both the data and the pairwise similarity
structure of each batch (Gram matrix), alongside plain, sparse,
denoising, and variational baselines, all trained with exact analytic
gradients and plain minibatch SGD.
"""

from .corruption import CorruptionSpec, corrupt, fit_corruption
from .data import Dataset, load_cifar10, load_csv, load_mnist, save_csv, subset
from .model import (
    Network,
    decode,
    encode,
    forward,
    init_network,
    load_network,
    plan_layers,
    save_network,
)
from .numeric import Rng
from .objectives import KINDS, LossValue, ObjectiveSpec, batch_loss, gradient
from .trainer import DivergenceError, RunReport, TrainConfig, train, train_layerwise

__version__ = "0.1.0"

__all__ = [
    "CorruptionSpec",
    "Dataset",
    "DivergenceError",
    "KINDS",
    "LossValue",
    "Network",
    "ObjectiveSpec",
    "Rng",
    "RunReport",
    "TrainConfig",
    "batch_loss",
    "corrupt",
    "decode",
    "encode",
    "fit_corruption",
    "forward",
    "gradient",
    "init_network",
    "load_cifar10",
    "load_csv",
    "load_mnist",
    "load_network",
    "plan_layers",
    "save_csv",
    "save_network",
    "subset",
    "train",
    "train_layerwise",
    "__version__",
]
