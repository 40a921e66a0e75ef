"""Minibatch SGD with an epoch-granular convergence loop.

Each epoch shuffles the data, steps through minibatches with plain SGD
(theta <- theta - lr * grad), then measures the full-training-set loss in
original order.  Training stops when the absolute epoch-to-epoch loss
change falls within ``epsilon``, or at the epoch cap.  The previous-loss
register starts at +inf, so a finite epsilon can never trigger before a
second epoch while an infinite one stops after the first.

All randomness (shuffling, corruption draws, latent noise) comes from
substreams derived from the run seed, so identical inputs give
bit-identical results.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .corruption import CorruptionSpec, corrupt, fit_corruption
from .model import Network, forward, init_network, partial_encode
from .numeric import NonFiniteError, Rng
from .objectives import (
    DENOISING_KINDS,
    VARIATIONAL_KINDS,
    Gradients,
    LossValue,
    ObjectiveSpec,
    batch_loss,
    combine_terms,
    gradient,
)

# substream tags for seed derivation
TAG_INIT = 0
TAG_SHUFFLE = 1
TAG_CORRUPT = 2
TAG_NOISE = 3
TAG_EVAL = 4
TAG_STAGE = 5
TAG_SOFTMAX = 6
TAG_SPLIT = 7
TAG_FOLD = 8
TAG_DATA = 9


@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    batch_size: int = 128
    max_epochs: int = 400
    epsilon: float = 0.0
    seed: int = 0
    layerwise: bool = False
    finetune_epochs: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_epochs < 1:
            raise ValueError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")


@dataclass
class RunReport:
    epoch_losses: list[tuple[int, LossValue]] = field(default_factory=list)
    stopped_reason: str = "max_epochs"  # "converged" | "max_epochs"
    wall_seconds: float = 0.0

    @property
    def final_loss(self) -> LossValue:
        return self.epoch_losses[-1][1]


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, learning_rate: float):
        self.epoch = epoch
        self.learning_rate = learning_rate
        super().__init__(
            f"non-finite loss at epoch {epoch} (learning_rate={learning_rate}); "
            "reduce the learning rate or check the data scaling"
        )


def _batch_ranges(n: int, batch_size: int):
    return [(s, min(s + batch_size, n)) for s in range(0, n, batch_size)]


def _step_inputs(xb: np.ndarray, objective: ObjectiveSpec, net: Network,
                 corruption: CorruptionSpec | None, rng: Rng, epoch: int, b: int):
    """Corrupted input and frozen latent noise for one presentation."""
    x_in = xb
    if objective.kind in DENOISING_KINDS:
        x_in = corrupt(xb, corruption, rng.derive(TAG_CORRUPT, epoch, b))
    noise = None
    if objective.kind in VARIATIONAL_KINDS:
        noise = rng.derive(TAG_NOISE, epoch, b).gaussian(
            0.0, 1.0, xb.shape[0], net.latent_dim
        )
    return x_in, noise


def dataset_loss(
    net: Network,
    data: np.ndarray,
    objective: ObjectiveSpec,
    batch_size: int,
    corruption: CorruptionSpec | None = None,
    rng: Rng | None = None,
    epoch: int = 0,
) -> LossValue:
    """Objective summed over the full dataset in original order.

    Relationship terms are per-minibatch quantities, so the dataset loss
    is the sum over fixed-order batches of the same size used in training.
    Denoising/variational draws are taken from the evaluation substream.
    """
    rng = rng or Rng(0)
    data_sum = rel_sum = kl_sum = reg = 0.0
    for b, (s, e) in enumerate(_batch_ranges(data.shape[0], batch_size)):
        xb = data[s:e]
        x_in, noise = _step_inputs(xb, objective, net, corruption, rng, epoch, b)
        trace = forward(net, x_in, vae_noise=noise)
        lv = batch_loss(net, xb, objective, trace)
        data_sum += lv.data_term
        rel_sum += lv.relation_term
        kl_sum += lv.kl_term
        reg = lv.regularizer_term  # weight norm is global, counted once
    return combine_terms(objective, data_sum, rel_sum, reg, kl_sum)


def _apply_step(net: Network, grads: Gradients, lr: float) -> None:
    for w, g in zip(net.weights, grads.weights):
        w -= lr * g
    for b, g in zip(net.enc_biases, grads.enc_biases):
        b -= lr * g
    for c, g in zip(net.dec_biases, grads.dec_biases):
        c -= lr * g
    if net.vae_head is not None and grads.head_weight is not None:
        net.vae_head.weight -= lr * grads.head_weight
        net.vae_head.bias -= lr * grads.head_bias


def train(
    net: Network,
    data: np.ndarray,
    objective: ObjectiveSpec,
    cfg: TrainConfig,
    sink=None,
    corruption: CorruptionSpec | None = None,
) -> RunReport:
    """Optimize ``net`` in place; returns the per-epoch loss record.

    ``sink``, if given, is called as sink(epoch, LossValue) after each
    epoch.  For denoising kinds an unfitted corruption spec is fitted on
    ``data`` (pass a pre-fitted one to control the noise base scale).
    """
    n = data.shape[0]
    if n == 0:
        raise ValueError("training data is empty")
    if data.shape[1] != net.input_dim:
        raise ValueError(f"data has {data.shape[1]} features, network expects {net.input_dim}")
    if objective.kind in VARIATIONAL_KINDS and net.vae_head is None:
        raise ValueError(f"{objective.kind} needs a network built with variational=True")
    if objective.kind in DENOISING_KINDS:
        if corruption is None:
            corruption = CorruptionSpec(delta_scale=objective.noise_scale)
        if corruption.sigma is None:
            corruption = fit_corruption(corruption, data)

    rng = Rng(cfg.seed)
    report = RunReport()
    started = time.perf_counter()
    loss_prev = math.inf
    for epoch in range(1, cfg.max_epochs + 1):
        try:
            order = rng.derive(TAG_SHUFFLE, epoch).permutation(n)
            shuffled = data[order]
            for b, (s, e) in enumerate(_batch_ranges(n, cfg.batch_size)):
                xb = shuffled[s:e]
                x_in, noise = _step_inputs(xb, objective, net, corruption, rng, epoch, b)
                trace = forward(net, x_in, vae_noise=noise)
                grads = gradient(net, xb, objective, trace)
                _apply_step(net, grads, cfg.learning_rate)

            loss_c = dataset_loss(
                net, data, objective, cfg.batch_size, corruption,
                rng.derive(TAG_EVAL), epoch,
            )
        except NonFiniteError as exc:
            raise DivergenceError(epoch, cfg.learning_rate) from exc
        if not math.isfinite(loss_c.total):
            raise DivergenceError(epoch, cfg.learning_rate)
        report.epoch_losses.append((epoch, loss_c))
        if sink is not None:
            sink(epoch, loss_c)
        if abs(loss_c.total - loss_prev) <= cfg.epsilon:
            report.stopped_reason = "converged"
            break
        loss_prev = loss_c.total
    else:
        report.stopped_reason = "max_epochs"
    report.wall_seconds = time.perf_counter() - started
    return report


def _stage_objective(objective: ObjectiveSpec, is_top: bool) -> ObjectiveSpec:
    """Variational structure only exists at the top of the stack."""
    if objective.kind in VARIATIONAL_KINDS and not is_top:
        downgraded = "RAE" if objective.kind == "RVAE" else "BAE"
        return replace(objective, kind=downgraded)
    return objective


def train_layerwise(
    layer_sizes: list[int],
    data: np.ndarray,
    objective: ObjectiveSpec,
    cfg: TrainConfig,
    activation: str | list[str] = "sigmoid",
    sink=None,
) -> Network:
    """Greedy stack training: each layer learns to reconstruct its input.

    Layer i trains as a one-layer autoencoder on the activations of the
    already-trained prefix, sharing storage with the returned stacked
    network.  Stage 0 uses the run seed directly, so a two-size list is
    identical to plain training of a single layer; deeper stages derive
    their own seeds.  ``cfg.finetune_epochs > 0`` adds a whole-stack pass
    at the end.
    """
    if len(layer_sizes) < 2:
        raise ValueError("need at least two layer sizes")
    rng = Rng(cfg.seed)
    variational = objective.kind in VARIATIONAL_KINDS
    net = init_network(layer_sizes, rng.derive(TAG_INIT), activation, variational)

    n_layers = len(net.layers)
    for i in range(n_layers):
        is_top = i == n_layers - 1
        stage_obj = _stage_objective(objective, is_top)
        stage_head = net.vae_head if (is_top and variational) else None
        stage = Network(
            [net.layers[i]], [net.weights[i]], [net.enc_biases[i]],
            [net.dec_biases[i]], stage_head,
        )
        stage_seed = cfg.seed if i == 0 else rng.child_seed(TAG_STAGE, i)
        stage_cfg = replace(cfg, seed=stage_seed, layerwise=False, finetune_epochs=0)
        stage_input = partial_encode(net, data, i)
        stage_sink = None
        if sink is not None:
            stage_sink = lambda epoch, lv, _i=i: sink(_i, epoch, lv)
        train(stage, stage_input, stage_obj, stage_cfg, sink=stage_sink)

    if cfg.finetune_epochs > 0:
        tune_cfg = replace(
            cfg,
            seed=rng.child_seed(TAG_STAGE, n_layers),
            max_epochs=cfg.finetune_epochs,
            layerwise=False,
            finetune_epochs=0,
        )
        train(net, data, objective, tune_cfg)
    return net
