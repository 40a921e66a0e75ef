"""Benchmark reproduction protocols at desk scale.

The published full-scale experiments do not report learning rate, batch
size, exact depths, or the mixing weights used per row, so their numbers
cannot be matched exactly; the desk-scale protocol reproduces the
qualitative findings (relational variants reduce reconstruction loss,
the alpha curve dips below its alpha=0 endpoint) on a stratified subset
with shared hyperparameters across variants.  Published numbers are
carried along as reference only, never as targets.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .objectives import ObjectiveSpec
from .trainer import TrainConfig

# Published full-scale results (reconstruction loss, classification error)
# per model, for reference columns only.
REFERENCE_RESULTS = {
    "mnist": {
        "RAE": (0.677, 0.038),
        "BAE": (0.813, 0.089),
        "GAE": (0.782, 0.057),
        "RSAE": (0.296, 0.018),
        "SAE": (0.312, 0.022),
        "RDAE": (0.217, 0.011),
        "DAE": (0.269, 0.016),
        "RVAE": (0.183, 0.009),
        "VAE": (0.201, 0.012),
    },
    "cifar10": {
        "RAE": (0.281, 0.127),
        "BAE": (0.682, 0.156),
        "GAE": (0.574, 0.149),
        "RSAE": (0.292, 0.134),
        "SAE": (0.331, 0.142),
        "RDAE": (0.216, 0.105),
        "DAE": (0.229, 0.117),
        "RVAE": (0.417, 0.173),
        "VAE": (0.552, 0.212),
    },
}

MODEL_ORDER = ("RAE", "BAE", "GAE", "RSAE", "SAE", "RDAE", "DAE", "RVAE", "VAE")

# pairs compared in the trend check: (relational, plain counterpart)
VARIANT_PAIRS = (("RAE", "BAE"), ("RSAE", "SAE"), ("RDAE", "DAE"), ("RVAE", "VAE"))


@dataclass(frozen=True)
class Protocol:
    name: str
    subset: int
    bottleneck: int
    train: TrainConfig
    folds: int
    alpha: float  # mixing weight for relational variants
    threshold: float  # Gram rectifier cutoff
    weight_decay: float  # sparse variants
    noise_scale: float  # denoising variants
    sweep_kind: str = "RAE"


DESK = Protocol(
    name="desk",
    subset=2000,
    bottleneck=32,
    train=TrainConfig(learning_rate=0.1, batch_size=100, max_epochs=100, seed=7),
    folds=10,
    alpha=0.1,
    threshold=0.0,
    weight_decay=1e-4,
    noise_scale=0.25,
)

SMOKE = Protocol(
    name="smoke",
    subset=120,
    bottleneck=16,
    train=TrainConfig(learning_rate=0.1, batch_size=40, max_epochs=3, seed=7),
    folds=3,
    alpha=0.1,
    threshold=0.0,
    weight_decay=1e-4,
    noise_scale=0.25,
)

SCALES = {"desk": DESK, "smoke": SMOKE}


def objective_for(kind: str, proto: Protocol) -> ObjectiveSpec:
    """The protocol's objective for one model variant.

    Relational variants share one mixing weight and rectifier cutoff;
    sparse and denoising variants share the decay and noise settings with
    their relational counterparts, so each pair differs only in the
    relationship term.
    """
    base = ObjectiveSpec(
        "BAE", alpha=proto.alpha, threshold=proto.threshold,
        weight_decay=proto.weight_decay, noise_scale=proto.noise_scale,
    )
    if kind in ("BAE", "GAE", "VAE"):
        return replace(base, kind=kind, weight_decay=0.0, noise_scale=0.0)
    if kind == "DAE":
        return replace(base, kind=kind, weight_decay=0.0)
    if kind == "SAE":
        return replace(base, kind=kind, alpha=1.0, noise_scale=0.0)
    if kind in ("RAE", "RVAE"):
        return replace(base, kind=kind, weight_decay=0.0, noise_scale=0.0)
    if kind == "RSAE":
        return replace(base, kind=kind, noise_scale=0.0)
    if kind == "RDAE":
        return replace(base, kind=kind, weight_decay=0.0)
    raise ValueError(f"unknown model kind {kind!r}")


def reference_for(dataset_name: str) -> dict[str, tuple[float, float]]:
    """Reference table keyed by dataset family; synthetic data maps to the
    handwritten-digit column since it stands in for it offline."""
    key = "cifar10" if dataset_name.startswith("cifar") else "mnist"
    return REFERENCE_RESULTS[key]
