"""Additive Gaussian corruption for the denoising objectives.

Noise stddev is tied to the data: the base scale is the empirical stddev
of the training split (one pooled value over all entries by default,
optionally per feature), multiplied by ``delta_scale``.  Fit once on the
training split, then corrupt any batch; fitting on the training split
only keeps test data out of the noise statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .numeric import Rng, as_matrix

CORRUPTION_KINDS = ("additive_gaussian",)


@dataclass(frozen=True)
class CorruptionSpec:
    kind: str = "additive_gaussian"
    delta_scale: float = 0.0
    per_feature: bool = False
    sigma: np.ndarray | float | None = None  # set by fit()

    def __post_init__(self):
        if self.kind not in CORRUPTION_KINDS:
            raise ValueError(f"unknown corruption kind {self.kind!r}")
        if self.delta_scale < 0:
            raise ValueError(f"delta_scale must be >= 0, got {self.delta_scale}")


def fit_corruption(spec: CorruptionSpec, train_x: np.ndarray) -> CorruptionSpec:
    """Return a copy of ``spec`` with the noise stddev measured on train_x."""
    train_x = as_matrix(train_x, "training data")
    if spec.per_feature:
        sigma = train_x.std(axis=0)
        sigma[np.ptp(train_x, axis=0) == 0.0] = 0.0  # constant features stay exact
    else:
        sigma = float(train_x.std())
    return replace(spec, sigma=sigma)


def corrupt(x: np.ndarray, spec: CorruptionSpec, rng: Rng) -> np.ndarray:
    """x plus zero-mean Gaussian noise with stddev delta_scale * sigma.

    delta_scale of 0 returns the input bit-for-bit; per-feature mode
    leaves zero-variance features untouched.
    """
    x = as_matrix(x, "batch")
    if spec.sigma is None:
        raise ValueError("corruption spec is unfitted; call fit_corruption first")
    if spec.delta_scale == 0.0:
        return x.copy()
    scale = spec.delta_scale * np.asarray(spec.sigma)
    noise = rng.gaussian(0.0, 1.0, x.shape[0], x.shape[1]) * scale
    return x + noise
