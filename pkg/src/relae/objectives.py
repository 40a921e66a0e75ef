"""The nine training objectives and their exact analytic gradients.

Kinds
-----
BAE   plain reconstruction
GAE   similarity-weighted reconstruction of pairwise distances (baseline)
RAE   mixes reconstruction with Gram-matrix relationship reconstruction
SAE   reconstruction plus weight decay
RSAE  RAE plus weight decay
DAE   reconstruct clean input from a corrupted one
RDAE  DAE plus a clean-vs-corrupted Gram relationship term
VAE   reconstruction plus closed-form KL to a standard normal latent
RVAE  VAE plus Gram relationship reconstruction sharing the latent code

The relationship of a batch is its Gram matrix X X^T, thresholded
entrywise (entries >= threshold kept, others zeroed) to drop weak pairs.
Relationship terms are computed per minibatch, so their scale grows with
batch size.  All losses use the sum convention; per-sample-per-feature
means are a reporting concern handled by the evaluation module.

LossValue stores each component unweighted; ``total`` carries the
kind-specific weighting (see :func:`combine_terms`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ForwardTrace, Network, VaeHead, activation_grad
from .numeric import matmul, require_finite, transpose

KINDS = ("BAE", "GAE", "RAE", "SAE", "RSAE", "DAE", "RDAE", "VAE", "RVAE")
RELATIONAL_KINDS = frozenset({"RAE", "RSAE", "RDAE", "RVAE"})
DENOISING_KINDS = frozenset({"DAE", "RDAE"})
VARIATIONAL_KINDS = frozenset({"VAE", "RVAE"})
RECON_TAGS = ("squared_error", "cross_entropy")

# cross-entropy targets clamped away from {0, 1} by this margin
CE_CLIP = 1e-12


@dataclass(frozen=True)
class ObjectiveSpec:
    """Loss variant plus its hyperparameters.

    Parameters a kind does not use are simply ignored (BAE ignores all
    four).  ``alpha`` mixes data vs relationship terms, ``threshold`` is
    the Gram rectifier cutoff, ``weight_decay`` scales the squared weight
    norm, ``noise_scale`` multiplies the data stddev to set corruption
    strength for denoising kinds.
    """

    kind: str
    alpha: float = 0.5
    threshold: float = 0.0
    weight_decay: float = 0.0
    noise_scale: float = 0.0
    recon: str = "squared_error"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown objective kind {self.kind!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.threshold < 0:
            raise ValueError(f"threshold must be >= 0, got {self.threshold}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.noise_scale < 0:
            raise ValueError(f"noise_scale must be >= 0, got {self.noise_scale}")
        if self.recon not in RECON_TAGS:
            raise ValueError(f"unknown reconstruction loss {self.recon!r}")


@dataclass
class LossValue:
    """Decomposed objective value; component terms are unweighted."""

    total: float
    data_term: float = 0.0
    relation_term: float = 0.0
    regularizer_term: float = 0.0
    kl_term: float = 0.0


@dataclass
class Gradients:
    """Parameter-shaped gradients matching a Network's storage."""

    weights: list[np.ndarray]
    enc_biases: list[np.ndarray]
    dec_biases: list[np.ndarray]
    head_weight: np.ndarray | None = None
    head_bias: np.ndarray | None = None


def combine_terms(
    spec: ObjectiveSpec,
    data: float = 0.0,
    relation: float = 0.0,
    regularizer: float = 0.0,
    kl: float = 0.0,
) -> LossValue:
    """Assemble the kind-specific weighted total from unweighted terms."""
    k, a = spec.kind, spec.alpha
    if k in ("BAE", "GAE", "DAE"):
        total = data
    elif k in ("RAE", "RDAE"):
        total = (1.0 - a) * data + a * relation
    elif k == "SAE":
        total = a * data + spec.weight_decay * regularizer
    elif k == "RSAE":
        total = (1.0 - a) * data + a * relation + spec.weight_decay * regularizer
    elif k == "VAE":
        total = data + kl
    else:  # RVAE
        total = (1.0 - a) * data + a * relation + kl
    return LossValue(total, data, relation, regularizer, kl)


# --- elementary losses --------------------------------------------------------


def _check_same_shape(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")


def squared_error(x: np.ndarray, xr: np.ndarray) -> float:
    """Sum of squared entry differences (sum over samples and features)."""
    _check_same_shape(x, xr)
    d = x - xr
    return float(np.sum(d * d))


def cross_entropy(x: np.ndarray, y: np.ndarray) -> float:
    """-sum[x log y + (1-x) log(1-y)]; y clamped into [1e-12, 1-1e-12].

    Targets x must lie in [0, 1] and predictions y in [0, 1]; values of y
    at exactly 0 or 1 are clamped rather than rejected.
    """
    _check_same_shape(x, y)
    if np.any(x < 0) or np.any(x > 1):
        raise ValueError("cross_entropy targets must lie in [0, 1]")
    if np.any(y < 0) or np.any(y > 1):
        raise ValueError("cross_entropy predictions must lie in [0, 1]")
    yc = np.clip(y, CE_CLIP, 1.0 - CE_CLIP)
    return float(-np.sum(x * np.log(yc) + (1.0 - x) * np.log1p(-yc)))


def _recon_loss(x: np.ndarray, xr: np.ndarray, tag: str) -> float:
    if tag == "cross_entropy":
        return cross_entropy(x, xr)
    return squared_error(x, xr)


def gram(x: np.ndarray) -> np.ndarray:
    """Pairwise inner-product similarity matrix X X^T (n x n, symmetric)."""
    return matmul(x, transpose(x))


def rectify(g: np.ndarray, t: float) -> np.ndarray:
    """Keep entries >= t (inclusive), zero the rest."""
    if t < 0:
        raise ValueError(f"threshold must be >= 0, got {t}")
    return np.where(g >= t, g, 0.0)


def _relation_loss(a: np.ndarray, b: np.ndarray, t: float) -> float:
    """Squared error between the rectified Gram matrices of a and b."""
    return squared_error(rectify(gram(a), t), rectify(gram(b), t))


def weight_norm_sq(net: Network) -> float:
    """Squared Frobenius norm of all layer weights (biases excluded)."""
    return float(sum(np.sum(w * w) for w in net.weights))


def kl_standard_normal(mu: np.ndarray, logvar: np.ndarray) -> float:
    """Closed-form KL(N(mu, sigma^2) || N(0, 1)) summed over all entries."""
    _check_same_shape(mu, logvar)
    return float(0.5 * np.sum(mu * mu + np.exp(logvar) - 1.0 - logvar))


def gae_weights(x: np.ndarray) -> np.ndarray:
    """Pairwise similarity weights: Gram entries min-max scaled per row.

    A degenerate row (all entries equal) maps to 1 where the entry is
    nonzero and 0 where it is zero, so an all-zero batch gets zero weight.
    """
    g = gram(x)
    mn = g.min(axis=1, keepdims=True)
    mx = g.max(axis=1, keepdims=True)
    span = mx - mn
    s = (g - mn) / np.where(span > 0, span, 1.0)
    flat = (span <= 0).ravel()
    if flat.any():
        s[flat, :] = (g[flat, :] != 0).astype(np.float64)
    return s


# --- per-kind loss values -----------------------------------------------------


def bae_loss(x: np.ndarray, xr: np.ndarray, spec: ObjectiveSpec | None = None) -> LossValue:
    spec = spec or ObjectiveSpec("BAE")
    return combine_terms(spec, data=_recon_loss(x, xr, spec.recon))


def rae_loss(x: np.ndarray, xr: np.ndarray, spec: ObjectiveSpec) -> LossValue:
    data = _recon_loss(x, xr, spec.recon)
    relation = _relation_loss(x, xr, spec.threshold)
    return combine_terms(spec, data=data, relation=relation)


def gae_loss(x: np.ndarray, xr: np.ndarray, spec: ObjectiveSpec | None = None) -> LossValue:
    """Similarity-weighted distances between reconstructions and originals."""
    _check_same_shape(x, xr)
    spec = spec or ObjectiveSpec("GAE")
    s = gae_weights(x)
    d = (
        np.sum(xr * xr, axis=1)[:, None]
        + np.sum(x * x, axis=1)[None, :]
        - 2.0 * (xr @ x.T)
    )
    np.maximum(d, 0.0, out=d)  # guard tiny negative cancellation noise
    return combine_terms(spec, data=float(np.sum(s * d)))


def sae_loss(x: np.ndarray, xr: np.ndarray, net: Network, spec: ObjectiveSpec) -> LossValue:
    data = _recon_loss(x, xr, spec.recon)
    return combine_terms(spec, data=data, regularizer=weight_norm_sq(net))


def rsae_loss(x: np.ndarray, xr: np.ndarray, net: Network, spec: ObjectiveSpec) -> LossValue:
    data = _recon_loss(x, xr, spec.recon)
    relation = _relation_loss(x, xr, spec.threshold)
    return combine_terms(spec, data=data, relation=relation, regularizer=weight_norm_sq(net))


def dae_loss(
    x: np.ndarray,
    xr_from_corrupted: np.ndarray,
    x_corrupted: np.ndarray,
    spec: ObjectiveSpec,
) -> LossValue:
    _check_same_shape(x, x_corrupted)
    return combine_terms(spec, data=_recon_loss(x, xr_from_corrupted, spec.recon))


def rdae_loss(
    x: np.ndarray,
    xr_from_corrupted: np.ndarray,
    x_corrupted: np.ndarray,
    spec: ObjectiveSpec,
) -> LossValue:
    """Denoising data term plus clean-vs-corrupted Gram relationship term.

    The relationship term compares the Gram matrices of the clean and the
    corrupted batch, so it depends on the corruption draw but not on the
    network parameters.
    """
    _check_same_shape(x, x_corrupted)
    data = _recon_loss(x, xr_from_corrupted, spec.recon)
    relation = _relation_loss(x, x_corrupted, spec.threshold)
    return combine_terms(spec, data=data, relation=relation)


def vae_loss(
    x: np.ndarray,
    enc_mean: np.ndarray,
    enc_logvar: np.ndarray,
    xr: np.ndarray,
    spec: ObjectiveSpec,
) -> LossValue:
    data = _recon_loss(x, xr, spec.recon)
    return combine_terms(spec, data=data, kl=kl_standard_normal(enc_mean, enc_logvar))


def rvae_loss(
    x: np.ndarray,
    enc_mean: np.ndarray,
    enc_logvar: np.ndarray,
    xr: np.ndarray,
    spec: ObjectiveSpec,
) -> LossValue:
    """Variational objective with a Gram relationship term sharing the code.

    The relationship target is reconstructed through the decoded batch, so
    both terms share one latent sample; the KL enters with weight one since
    it is common to both mixture components.
    """
    data = _recon_loss(x, xr, spec.recon)
    relation = _relation_loss(x, xr, spec.threshold)
    kl = kl_standard_normal(enc_mean, enc_logvar)
    return combine_terms(spec, data=data, relation=relation, kl=kl)


def batch_loss(net: Network, x: np.ndarray, spec: ObjectiveSpec, trace: ForwardTrace) -> LossValue:
    """Objective value for a batch given its forward trace.

    ``x`` is the clean batch; for denoising kinds the corrupted batch is
    ``trace.x_in``.  Variational kinds read mean/log-variance from the
    trace.
    """
    xr = trace.output
    k = spec.kind
    if k == "BAE":
        return bae_loss(x, xr, spec)
    if k == "GAE":
        return gae_loss(x, xr, spec)
    if k == "RAE":
        return rae_loss(x, xr, spec)
    if k == "SAE":
        return sae_loss(x, xr, net, spec)
    if k == "RSAE":
        return rsae_loss(x, xr, net, spec)
    if k == "DAE":
        return dae_loss(x, xr, trace.x_in, spec)
    if k == "RDAE":
        return rdae_loss(x, xr, trace.x_in, spec)
    if trace.mu is None or trace.logvar is None:
        raise ValueError(f"{k} requires a trace from a variational network")
    if k == "VAE":
        return vae_loss(x, trace.mu, trace.logvar, xr, spec)
    return rvae_loss(x, trace.mu, trace.logvar, xr, spec)


# --- analytic gradients -------------------------------------------------------


def _recon_grad(x: np.ndarray, xr: np.ndarray, tag: str) -> np.ndarray:
    if tag == "cross_entropy":
        interior = (xr > CE_CLIP) & (xr < 1.0 - CE_CLIP)
        yc = np.clip(xr, CE_CLIP, 1.0 - CE_CLIP)
        return np.where(interior, (yc - x) / (yc * (1.0 - yc)), 0.0)
    return 2.0 * (xr - x)


def _relation_grad(x: np.ndarray, xr: np.ndarray, t: float) -> np.ndarray:
    """d/dXr of squared error between rectified Grams of x and xr.

    Entries of the reconstructed Gram below the threshold are clipped to a
    constant, so their gradient is exactly zero.
    """
    target = rectify(gram(x), t)
    g_r = gram(xr)
    mask = g_r >= t
    err = 2.0 * (np.where(mask, g_r, 0.0) - target) * mask
    return (err + err.T) @ xr


def _output_gradient(x: np.ndarray, spec: ObjectiveSpec, trace: ForwardTrace) -> np.ndarray:
    xr = trace.output
    k, a = spec.kind, spec.alpha
    if k == "GAE":
        s = gae_weights(x)
        return 2.0 * (s.sum(axis=1)[:, None] * xr - s @ x)
    rg = _recon_grad(x, xr, spec.recon)
    if k in ("BAE", "DAE", "VAE"):
        return rg
    if k == "SAE":
        return a * rg
    if k == "RDAE":
        # relationship term is corruption-vs-clean data only: no xr dependence
        return (1.0 - a) * rg
    # RAE, RSAE, RVAE
    return (1.0 - a) * rg + a * _relation_grad(x, xr, spec.threshold)


def gradient(net: Network, x: np.ndarray, spec: ObjectiveSpec, trace: ForwardTrace) -> Gradients:
    """Exact gradient of the batch objective w.r.t. every parameter.

    ``trace`` must come from :func:`relae.model.forward` on the same batch
    under this objective's pipeline (corrupted input and frozen latent
    noise live inside it).  Tied weights accumulate encoder and decoder
    contributions into one matrix per layer.
    """
    n_layers = len(net.layers)
    if len(trace.enc_act) != n_layers or len(trace.dec_act) != n_layers:
        raise ValueError("trace does not match network depth")
    if trace.output.shape != x.shape:
        raise ValueError(f"batch shape {x.shape} != trace output {trace.output.shape}")
    vae_active = spec.kind in VARIATIONAL_KINDS
    if vae_active and (net.vae_head is None or trace.mu is None):
        raise ValueError(f"{spec.kind} requires a variational network and trace")

    g_w = [np.zeros_like(w) for w in net.weights]
    g_b = [np.zeros_like(b) for b in net.enc_biases]
    g_c = [np.zeros_like(c) for c in net.dec_biases]

    # decoder walk, undoing application order (top layer was applied first)
    d = _output_gradient(x, spec, trace)
    for step in reversed(range(n_layers)):
        i = n_layers - 1 - step
        layer = net.layers[i]
        dpre = d * activation_grad(layer.activation, trace.dec_act[step])
        inp = trace.latent if step == 0 else trace.dec_act[step - 1]
        g_w[i] += inp.T @ dpre
        g_c[i] += dpre.sum(axis=0)
        d = dpre @ net.weights[i].T

    # d now holds dLoss/dlatent
    head_w = head_b = None
    d_logvar = None
    if net.vae_head is not None and trace.mu is not None:
        d_mu = d.copy()
        if trace.noise is not None:
            sigma = np.exp(0.5 * trace.logvar)
            d_logvar = d * trace.noise * 0.5 * sigma
        else:
            d_logvar = np.zeros_like(trace.logvar)
        if vae_active:
            d_mu += trace.mu
            d_logvar = d_logvar + 0.5 * (np.exp(trace.logvar) - 1.0)
        prev = trace.enc_act[-2] if n_layers > 1 else trace.x_in
        head_w = d_logvar.T @ prev
        head_b = d_logvar.sum(axis=0)
        d = d_mu

    # encoder walk, top layer down
    for i in reversed(range(n_layers)):
        layer = net.layers[i]
        dpre = d * activation_grad(layer.activation, trace.enc_act[i])
        inp = trace.enc_act[i - 1] if i > 0 else trace.x_in
        g_w[i] += dpre.T @ inp
        g_b[i] += dpre.sum(axis=0)
        d = dpre @ net.weights[i]
        if i == n_layers - 1 and d_logvar is not None:
            d = d + d_logvar @ net.vae_head.weight

    if spec.kind in ("SAE", "RSAE") and spec.weight_decay != 0.0:
        for i, w in enumerate(net.weights):
            g_w[i] += 2.0 * spec.weight_decay * w

    for arr in g_w + g_b + g_c:
        require_finite(arr, "gradient")
    return Gradients(g_w, g_b, g_c, head_w, head_b)
