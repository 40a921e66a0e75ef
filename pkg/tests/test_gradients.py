"""Analytic gradients against central finite differences.

This is the keystone check: every objective kind, on a small tied-weight
network, must produce parameter gradients matching a numerical
derivative of its own loss to high precision.
"""

import numpy as np
import pytest

from relae.corruption import CorruptionSpec, corrupt, fit_corruption
from relae.model import Network, forward, init_network
from relae.numeric import Rng
from relae.objectives import (
    DENOISING_KINDS,
    KINDS,
    VARIATIONAL_KINDS,
    ObjectiveSpec,
    batch_loss,
    gradient,
)

FD_STEP = 1e-5
# per-parameter relative error with a unit floor, so near-zero gradients
# are held to an absolute 1e-4
FD_TOL = 1e-4


def flatten_params(net: Network) -> np.ndarray:
    parts = [w.ravel() for w in net.weights]
    parts += list(net.enc_biases) + list(net.dec_biases)
    if net.vae_head is not None:
        parts += [net.vae_head.weight.ravel(), net.vae_head.bias]
    return np.concatenate(parts).copy()


def set_params(net: Network, vec: np.ndarray) -> None:
    off = 0
    for w in net.weights:
        w[...] = vec[off : off + w.size].reshape(w.shape)
        off += w.size
    for b in net.enc_biases:
        b[...] = vec[off : off + b.size]
        off += b.size
    for c in net.dec_biases:
        c[...] = vec[off : off + c.size]
        off += c.size
    if net.vae_head is not None:
        h = net.vae_head
        h.weight[...] = vec[off : off + h.weight.size].reshape(h.weight.shape)
        off += h.weight.size
        h.bias[...] = vec[off : off + h.bias.size]
        off += h.bias.size
    assert off == len(vec)


def flatten_grads(g, net: Network) -> np.ndarray:
    parts = [w.ravel() for w in g.weights]
    parts += list(g.enc_biases) + list(g.dec_biases)
    if net.vae_head is not None:
        parts += [g.head_weight.ravel(), g.head_bias]
    return np.concatenate(parts)


def setup_case(kind: str, seed: int, spec_kwargs: dict):
    """Frozen batch, inputs, and noise for one finite-difference case."""
    spec = ObjectiveSpec(kind, **spec_kwargs)
    x = Rng(seed).uniform(0.05, 0.95, 6, 5)
    variational = kind in VARIATIONAL_KINDS
    net = init_network([5, 3, 2], Rng(seed + 1).derive(0), "sigmoid", variational)
    x_in = x
    if kind in DENOISING_KINDS:
        cs = fit_corruption(CorruptionSpec(delta_scale=spec.noise_scale or 0.3), x)
        x_in = corrupt(x, cs, Rng(seed + 2))
    noise = Rng(seed + 3).gaussian(0, 1, 6, 2) if variational else None
    return spec, net, x, x_in, noise


def fd_check(spec, net, x, x_in, noise, tol=FD_TOL):
    def loss_at(vec):
        set_params(net, vec)
        trace = forward(net, x_in, vae_noise=noise)
        return batch_loss(net, x, spec, trace).total

    theta = flatten_params(net)
    trace = forward(net, x_in, vae_noise=noise)
    analytic = flatten_grads(gradient(net, x, spec, trace), net)
    numeric = np.empty_like(theta)
    for i in range(len(theta)):
        plus, minus = theta.copy(), theta.copy()
        plus[i] += FD_STEP
        minus[i] -= FD_STEP
        numeric[i] = (loss_at(plus) - loss_at(minus)) / (2 * FD_STEP)
    set_params(net, theta)
    denom = np.maximum.reduce([np.abs(analytic), np.abs(numeric), np.ones_like(theta)])
    rel = np.abs(analytic - numeric) / denom
    return rel.max()


@pytest.mark.parametrize("kind", KINDS)
def test_gradient_matches_finite_differences(kind):
    spec_kwargs = dict(alpha=0.4, threshold=0.3, weight_decay=0.01, noise_scale=0.3)
    spec, net, x, x_in, noise = setup_case(kind, 42, spec_kwargs)
    assert fd_check(spec, net, x, x_in, noise) < FD_TOL


@pytest.mark.parametrize("alpha", [0.0, 0.5, 1.0])
@pytest.mark.parametrize("kind", ["RAE", "RSAE", "RDAE", "RVAE"])
def test_gradient_across_alpha_grid(kind, alpha):
    spec_kwargs = dict(alpha=alpha, threshold=0.3, weight_decay=0.01, noise_scale=0.3)
    spec, net, x, x_in, noise = setup_case(kind, 52, spec_kwargs)
    assert fd_check(spec, net, x, x_in, noise) < FD_TOL


def test_gradient_at_median_gram_threshold():
    from relae.objectives import gram

    x = Rng(62).uniform(0.05, 0.95, 6, 5)
    t = float(np.median(gram(x)))
    spec_kwargs = dict(alpha=0.5, threshold=t)
    spec, net, x, x_in, noise = setup_case("RAE", 62, spec_kwargs)
    assert fd_check(spec, net, x, x_in, noise) < FD_TOL


@pytest.mark.parametrize("decay", [0.0, 0.01])
def test_gradient_across_decay(decay):
    spec_kwargs = dict(alpha=0.5, threshold=0.2, weight_decay=decay)
    spec, net, x, x_in, noise = setup_case("RSAE", 72, spec_kwargs)
    assert fd_check(spec, net, x, x_in, noise) < FD_TOL


def test_gradient_cross_entropy_reconstruction():
    spec_kwargs = dict(alpha=0.3, threshold=0.2, recon="cross_entropy")
    spec, net, x, x_in, noise = setup_case("RAE", 82, spec_kwargs)
    assert fd_check(spec, net, x, x_in, noise) < FD_TOL


def test_alpha_zero_rae_gradient_equals_bae():
    _, net, x, x_in, noise = setup_case("BAE", 92, {})
    trace = forward(net, x)
    g_bae = flatten_grads(gradient(net, x, ObjectiveSpec("BAE"), trace), net)
    g_rae = flatten_grads(
        gradient(net, x, ObjectiveSpec("RAE", alpha=0.0, threshold=0.3), trace), net
    )
    assert np.abs(g_bae - g_rae).max() <= 1e-12


def test_entries_below_threshold_contribute_nothing():
    # threshold above every Gram entry of x and xr: relational gradient
    # vanishes, so RAE gradient equals (1 - alpha) * BAE gradient
    from relae.objectives import gram

    _, net, x, x_in, _ = setup_case("BAE", 93, {})
    trace = forward(net, x)
    t = float(max(gram(x).max(), gram(trace.output).max())) + 1.0
    alpha = 0.6
    g_rae = flatten_grads(
        gradient(net, x, ObjectiveSpec("RAE", alpha=alpha, threshold=t), trace), net
    )
    g_bae = flatten_grads(gradient(net, x, ObjectiveSpec("BAE"), trace), net)
    np.testing.assert_allclose(g_rae, (1 - alpha) * g_bae, atol=1e-12)


def test_tied_weight_gradient_accumulates_both_paths():
    # decoder-only perturbation check: gradient of a linear single-layer
    # net differs from the encoder-only contribution
    net = init_network([3, 2], Rng(7), activation="identity")
    x = Rng(8).uniform(0.1, 0.9, 4, 3)
    trace = forward(net, x)
    g = gradient(net, x, ObjectiveSpec("BAE"), trace)
    # encoder-only contribution: d(pre)/dW with decoder treated constant
    d_out = 2.0 * (trace.output - x)
    enc_only = (d_out @ net.weights[0].T).T @ x
    assert not np.allclose(g.weights[0], enc_only)


def test_gradient_shape_validation():
    _, net, x, x_in, _ = setup_case("BAE", 94, {})
    trace = forward(net, x)
    with pytest.raises(ValueError, match="shape"):
        gradient(net, x[:, :3], ObjectiveSpec("BAE"), trace)
