"""Tied-weight autoencoder networks: sizing, initialization, forward passes.

A network is an ordered stack of encoder layers.  Each layer stores one
weight matrix W (out x in); the decoder applies the same matrices
transposed, in reverse order, with its own bias vectors.  There is no
second weight copy anywhere, so encoder and decoder cannot drift apart.

Variational networks carry one extra affine head on the top layer that
produces per-dimension log-variances; the top layer itself (identity
activation) produces the means, and the decoder stays tied to it.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .numeric import Rng, as_matrix, require_finite, sigmoid

ACTIVATIONS = ("sigmoid", "identity")

_CKPT_VERSION = 1
_CKPT_MAGIC = b"RLAE"


@dataclass
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str = "sigmoid"

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError(f"layer dims must be >= 1, got {self.in_dim}->{self.out_dim}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class VaeHead:
    """Log-variance head attached to the top encoder layer."""

    weight: np.ndarray  # (latent, prev_width)
    bias: np.ndarray  # (latent,)


@dataclass
class Network:
    layers: list[LayerSpec]
    weights: list[np.ndarray]  # (out, in) per layer
    enc_biases: list[np.ndarray]  # (out,) per layer
    dec_biases: list[np.ndarray]  # (in,) per layer
    vae_head: VaeHead | None = None

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def latent_dim(self) -> int:
        return self.layers[-1].out_dim

    def sizes(self) -> list[int]:
        return [self.layers[0].in_dim] + [l.out_dim for l in self.layers]


@dataclass
class ForwardTrace:
    """Everything backpropagation needs from one forward pass.

    ``x_in`` is the batch actually fed to the encoder (the corrupted
    batch for denoising objectives).  Decoder lists are in application
    order: entry 0 belongs to the top layer's decode step.
    """

    x_in: np.ndarray
    enc_pre: list[np.ndarray] = field(default_factory=list)
    enc_act: list[np.ndarray] = field(default_factory=list)
    latent: np.ndarray | None = None
    dec_pre: list[np.ndarray] = field(default_factory=list)
    dec_act: list[np.ndarray] = field(default_factory=list)
    mu: np.ndarray | None = None
    logvar: np.ndarray | None = None
    noise: np.ndarray | None = None

    @property
    def output(self) -> np.ndarray:
        return self.dec_act[-1]


def _activate(tag: str, pre: np.ndarray) -> np.ndarray:
    if tag == "sigmoid":
        return sigmoid(pre)
    return pre


def activation_grad(tag: str, act: np.ndarray) -> np.ndarray:
    """d activation / d pre-activation, expressed through the activation value."""
    if tag == "sigmoid":
        return act * (1.0 - act)
    return np.ones_like(act)


def plan_layers(input_dim: int, l_t: int) -> list[int]:
    """Layer widths from ``input_dim`` down to the bottleneck ``l_t``.

    Each next width is ceil(log2(previous)); once that would fall to or
    below ``l_t`` the sequence is clamped to ``l_t`` and stops.
    """
    if l_t < 1:
        raise ValueError(f"bottleneck must be >= 1, got {l_t}")
    if l_t > input_dim:
        raise ValueError(f"bottleneck {l_t} exceeds input dim {input_dim}")
    sizes = [int(input_dim)]
    while sizes[-1] > l_t:
        nxt = math.ceil(math.log2(sizes[-1]))
        if nxt <= l_t:
            sizes.append(int(l_t))
            break
        sizes.append(nxt)
    return sizes


def init_network(
    layer_sizes: list[int],
    rng: Rng,
    activation: str | list[str] = "sigmoid",
    variational: bool = False,
) -> Network:
    """Build a network with uniform weight init scaled by 1/sqrt(fan-in).

    Every weight of layer i is drawn from U[-1/sqrt(n_prev), 1/sqrt(n_prev))
    where n_prev is the previous layer's width; biases start at zero.
    ``variational=True`` forces the top layer to identity activation and
    attaches a log-variance head initialized from the same interval.
    """
    if len(layer_sizes) < 2:
        raise ValueError("need at least two layer sizes (input and one hidden)")
    n_layers = len(layer_sizes) - 1
    if isinstance(activation, str):
        acts = [activation] * n_layers
    else:
        acts = list(activation)
        if len(acts) != n_layers:
            raise ValueError(f"expected {n_layers} activation tags, got {len(acts)}")
    if variational:
        acts[-1] = "identity"

    layers, weights, enc_b, dec_b = [], [], [], []
    for i in range(n_layers):
        n_in, n_out = int(layer_sizes[i]), int(layer_sizes[i + 1])
        layers.append(LayerSpec(n_in, n_out, acts[i]))
        bound = 1.0 / math.sqrt(n_in)
        weights.append(rng.uniform(-bound, bound, n_out, n_in))
        enc_b.append(np.zeros(n_out))
        dec_b.append(np.zeros(n_in))

    head = None
    if variational:
        n_in, n_out = int(layer_sizes[-2]), int(layer_sizes[-1])
        bound = 1.0 / math.sqrt(n_in)
        head = VaeHead(rng.uniform(-bound, bound, n_out, n_in), np.zeros(n_out))
    return Network(layers, weights, enc_b, dec_b, head)


def _check_batch(net: Network, x: np.ndarray, dim: int, what: str) -> np.ndarray:
    x = as_matrix(x, what)
    if x.shape[0] == 0:
        raise ValueError(f"{what} is empty (0 rows)")
    if x.shape[1] != dim:
        raise ValueError(f"{what} has {x.shape[1]} columns, network expects {dim}")
    return x


def _encode_steps(net: Network, x: np.ndarray):
    pres, acts = [], []
    h = x
    for layer, w, b in zip(net.layers, net.weights, net.enc_biases):
        pre = h @ w.T + b
        h = _activate(layer.activation, pre)
        pres.append(pre)
        acts.append(h)
    return pres, acts


def _decode_steps(net: Network, y: np.ndarray):
    pres, acts = [], []
    h = y
    for layer, w, c in zip(
        reversed(net.layers), reversed(net.weights), reversed(net.dec_biases)
    ):
        pre = h @ w + c
        h = _activate(layer.activation, pre)
        pres.append(pre)
        acts.append(h)
    return pres, acts


def encode(net: Network, x: np.ndarray) -> np.ndarray:
    """Bottleneck representation of a batch (the mean head for variational nets)."""
    x = _check_batch(net, x, net.input_dim, "encode input")
    _, acts = _encode_steps(net, x)
    return require_finite(acts[-1], "encoding")


def decode(net: Network, y: np.ndarray) -> np.ndarray:
    """Reconstruction from a batch of bottleneck representations."""
    y = _check_batch(net, y, net.latent_dim, "decode input")
    _, acts = _decode_steps(net, y)
    return require_finite(acts[-1], "reconstruction")


def forward(net: Network, x: np.ndarray, vae_noise: np.ndarray | None = None) -> ForwardTrace:
    """Full encode/decode pass recording all intermediates.

    For variational networks a frozen standard-normal draw ``vae_noise``
    (same shape as the latent) selects the sampled code mu + sigma*noise;
    without it the code is the mean, so the final activation equals
    decode(encode(x)) exactly.
    """
    x = _check_batch(net, x, net.input_dim, "batch")
    trace = ForwardTrace(x_in=x)
    trace.enc_pre, trace.enc_act = _encode_steps(net, x)

    top = trace.enc_act[-1]
    if net.vae_head is not None:
        prev = trace.enc_act[-2] if len(net.layers) > 1 else x
        trace.mu = top
        trace.logvar = prev @ net.vae_head.weight.T + net.vae_head.bias
        if vae_noise is not None:
            if vae_noise.shape != trace.mu.shape:
                raise ValueError(
                    f"noise shape {vae_noise.shape} != latent shape {trace.mu.shape}"
                )
            trace.noise = vae_noise
            trace.latent = trace.mu + np.exp(0.5 * trace.logvar) * vae_noise
        else:
            trace.latent = top
    else:
        if vae_noise is not None:
            raise ValueError("vae_noise given but network has no variational head")
        trace.latent = top

    trace.dec_pre, trace.dec_act = _decode_steps(net, trace.latent)
    require_finite(trace.output, "forward output")
    return trace


def partial_encode(net: Network, x: np.ndarray, upto: int) -> np.ndarray:
    """Activations after the first ``upto`` layers (0 returns x unchanged)."""
    x = _check_batch(net, x, net.input_dim, "encode input")
    h = x
    for layer, w, b in zip(net.layers[:upto], net.weights[:upto], net.enc_biases[:upto]):
        h = _activate(layer.activation, h @ w.T + b)
    return h


# --- checkpoint serialization ------------------------------------------------
#
# Layout (all little-endian):
#   u8   format version (currently 1)
#   4s   magic "RLAE"
#   u32  layer count L
#   L x (u32 in_dim, u32 out_dim, u8 activation: 0=sigmoid 1=identity)
#   u8   has_vae_head
#   per layer, in order: W (out*in f64), enc_bias (out f64), dec_bias (in f64)
#   if head: head weight (latent*prev f64), head bias (latent f64)

_ACT_CODE = {"sigmoid": 0, "identity": 1}
_ACT_NAME = {v: k for k, v in _ACT_CODE.items()}


def save_network(net: Network, path) -> None:
    parts = [struct.pack("<B4sI", _CKPT_VERSION, _CKPT_MAGIC, len(net.layers))]
    for layer in net.layers:
        parts.append(
            struct.pack("<IIB", layer.in_dim, layer.out_dim, _ACT_CODE[layer.activation])
        )
    parts.append(struct.pack("<B", 1 if net.vae_head is not None else 0))
    for w, b, c in zip(net.weights, net.enc_biases, net.dec_biases):
        parts.append(np.ascontiguousarray(w, "<f8").tobytes())
        parts.append(np.ascontiguousarray(b, "<f8").tobytes())
        parts.append(np.ascontiguousarray(c, "<f8").tobytes())
    if net.vae_head is not None:
        parts.append(np.ascontiguousarray(net.vae_head.weight, "<f8").tobytes())
        parts.append(np.ascontiguousarray(net.vae_head.bias, "<f8").tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(parts))


def load_network(path) -> Network:
    with open(path, "rb") as f:
        buf = f.read()
    off = 0

    def take(fmt):
        nonlocal off
        size = struct.calcsize(fmt)
        if off + size > len(buf):
            raise ValueError(f"truncated checkpoint {path}")
        vals = struct.unpack_from(fmt, buf, off)
        off += size
        return vals

    version, magic, n_layers = take("<B4sI")
    if version != _CKPT_VERSION or magic != _CKPT_MAGIC:
        raise ValueError(f"not a network checkpoint: {path}")
    specs = []
    for _ in range(n_layers):
        n_in, n_out, act = take("<IIB")
        if act not in _ACT_NAME:
            raise ValueError(f"unknown activation code {act} in {path}")
        specs.append(LayerSpec(n_in, n_out, _ACT_NAME[act]))
    (has_head,) = take("<B")

    def take_floats(count, shape):
        nonlocal off
        size = count * 8
        if off + size > len(buf):
            raise ValueError(f"truncated checkpoint {path}")
        arr = np.frombuffer(buf, "<f8", count, off).astype(np.float64).reshape(shape)
        off += size
        return arr

    weights, enc_b, dec_b = [], [], []
    for s in specs:
        weights.append(take_floats(s.out_dim * s.in_dim, (s.out_dim, s.in_dim)))
        enc_b.append(take_floats(s.out_dim, (s.out_dim,)))
        dec_b.append(take_floats(s.in_dim, (s.in_dim,)))
    head = None
    if has_head:
        prev = specs[-2].out_dim if n_layers > 1 else specs[0].in_dim
        head = VaeHead(
            take_floats(specs[-1].out_dim * prev, (specs[-1].out_dim, prev)),
            take_floats(specs[-1].out_dim, (specs[-1].out_dim,)),
        )
    if off != len(buf):
        raise ValueError(f"trailing bytes in checkpoint {path}")
    return Network(specs, weights, enc_b, dec_b, head)
