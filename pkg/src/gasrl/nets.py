"""Minimal dense-network engine: manual backprop, Adam, snapshots, flat binary I/O.

Parameters are float32 by default; gradient reductions accumulate in float64.
Nets are plain value objects and hold no optimizer state.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, UsageError

ACTIVATIONS = ("relu", "identity")

_MAGIC = b"GASNN1"


@dataclass
class DenseLayer:
    weight: np.ndarray  # [out, in]
    bias: np.ndarray    # [out]
    activation: str     # "relu" | "identity"


class DenseNet:
    """Fully connected stack with fixed topology.

    ``dims`` chains layer shapes: dims[i] feeds dims[i+1]. Hidden layers use
    ``hidden_activation``; the final layer uses ``output_activation``.
    ``final_scale`` multiplies the last layer's initial weights, used to start
    residual value heads near zero.
    """

    def __init__(
        self,
        dims: list[int],
        hidden_activation: str = "relu",
        output_activation: str = "identity",
        rng: np.random.Generator | None = None,
        dtype=np.float32,
        final_scale: float = 1.0,
    ):
        if len(dims) < 2:
            raise ConfigError("need at least one layer (two dims)")
        if any(d <= 0 for d in dims):
            raise ConfigError(f"non-positive layer width in {dims}")
        for act in (hidden_activation, output_activation):
            if act not in ACTIVATIONS:
                raise ConfigError(f"unknown activation {act!r}")
        rng = rng or np.random.default_rng()
        self.dtype = np.dtype(dtype)
        self.layers: list[DenseLayer] = []
        n_layers = len(dims) - 1
        for i in range(n_layers):
            fan_in, fan_out = dims[i], dims[i + 1]
            act = hidden_activation if i < n_layers - 1 else output_activation
            # He-style uniform fan-in scaling; biases start at zero.
            bound = np.sqrt(6.0 / fan_in)
            w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
            if i == n_layers - 1:
                w *= final_scale
            self.layers.append(
                DenseLayer(
                    weight=w.astype(self.dtype),
                    bias=np.zeros(fan_out, dtype=self.dtype),
                    activation=act,
                )
            )
        self._cache: list[np.ndarray] | None = None

    @property
    def in_dim(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].weight.shape[0]

    @property
    def n_params(self) -> int:
        return sum(l.weight.size + l.bias.size for l in self.layers)

    def parameters(self) -> list[np.ndarray]:
        """Flat list of parameter arrays (weight, bias per layer), by reference."""
        out: list[np.ndarray] = []
        for l in self.layers:
            out.append(l.weight)
            out.append(l.bias)
        return out

    def forward(self, x: np.ndarray, remember: bool = False) -> np.ndarray:
        """Run the stack on a [B, in] batch, returning [B, out].

        With ``remember`` the per-layer inputs are kept for one backward pass.
        """
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ConfigError(
                f"input shape {x.shape} incompatible with first layer width {self.in_dim}"
            )
        cache = [x] if remember else None
        h = x
        for l in self.layers:
            z = h @ l.weight.T + l.bias
            h = np.maximum(z, 0) if l.activation == "relu" else z
            if cache is not None:
                cache.append(h)
        if remember:
            self._cache = cache
        return h

    def backward(self, grad_out: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
        """Backpropagate a [B, out] loss gradient through the remembered batch.

        Returns (grads aligned with parameters(), gradient w.r.t. the input).
        Matmuls run in the parameter dtype (BLAS accumulates batch products);
        bias sums accumulate in float64 before casting back.
        """
        if self._cache is None:
            raise UsageError("backward called without a remembered forward pass")
        cache = self._cache
        g = np.asarray(grad_out, dtype=self.dtype)
        if g.shape != (cache[0].shape[0], self.out_dim):
            raise ConfigError(f"gradient shape {g.shape} does not match outputs")
        grads: list[np.ndarray] = [None] * (2 * len(self.layers))  # type: ignore[list-item]
        for i in range(len(self.layers) - 1, -1, -1):
            l = self.layers[i]
            h_out = cache[i + 1]
            h_in = cache[i]
            if l.activation == "relu":
                g = g * (h_out > 0)
            grads[2 * i] = g.T @ h_in
            grads[2 * i + 1] = g.sum(axis=0, dtype=np.float64).astype(self.dtype)
            g = g @ l.weight
        return grads, g

    def zero_(self) -> None:
        """Set all parameters to zero (used to pin heads in tests/ablations)."""
        for l in self.layers:
            l.weight[...] = 0
            l.bias[...] = 0

    def save(self, path: str) -> None:
        with open(path, "wb") as f:
            f.write(serialize(self))

    def load(self, path: str) -> None:
        with open(path, "rb") as f:
            load_into(self, f.read())


def snapshot(net: DenseNet) -> DenseNet:
    """Deep parameter copy; mutating the original never touches the snapshot."""
    dup = object.__new__(DenseNet)
    dup.dtype = net.dtype
    dup.layers = [
        DenseLayer(l.weight.copy(), l.bias.copy(), l.activation) for l in net.layers
    ]
    dup._cache = None
    return dup


def load_snapshot(net: DenseNet, snap: DenseNet) -> None:
    """Copy parameters from ``snap`` into ``net`` (topologies must match)."""
    if len(net.layers) != len(snap.layers):
        raise ConfigError("layer count mismatch")
    for dst, src in zip(net.layers, snap.layers):
        if dst.weight.shape != src.weight.shape:
            raise ConfigError("layer shape mismatch")
        dst.weight[...] = src.weight
        dst.bias[...] = src.bias


def serialize(net: DenseNet) -> bytes:
    """Flat binary form: magic, layer count, per-layer dims, then little-endian
    float32 weights followed by biases, layer by layer."""
    parts = [_MAGIC, struct.pack("<I", len(net.layers))]
    for l in net.layers:
        out_d, in_d = l.weight.shape
        parts.append(struct.pack("<II", in_d, out_d))
    for l in net.layers:
        parts.append(np.ascontiguousarray(l.weight, dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(l.bias, dtype="<f4").tobytes())
    return b"".join(parts)


def load_into(net: DenseNet, blob: bytes, offset: int = 0) -> int:
    """Load serialized parameters into ``net``; returns the offset past the blob."""
    if blob[offset : offset + 6] != _MAGIC:
        raise ConfigError("bad magic: not a serialized net")
    offset += 6
    (n_layers,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    if n_layers != len(net.layers):
        raise ConfigError(f"layer count {n_layers} != net's {len(net.layers)}")
    dims = []
    for _ in range(n_layers):
        in_d, out_d = struct.unpack_from("<II", blob, offset)
        offset += 8
        dims.append((in_d, out_d))
    for l, (in_d, out_d) in zip(net.layers, dims):
        if l.weight.shape != (out_d, in_d):
            raise ConfigError(
                f"layer shape {(out_d, in_d)} != net's {l.weight.shape}"
            )
    for l, (in_d, out_d) in zip(net.layers, dims):
        n = out_d * in_d
        w = np.frombuffer(blob, dtype="<f4", count=n, offset=offset)
        offset += 4 * n
        b = np.frombuffer(blob, dtype="<f4", count=out_d, offset=offset)
        offset += 4 * out_d
        l.weight[...] = w.reshape(out_d, in_d).astype(net.dtype)
        l.bias[...] = b.astype(net.dtype)
    return offset


@dataclass
class AdamState:
    """Adam accumulators for a fixed list of parameter arrays."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_init(
    params: list[np.ndarray],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> AdamState:
    return AdamState(
        lr=lr,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
        m=[np.zeros_like(p) for p in params],
        v=[np.zeros_like(p) for p in params],
    )


def adam_step(
    state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]
) -> list[np.ndarray]:
    """One bias-corrected Adam update, in place. Aborts on non-finite gradients."""
    if len(params) != len(state.m) or len(grads) != len(state.m):
        raise ConfigError("parameter/gradient list length mismatch")
    for i, g in enumerate(grads):
        if g.shape != params[i].shape:
            raise ConfigError(f"gradient {i} shape {g.shape} != {params[i].shape}")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(
                f"non-finite gradient in parameter {i}; update aborted"
            )
    state.step += 1
    c1 = 1.0 - state.beta1 ** state.step
    c2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * np.square(g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params
