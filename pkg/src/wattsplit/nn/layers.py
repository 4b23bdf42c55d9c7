"""Minimal neural layers with hand-derived backward passes.

Conventions: batch-first arrays, channels last for sequences, so a mains
window batch is (B, L, 1). Convolutions are valid (no padding), stride 1;
pooling stride equals the pool width. Training arithmetic is float32; the
gradient checker runs a float64 copy of the network (see Network.astype).

All forward passes cache what backward needs, so the call order per batch
is forward -> backward. Layers without an rng argument (or rng=None) start
from zero parameters, which several analytic corner-case tests rely on.
"""

from __future__ import annotations

import numpy as np

SIGMOID_CLIP = 30.0  # |z| beyond this is saturated at float precision anyway


class ShapeError(ValueError):
    """An input's shape does not match what the layer expects."""


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.clip(z, -SIGMOID_CLIP, SIGMOID_CLIP)))


def _uniform(rng, limit, shape, dtype):
    if rng is None:
        return np.zeros(shape, dtype=dtype)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    """Base layer: params/grads are parallel name->array dicts."""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def param_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def _zero_grads(self):
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}


class Dense(Layer):
    """Fully connected y = x W + b on (B, n_in) inputs."""

    def __init__(self, n_in, n_out, rng=None, dtype=np.float32):
        super().__init__()
        self.n_in = n_in
        self.n_out = n_out
        limit = 1.0 / np.sqrt(n_in)
        self.params = {
            "W": _uniform(rng, limit, (n_in, n_out), dtype),
            "b": np.zeros(n_out, dtype=dtype),
        }

    def forward(self, x):
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ShapeError(f"expected (B, {self.n_in}), got {x.shape}")
        self._x = x
        return x @ self.params["W"] + self.params["b"]

    def backward(self, dy):
        self.grads = {"W": self._x.T @ dy, "b": dy.sum(axis=0)}
        return dy @ self.params["W"].T


class Conv1D(Layer):
    """Valid 1-D convolution, stride 1: (B, L, C) -> (B, L-k+1, F)."""

    def __init__(self, in_channels, filters, kernel, rng=None, dtype=np.float32):
        super().__init__()
        self.in_channels = in_channels
        self.filters = filters
        self.kernel = kernel
        limit = 1.0 / np.sqrt(in_channels * kernel)
        self.params = {
            "W": _uniform(rng, limit, (kernel, in_channels, filters), dtype),
            "b": np.zeros(filters, dtype=dtype),
        }

    def forward(self, x):
        if x.ndim != 3 or x.shape[2] != self.in_channels:
            raise ShapeError(f"expected (B, L, {self.in_channels}), got {x.shape}")
        if x.shape[1] < self.kernel:
            raise ShapeError(f"input length {x.shape[1]} shorter than kernel {self.kernel}")
        # view[b, l, c, j] = x[b, l + j, c]
        self._view = np.lib.stride_tricks.sliding_window_view(x, self.kernel, axis=1)
        return np.einsum("blcj,jcf->blf", self._view, self.params["W"],
                         optimize=True) + self.params["b"]

    def backward(self, dy):
        k = self.kernel
        self.grads = {
            "W": np.einsum("blcj,blf->jcf", self._view, dy, optimize=True),
            "b": dy.sum(axis=(0, 1)),
        }
        pad = np.zeros((dy.shape[0], k - 1, dy.shape[2]), dtype=dy.dtype)
        dy_full = np.concatenate([pad, dy, pad], axis=1)
        up = np.lib.stride_tricks.sliding_window_view(dy_full, k, axis=1)
        return np.einsum("blfj,jcf->blc", up, self.params["W"][::-1], optimize=True)


class MaxPool1D(Layer):
    """Non-overlapping max pooling: (B, L, C) -> (B, L // pool, C).

    A trailing remainder shorter than the pool width is dropped.
    """

    def __init__(self, pool):
        super().__init__()
        if pool < 1:
            raise ValueError("pool width must be >= 1")
        self.pool = pool

    def forward(self, x):
        if x.ndim != 3:
            raise ShapeError(f"expected (B, L, C), got {x.shape}")
        out_len = x.shape[1] // self.pool
        if out_len < 1:
            raise ShapeError(f"input length {x.shape[1]} shorter than pool {self.pool}")
        self._in_shape = x.shape
        blocks = x[:, :out_len * self.pool, :].reshape(x.shape[0], out_len, self.pool, x.shape[2])
        self._argmax = blocks.argmax(axis=2)
        return np.take_along_axis(blocks, self._argmax[:, :, None, :], axis=2).squeeze(2)

    def backward(self, dy):
        b, out_len, c = dy.shape
        blocks = np.zeros((b, out_len, self.pool, c), dtype=dy.dtype)
        np.put_along_axis(blocks, self._argmax[:, :, None, :], dy[:, :, None, :], axis=2)
        dx = np.zeros(self._in_shape, dtype=dy.dtype)
        dx[:, :out_len * self.pool, :] = blocks.reshape(b, out_len * self.pool, c)
        return dx


class ReLU(Layer):
    def forward(self, x):
        self._mask = x > 0
        return np.where(self._mask, x, x.dtype.type(0))

    def backward(self, dy):
        return np.where(self._mask, dy, dy.dtype.type(0))


class Flatten(Layer):
    def forward(self, x):
        self._in_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        return dy.reshape(self._in_shape)


class Softmax(Layer):
    """Row-wise softmax over the last axis.

    backward is the exact Jacobian-vector product, so chaining it after a
    cross-entropy gradient on the probabilities reproduces the familiar
    (p - y) / B logit gradient without a fused implementation.
    """

    def forward(self, x):
        shifted = x - x.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        self._p = e / e.sum(axis=-1, keepdims=True)
        return self._p

    def backward(self, dy):
        p = self._p
        return p * (dy - (dy * p).sum(axis=-1, keepdims=True))


class LSTM(Layer):
    """Recurrent layer over (B, T, n_in) sequences.

    Gates use the logistic sigmoid; `activation` ("relu" or "tanh") is
    applied to both the cell candidate and the cell output, mirroring the
    usual Keras meaning of an LSTM activation argument. Emits the full
    hidden sequence when return_sequences is set, otherwise the final
    hidden state. The forget-gate bias starts at 1.
    """

    def __init__(self, n_in, units, activation="relu", return_sequences=False,
                 rng=None, dtype=np.float32):
        super().__init__()
        if activation not in ("relu", "tanh"):
            raise ValueError(f"unsupported LSTM activation {activation!r}")
        self.n_in = n_in
        self.units = units
        self.activation = activation
        self.return_sequences = return_sequences
        u = units
        self.params = {
            "Wx": _uniform(rng, 1.0 / np.sqrt(n_in), (n_in, 4 * u), dtype),
            "Wh": _uniform(rng, 1.0 / np.sqrt(u), (u, 4 * u), dtype),
            "b": np.zeros(4 * u, dtype=dtype),
        }
        self.params["b"][u:2 * u] = 1.0  # forget gate opens by default

    def _act(self, z):
        if self.activation == "relu":
            return np.where(z > 0, z, z.dtype.type(0))
        return np.tanh(z)

    def _act_grad(self, z, a):
        """Derivative of the activation given pre-image z and image a."""
        if self.activation == "relu":
            return (z > 0).astype(z.dtype)
        return 1.0 - a * a

    def forward(self, x):
        if x.ndim != 3 or x.shape[2] != self.n_in:
            raise ShapeError(f"expected (B, T, {self.n_in}), got {x.shape}")
        b, t_len, _ = x.shape
        u = self.units
        dtype = x.dtype
        h = np.zeros((b, u), dtype=dtype)
        c = np.zeros((b, u), dtype=dtype)
        self._x = x
        self._steps = []
        hs = np.empty((b, t_len, u), dtype=dtype)
        wx, wh, bias = self.params["Wx"], self.params["Wh"], self.params["b"]
        for t in range(t_len):
            z = x[:, t, :] @ wx + h @ wh + bias
            zi, zf, zg, zo = z[:, :u], z[:, u:2 * u], z[:, 2 * u:3 * u], z[:, 3 * u:]
            gi = _sigmoid(zi)
            gf = _sigmoid(zf)
            gg = self._act(zg)
            go = _sigmoid(zo)
            c_prev, h_prev = c, h
            c = gf * c_prev + gi * gg
            hc = self._act(c)
            h = go * hc
            hs[:, t, :] = h
            self._steps.append((h_prev, c_prev, gi, gf, gg, go, zg, c, hc))
        return hs if self.return_sequences else h

    def backward(self, dy):
        x = self._x
        b, t_len, _ = x.shape
        u = self.units
        dtype = x.dtype
        wx, wh = self.params["Wx"], self.params["Wh"]
        d_wx = np.zeros_like(wx)
        d_wh = np.zeros_like(wh)
        d_b = np.zeros_like(self.params["b"])
        dx = np.zeros_like(x)
        dh_next = np.zeros((b, u), dtype=dtype)
        dc_next = np.zeros((b, u), dtype=dtype)
        for t in range(t_len - 1, -1, -1):
            h_prev, c_prev, gi, gf, gg, go, zg, c, hc = self._steps[t]
            if self.return_sequences:
                dh = dy[:, t, :] + dh_next
            else:
                dh = (dy + dh_next) if t == t_len - 1 else dh_next
            do = dh * hc
            dc = dh * go * self._act_grad(c, hc) + dc_next
            di = dc * gg
            df = dc * c_prev
            dg = dc * gi
            dz = np.concatenate([
                di * gi * (1.0 - gi),
                df * gf * (1.0 - gf),
                dg * self._act_grad(zg, gg),
                do * go * (1.0 - go),
            ], axis=1)
            d_wx += x[:, t, :].T @ dz
            d_wh += h_prev.T @ dz
            d_b += dz.sum(axis=0)
            dx[:, t, :] = dz @ wx.T
            dh_next = dz @ wh.T
            dc_next = dc * gf
        self.grads = {"Wx": d_wx, "Wh": d_wh, "b": d_b}
        return dx


class Network:
    """An ordered layer stack with flat, name-addressable parameters."""

    def __init__(self, layers: list[Layer]):
        self.layers = list(layers)

    def forward(self, x: np.ndarray) -> np.ndarray:
        for i, layer in enumerate(self.layers):
            try:
                x = layer.forward(x)
            except ShapeError as e:
                raise ShapeError(f"layer {i} ({type(layer).__name__}): {e}") from None
        return x

    def backward(self, dy: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy

    def parameters(self) -> list[tuple[str, np.ndarray]]:
        return [(f"{i}.{k}", p) for i, layer in enumerate(self.layers)
                for k, p in layer.params.items()]

    def gradients(self) -> list[tuple[str, np.ndarray]]:
        return [(f"{i}.{k}", g) for i, layer in enumerate(self.layers)
                for k, g in layer.grads.items()]

    def param_count(self) -> int:
        return sum(layer.param_count() for layer in self.layers)

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.copy() for name, p in self.parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        own = dict(self.parameters())
        if set(own) != set(state):
            missing = sorted(set(own) ^ set(state))
            raise ValueError(f"parameter names do not match: {missing}")
        for name, p in own.items():
            src = state[name]
            if src.shape != p.shape:
                raise ValueError(f"{name}: shape {src.shape} != {p.shape}")
            p[...] = src.astype(p.dtype)

    def astype(self, dtype) -> "Network":
        """Deep parameter copy in another dtype (float64 for grad checks)."""
        import copy

        clone = copy.deepcopy(self)
        for layer in clone.layers:
            layer.params = {k: v.astype(dtype) for k, v in layer.params.items()}
            layer.grads = {}
        return clone
