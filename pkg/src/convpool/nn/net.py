"""Flat-parameter feedforward approximators with hand-written backward passes.

Networks are described by an immutable spec and stored as a single float32
vector, which keeps checkpointing, Adam, and gradient clipping trivial. Conv
stages use fixed 3x3 kernels with same-padding and stride 1, followed by
flattening into the fully connected stack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

KERNEL = 3
PAD = KERNEL // 2

_ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True)
class ApproximatorSpec:
    """Architecture description: conv stages, then fc hiddens, then a linear head."""

    input_shape: tuple[int, ...]
    hidden: tuple[int, ...]
    output_dim: int
    conv_channels: tuple[int, ...] = ()
    activation: str = "relu"
    output_gain: float = 0.01

    def __post_init__(self) -> None:
        if len(self.input_shape) not in (1, 3):
            raise ValueError(f"input_shape must be (features,) or (C, H, W), got {self.input_shape}")
        if any(d < 1 for d in self.input_shape):
            raise ValueError(f"input_shape entries must be positive, got {self.input_shape}")
        if self.conv_channels and len(self.input_shape) != 3:
            raise ValueError("conv stages require a (C, H, W) input shape")
        if any(c < 1 for c in self.conv_channels):
            raise ValueError(f"conv channel counts must be positive, got {self.conv_channels}")
        if any(h < 1 for h in self.hidden):
            raise ValueError(f"hidden widths must be positive, got {self.hidden}")
        if self.output_dim < 1:
            raise ValueError(f"output_dim must be positive, got {self.output_dim}")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"activation must be one of {_ACTIVATIONS}, got {self.activation!r}")

    @property
    def flat_input_dim(self) -> int:
        if len(self.input_shape) == 1:
            return self.input_shape[0]
        c, h, w = self.input_shape
        c = self.conv_channels[-1] if self.conv_channels else c
        return c * h * w


@dataclass(frozen=True)
class LayerSlot:
    name: str
    shape: tuple[int, ...]
    offset: int

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))


def param_layout(spec: ApproximatorSpec) -> list[LayerSlot]:
    """Ordered (name, shape, offset) slots covering the flat parameter vector."""
    slots: list[LayerSlot] = []
    off = 0

    def add(name: str, shape: tuple[int, ...]) -> None:
        nonlocal off
        slots.append(LayerSlot(name, shape, off))
        off += int(np.prod(shape))

    in_c = spec.input_shape[0] if len(spec.input_shape) == 3 else 0
    for i, out_c in enumerate(spec.conv_channels):
        add(f"conv{i}.w", (out_c, in_c, KERNEL, KERNEL))
        add(f"conv{i}.b", (out_c,))
        in_c = out_c

    in_dim = spec.flat_input_dim
    for i, width in enumerate(spec.hidden):
        add(f"fc{i}.w", (width, in_dim))
        add(f"fc{i}.b", (width,))
        in_dim = width
    add("out.w", (spec.output_dim, in_dim))
    add("out.b", (spec.output_dim,))
    return slots


def num_params(spec: ApproximatorSpec) -> int:
    slots = param_layout(spec)
    last = slots[-1]
    return last.offset + last.size


def _views(spec: ApproximatorSpec, params: np.ndarray) -> dict[str, np.ndarray]:
    if params.ndim != 1 or params.shape[0] != num_params(spec):
        raise ValueError(f"expected flat parameter vector of length {num_params(spec)}, got shape {params.shape}")
    return {s.name: params[s.offset : s.offset + s.size].reshape(s.shape) for s in param_layout(spec)}


def orthogonal(shape: tuple[int, ...], gain: float, rng: np.random.Generator) -> np.ndarray:
    """Orthogonal matrix scaled by gain; trailing dims are flattened for conv kernels."""
    rows = shape[0]
    cols = int(np.prod(shape[1:]))
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return (gain * q[:rows, :cols]).reshape(shape).astype(np.float32)


def init_params(spec: ApproximatorSpec, rng: np.random.Generator) -> np.ndarray:
    """Orthogonal weights (sqrt(2) gain on hidden, output_gain on the head), zero biases."""
    params = np.zeros(num_params(spec), dtype=np.float32)
    views = _views(spec, params)
    hidden_gain = math.sqrt(2.0)
    for slot in param_layout(spec):
        if not slot.name.endswith(".w"):
            continue
        gain = spec.output_gain if slot.name == "out.w" else hidden_gain
        views[slot.name][...] = orthogonal(slot.shape, gain, rng)
    return params


def _act(spec: ApproximatorSpec, z: np.ndarray) -> np.ndarray:
    if spec.activation == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _act_grad(spec: ApproximatorSpec, z: np.ndarray, g: np.ndarray) -> np.ndarray:
    if spec.activation == "relu":
        return g * (z > 0.0)
    t = np.tanh(z)
    return g * (1.0 - t * t)


def _im2col(x: np.ndarray) -> np.ndarray:
    """[B, C, H, W] -> [B, H*W, C*9] patch matrix for 3x3 same-padded conv."""
    b, c, h, w = x.shape
    pad = np.zeros((b, c, h + 2 * PAD, w + 2 * PAD), dtype=x.dtype)
    pad[:, :, PAD : PAD + h, PAD : PAD + w] = x
    cols = np.empty((b, c, KERNEL * KERNEL, h, w), dtype=x.dtype)
    k = 0
    for i in range(KERNEL):
        for j in range(KERNEL):
            cols[:, :, k] = pad[:, :, i : i + h, j : j + w]
            k += 1
    return cols.transpose(0, 3, 4, 1, 2).reshape(b, h * w, c * KERNEL * KERNEL)


def _col2im(dcol: np.ndarray, x_shape: tuple[int, ...]) -> np.ndarray:
    """Adjoint of _im2col: scatter patch gradients back onto the input grid."""
    b, c, h, w = x_shape
    dcol = dcol.reshape(b, h, w, c, KERNEL * KERNEL).transpose(0, 3, 4, 1, 2)
    dpad = np.zeros((b, c, h + 2 * PAD, w + 2 * PAD), dtype=dcol.dtype)
    k = 0
    for i in range(KERNEL):
        for j in range(KERNEL):
            dpad[:, :, i : i + h, j : j + w] += dcol[:, :, k]
            k += 1
    return dpad[:, :, PAD : PAD + h, PAD : PAD + w]


@dataclass
class _Trace:
    """Intermediate activations kept for the backward pass."""

    x: np.ndarray
    conv_in: list[np.ndarray] = field(default_factory=list)
    conv_pre: list[np.ndarray] = field(default_factory=list)
    conv_cols: list[np.ndarray] = field(default_factory=list)
    fc_in: list[np.ndarray] = field(default_factory=list)
    fc_pre: list[np.ndarray] = field(default_factory=list)
    out_in: np.ndarray | None = None


def _forward(spec: ApproximatorSpec, views: dict[str, np.ndarray], x: np.ndarray, trace: _Trace | None) -> np.ndarray:
    h = x
    if spec.conv_channels:
        for i in range(len(spec.conv_channels)):
            w = views[f"conv{i}.w"]
            out_c = w.shape[0]
            cols = _im2col(h)
            pre = cols @ w.reshape(out_c, -1).T + views[f"conv{i}.b"]
            bsz, hh, ww = h.shape[0], h.shape[2], h.shape[3]
            pre = pre.transpose(0, 2, 1).reshape(bsz, out_c, hh, ww)
            if trace is not None:
                trace.conv_in.append(h)
                trace.conv_cols.append(cols)
                trace.conv_pre.append(pre)
            h = _act(spec, pre)
    h = h.reshape(h.shape[0], -1)
    for i in range(len(spec.hidden)):
        if trace is not None:
            trace.fc_in.append(h)
        pre = h @ views[f"fc{i}.w"].T + views[f"fc{i}.b"]
        if trace is not None:
            trace.fc_pre.append(pre)
        h = _act(spec, pre)
    if trace is not None:
        trace.out_in = h
    return h @ views["out.w"].T + views["out.b"]


def _as_batch(spec: ApproximatorSpec, x: np.ndarray, dtype: np.dtype) -> tuple[np.ndarray, bool]:
    # computation dtype follows the parameter vector (float32 in training,
    # float64 under the finite-difference oracle)
    x = np.asarray(x, dtype=dtype)
    if x.shape == spec.input_shape:
        return x[None], True
    if x.shape[1:] != spec.input_shape:
        raise ValueError(f"input shape {x.shape} incompatible with spec input {spec.input_shape}")
    return x, False


def forward(spec: ApproximatorSpec, params: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Evaluate the network; accepts a single input or a leading batch dim."""
    xb, single = _as_batch(spec, x, params.dtype)
    out = _forward(spec, _views(spec, params), xb, None)
    return out[0] if single else out


def forward_backward(
    spec: ApproximatorSpec, params: np.ndarray, x: np.ndarray, grad_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate and backpropagate grad_out; returns (output, flat parameter gradient)."""
    xb, single = _as_batch(spec, x, params.dtype)
    views = _views(spec, params)
    trace = _Trace(x=xb)
    out = _forward(spec, views, xb, trace)

    g = np.asarray(grad_out, dtype=params.dtype)
    g = g[None] if single else g
    if g.shape != out.shape:
        raise ValueError(f"grad_out shape {g.shape} does not match output shape {out.shape}")
    if not np.all(np.isfinite(g)):
        raise ValueError("non-finite upstream gradient")

    grad = np.zeros_like(params)
    gviews = _views(spec, grad)

    gviews["out.w"][...] = g.T @ trace.out_in
    gviews["out.b"][...] = g.sum(axis=0)
    g = g @ views["out.w"]

    for i in reversed(range(len(spec.hidden))):
        g = _act_grad(spec, trace.fc_pre[i], g)
        gviews[f"fc{i}.w"][...] = g.T @ trace.fc_in[i]
        gviews[f"fc{i}.b"][...] = g.sum(axis=0)
        g = g @ views[f"fc{i}.w"]

    if spec.conv_channels:
        last = trace.conv_pre[-1]
        g = g.reshape(last.shape)
        for i in reversed(range(len(spec.conv_channels))):
            g = _act_grad(spec, trace.conv_pre[i], g)
            bsz, out_c, hh, ww = g.shape
            gflat = g.reshape(bsz, out_c, hh * ww).transpose(0, 2, 1)
            cols = trace.conv_cols[i]
            w2d = views[f"conv{i}.w"].reshape(out_c, -1)
            gw = gflat.reshape(-1, out_c).T @ cols.reshape(-1, cols.shape[2])
            gviews[f"conv{i}.w"][...] = gw.reshape(views[f"conv{i}.w"].shape)
            gviews[f"conv{i}.b"][...] = gflat.sum(axis=(0, 1))
            dcol = gflat @ w2d
            g = _col2im(dcol, trace.conv_in[i].shape)

    return (out[0] if single else out), grad
