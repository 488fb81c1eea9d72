"""CNN architecture description, validation, depth accounting, and the
plaintext inference oracle.

A model is a plain sequence of layer records over a ``channels x height x
width`` input.  :func:`trace_layout` walks that sequence once, symbolically,
and derives everything that must agree between planning and execution: the
tensor dimensions after every layer, the slot interval the values sit on,
whether the slots between values are known to be zero, whether a deferred
scaling constant is pending, and how many multiplicative levels each layer
consumes.  The runtime layer constructions consult the same walk, so the
static depth budget can never drift from what actually executes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    NonDivisibleDims,
    NotFlattened,
    ParseError,
    ShapeMismatch,
    UnknownModel,
)

__all__ = [
    "Conv2d",
    "Conv1d",
    "AvgPool2d",
    "Square",
    "ApproxReLU",
    "Flatten",
    "FC",
    "ModelSpec",
    "LayerTrace",
    "ValidationReport",
    "trace_layout",
    "flatten_dispatch",
    "mult_depth",
    "validate",
    "reference_infer",
    "layer_forward",
    "load_model",
    "model_from_dict",
    "model_to_dict",
    "builtin",
    "builtin_names",
    "RELU_COEFFS",
]

# Default cubic coefficients for the polynomial ReLU surrogate
# p(x) = a2 * x^2 + a1 * x + a0, fitted on [-1, 1].
RELU_COEFFS = (0.375373, 0.5, 0.117071)


def _as_array(data, shape, what: str) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.size != int(np.prod(shape)):
        raise ShapeMismatch(f"{what} expects {int(np.prod(shape))} values, got {arr.size}")
    return arr.reshape(shape)


@dataclass(eq=False)
class Conv2d:
    """2-D convolution, no padding support at execution time."""

    ch_in: int
    ch_out: int
    kernel: int
    stride: int
    weights: np.ndarray
    bias: np.ndarray
    padding: int = 0

    def __post_init__(self) -> None:
        self.weights = _as_array(self.weights, (self.ch_out, self.ch_in, self.kernel, self.kernel), "conv2d weights")
        self.bias = _as_array(self.bias, (self.ch_out,), "conv2d bias")


@dataclass(eq=False)
class Conv1d:
    """1-D convolution over a width-only input (height must be 1)."""

    ch_in: int
    ch_out: int
    kernel: int
    stride: int
    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        self.weights = _as_array(self.weights, (self.ch_out, self.ch_in, self.kernel), "conv1d weights")
        self.bias = _as_array(self.bias, (self.ch_out,), "conv1d bias")


@dataclass(eq=False)
class AvgPool2d:
    """Non-overlapping average pooling with a square window."""

    kernel: int


@dataclass(eq=False)
class Square:
    """Slot-wise squaring activation."""


@dataclass(eq=False)
class ApproxReLU:
    """Degree-2 polynomial activation a2*x^2 + a1*x + a0."""

    a0: float = RELU_COEFFS[0]
    a1: float = RELU_COEFFS[1]
    a2: float = RELU_COEFFS[2]


@dataclass(eq=False)
class Flatten:
    """Compact every channel into one contiguous channel-major vector."""


@dataclass(eq=False)
class FC:
    """Fully connected layer y = W x + b on a flattened vector."""

    dat_in: int
    dat_out: int
    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        self.weights = _as_array(self.weights, (self.dat_out, self.dat_in), "fc weights")
        self.bias = _as_array(self.bias, (self.dat_out,), "fc bias")


LayerSpec = object  # any of the dataclasses above


@dataclass(eq=False)
class ModelSpec:
    """A named layer sequence over a fixed input shape.

    Treated as immutable after construction; nothing in the package mutates
    a model, so instances are safe to share across threads.
    """

    name: str
    channels: int
    height: int
    width: int
    layers: tuple

    def __post_init__(self) -> None:
        self.layers = tuple(self.layers)
        if self.channels < 1 or self.height < 1 or self.width < 1:
            raise ShapeMismatch("input dimensions must all be at least 1")

    @property
    def input_shape(self) -> dict:
        return {"channels": self.channels, "height": self.height, "width": self.width}


def flatten_dispatch(gaps_zero: bool, pending_one: bool, interval: int, w_in: int, h_in: int):
    """Decide which flatten steps a given entry layout needs.

    Returns ``(masked_extract, row_removal, column_removal)``.  Masked
    extraction subsumes row removal: it both compacts each row and applies
    any pending constant while clearing garbage between values.  Column
    removal then closes the gaps between row ends and the next row start.
    """
    masked = (not gaps_zero) or (not pending_one)
    row = (not masked) and interval > 1 and w_in > 1
    col = h_in > 1
    return masked, row, col


@dataclass
class LayerTrace:
    """Static per-layer facts derived by :func:`trace_layout`."""

    index: int
    layer: object
    name: str
    mults: int
    w_in: int
    h_in: int
    ch_in: int
    interval_in: int
    w_out: int
    h_out: int
    ch_out: int
    interval_out: int
    gaps_zero_out: bool
    pending_one_out: bool
    flatten_steps: tuple = ()


def _chain_error(err, index: int):
    err.layer_index = index
    return err


def trace_layout(m: ModelSpec) -> list:
    """Walk the model symbolically and return one :class:`LayerTrace` per layer.

    Raises :class:`ShapeMismatch`, :class:`NonDivisibleDims`, or
    :class:`NotFlattened` (each tagged with ``layer_index``) when the layer
    sequence does not chain.  Dimension chaining uses the padded output
    formula so padded models can still be planned, even though the runtime
    refuses to execute them.
    """
    w, h, ch = m.width, m.height, m.channels
    interval = 1
    gaps_zero = True
    pending_one = True
    flattened = False
    fc_count = 0
    rows = []
    for idx, layer in enumerate(m.layers):
        w_in, h_in, ch_in, interval_in = w, h, ch, interval
        steps = ()
        if isinstance(layer, Conv2d):
            name = "Conv2d"
            if layer.ch_in != ch:
                raise _chain_error(ShapeMismatch(f"conv2d expects {layer.ch_in} channels, input has {ch}"), idx)
            h_o = (h + 2 * layer.padding - layer.kernel) // layer.stride + 1
            w_o = (w + 2 * layer.padding - layer.kernel) // layer.stride + 1
            if h + 2 * layer.padding < layer.kernel or w + 2 * layer.padding < layer.kernel:
                raise _chain_error(ShapeMismatch(f"conv2d kernel {layer.kernel} exceeds input {h}x{w}"), idx)
            w, h, ch = w_o, h_o, layer.ch_out
            interval *= layer.stride
            gaps_zero, pending_one = True, True
            mults = 1
        elif isinstance(layer, Conv1d):
            name = "Conv1d"
            if h != 1:
                raise _chain_error(ShapeMismatch(f"conv1d requires height 1, input has height {h}"), idx)
            if layer.ch_in != ch:
                raise _chain_error(ShapeMismatch(f"conv1d expects {layer.ch_in} channels, input has {ch}"), idx)
            if w < layer.kernel:
                raise _chain_error(ShapeMismatch(f"conv1d kernel {layer.kernel} exceeds input width {w}"), idx)
            w = (w - layer.kernel) // layer.stride + 1
            ch = layer.ch_out
            interval *= layer.stride
            gaps_zero, pending_one = True, True
            mults = 1
        elif isinstance(layer, AvgPool2d):
            name = "AvgPool2d"
            c = layer.kernel
            if c < 1:
                raise _chain_error(ShapeMismatch("pooling kernel must be at least 1"), idx)
            if w % c or h % c:
                raise _chain_error(NonDivisibleDims(f"pool kernel {c} does not divide input {h}x{w}"), idx)
            w //= c
            h //= c
            interval *= c
            gaps_zero = False
            pending_one = pending_one and c == 1
            mults = 0
        elif isinstance(layer, Square):
            name = "Square"
            mults = 1
        elif isinstance(layer, ApproxReLU):
            name = "Approx ReLU"
            gaps_zero, pending_one = True, True
            mults = 2
        elif isinstance(layer, Flatten):
            name = "Flatten"
            steps = flatten_dispatch(gaps_zero, pending_one, interval, w, h)
            masked, row, col = steps
            mults = int(masked or row) + int(col)
            w, h, ch = w * h * ch, 1, 1
            interval = 1
            gaps_zero, pending_one = True, True
            flattened = True
        elif isinstance(layer, FC):
            fc_count += 1
            name = f"FC{fc_count}"
            if not (flattened and interval == 1 and h == 1 and ch == 1):
                raise _chain_error(NotFlattened("fully connected layer requires a flattened input"), idx)
            if layer.dat_in != w:
                raise _chain_error(ShapeMismatch(f"fc expects {layer.dat_in} inputs, flattened vector has {w}"), idx)
            w = layer.dat_out
            gaps_zero, pending_one = False, True
            mults = 1
        else:
            raise _chain_error(ParseError(f"unknown layer type {type(layer).__name__}"), idx)
        rows.append(
            LayerTrace(
                index=idx,
                layer=layer,
                name=name,
                mults=mults,
                w_in=w_in,
                h_in=h_in,
                ch_in=ch_in,
                interval_in=interval_in,
                w_out=w,
                h_out=h,
                ch_out=ch,
                interval_out=interval,
                gaps_zero_out=gaps_zero,
                pending_one_out=pending_one,
                flatten_steps=steps,
            )
        )
    return rows


def mult_depth(m: ModelSpec):
    """Per-layer and total multiplicative level consumption.

    Returns ``(per_layer, total)`` where ``per_layer`` has one count per
    model layer.  The model must chain structurally.
    """
    rows = trace_layout(m)
    per_layer = [row.mults for row in rows]
    return per_layer, sum(per_layer)


@dataclass
class ValidationReport:
    ok: bool
    total_mults: int
    per_layer_mults: list
    violations: list = field(default_factory=list)


def validate(m: ModelSpec, params) -> ValidationReport:
    """Check a model against the structural and capacity rules.

    Collected violations each carry the layer index (or ``None`` for
    model-wide rules), a short machine-readable rule name, and a message.
    """
    violations = []

    def flag(layer, rule, message):
        violations.append({"layer": layer, "rule": rule, "message": message})

    for idx, layer in enumerate(m.layers):
        if isinstance(layer, (Conv2d, Conv1d)):
            if layer.stride < 1:
                flag(idx, "kernel_stride", f"stride must be at least 1, got {layer.stride}")
            elif layer.kernel < layer.stride:
                flag(idx, "kernel_stride", f"kernel {layer.kernel} must be at least the stride {layer.stride}")
        if isinstance(layer, Conv2d):
            if layer.padding < 0:
                flag(idx, "padding_bound", f"padding must be non-negative, got {layer.padding}")
            elif 2 * layer.padding > layer.kernel:
                flag(idx, "padding_bound", f"padding {layer.padding} exceeds half the kernel {layer.kernel}")
            if layer.padding > 0:
                flag(idx, "padding_unsupported", "convolution padding is not executable on the slot schedule")
        if isinstance(layer, AvgPool2d) and layer.kernel < 1:
            flag(idx, "kernel_stride", f"pool kernel must be at least 1, got {layer.kernel}")

    n_flat = sum(isinstance(l, Flatten) for l in m.layers)
    fc_positions = [i for i, l in enumerate(m.layers) if isinstance(l, FC)]
    flat_positions = [i for i, l in enumerate(m.layers) if isinstance(l, Flatten)]
    if n_flat > 1:
        flag(flat_positions[1], "flatten_structure", "at most one flatten layer is supported")
    if fc_positions:
        if n_flat == 0:
            flag(fc_positions[0], "flatten_structure", "a fully connected layer requires a preceding flatten")
        elif flat_positions[0] > fc_positions[0]:
            flag(fc_positions[0], "flatten_structure", "the flatten layer must come before the first fully connected layer")

    rows = None
    per_layer = []
    total = 0
    try:
        rows = trace_layout(m)
        per_layer = [r.mults for r in rows]
        total = sum(per_layer)
    except (ShapeMismatch, NonDivisibleDims, NotFlattened, ParseError) as err:
        flag(getattr(err, "layer_index", None), "shape", str(err))

    if rows is not None:
        if total > params.depth:
            flag(None, "depth_budget", f"depth budget exceeded: model needs {total} levels, parameters provide {params.depth}")
        # Stride head-room: every strided layer's outputs, spread back onto the
        # original image grid, must still fit inside that grid.
        flattened_seen = False
        for row in rows:
            if isinstance(row.layer, Flatten):
                flattened_seen = True
            if flattened_seen:
                continue
            if isinstance(row.layer, (Conv2d, Conv1d, AvgPool2d)):
                # A width-only convolution never strides vertically, so only
                # the width bound applies on single-row layouts.
                height_ok = isinstance(row.layer, Conv1d) or row.h_out * row.interval_out <= m.height
                if not height_ok or row.w_out * row.interval_out > m.width:
                    flag(
                        row.index,
                        "stride_headroom",
                        f"layer output {row.h_out}x{row.w_out} at interval {row.interval_out} "
                        f"exceeds the {m.height}x{m.width} image grid",
                    )
        from . import packing  # local import to avoid a module cycle

        try:
            packing.footprint(m, params)
        except Exception as err:  # overflow or degenerate plans
            flag(None, "footprint", str(err))

    return ValidationReport(ok=not violations, total_mults=total, per_layer_mults=per_layer, violations=violations)


# -- plaintext oracle ------------------------------------------------------


def layer_forward(layer, x: np.ndarray) -> np.ndarray:
    """Exact plaintext forward pass of one layer.

    ``x`` is ``(channels, height, width)`` before flatten and 1-D after.
    Accumulation orders mirror the slot schedules term for term, so layer
    outputs agree bit for bit wherever the schedule's deferred constants are
    powers of two (fully connected layers reassociate the dot product and
    agree to rounding error instead).
    """
    if isinstance(layer, Conv2d):
        from .errors import PaddingUnsupported

        if layer.padding:
            raise PaddingUnsupported("the oracle matches the runtime and does not evaluate padded convolutions")
        ch, h, w = x.shape
        k, s = layer.kernel, layer.stride
        h_out = (h - k) // s + 1
        w_out = (w - k) // s + 1
        out = np.zeros((layer.ch_out, h_out, w_out))
        for i in range(layer.ch_in):
            for j in range(k):
                for q in range(k):
                    window = x[i, j : j + h_out * s : s, q : q + w_out * s : s]
                    out += layer.weights[:, i, j, q][:, None, None] * window
        out += layer.bias[:, None, None]
        return out
    if isinstance(layer, Conv1d):
        ch, h, w = x.shape
        k, s = layer.kernel, layer.stride
        w_out = (w - k) // s + 1
        out = np.zeros((layer.ch_out, 1, w_out))
        for i in range(layer.ch_in):
            for q in range(k):
                window = x[i, 0, q : q + w_out * s : s]
                out[:, 0, :] += layer.weights[:, i, q][:, None] * window
        out += layer.bias[:, None, None]
        return out
    if isinstance(layer, AvgPool2d):
        c = layer.kernel
        ch, h, w = x.shape
        if h % c or w % c:
            raise NonDivisibleDims(f"pool kernel {c} does not divide input {h}x{w}")
        out = np.zeros((ch, h // c, w // c))
        for j in range(c):
            for q in range(c):
                out += x[:, j::c, q::c]
        out *= 1.0 / (c * c)
        return out
    if isinstance(layer, Square):
        return x * x
    if isinstance(layer, ApproxReLU):
        return (layer.a2 * x + layer.a1) * x + layer.a0
    if isinstance(layer, Flatten):
        return x.reshape(-1)
    if isinstance(layer, FC):
        if x.ndim != 1:
            raise NotFlattened("fully connected layer requires a flattened input")
        if x.size != layer.dat_in:
            raise ShapeMismatch(f"fc expects {layer.dat_in} inputs, got {x.size}")
        return _fc_forward(layer, x)
    raise ParseError(f"unknown layer type {type(layer).__name__}")


def _fc_forward(layer, x: np.ndarray) -> np.ndarray:
    """Evaluate W x + b with the summation tree the slot schedule induces.

    Output ``t`` sums its dot product along the weight-matrix diagonals,
    window chunk by window chunk with each chunk's wrapped tail added as one
    term, so the result is bit-identical to the rotate-mask-fold schedule
    even when intermediate magnitudes are huge.  Mathematically this is a
    plain dot product; only the association order is pinned.
    """
    d_in, d_out = layer.dat_in, layer.dat_out
    reps = math.ceil(d_in / d_out)
    window = reps * d_out
    out = np.zeros(d_out)
    for b in range(reps):
        front = np.zeros(d_out)
        wrap = np.zeros(d_out)
        for o in range(d_out):
            shift = b * d_out + o
            n_front = min(d_out, window - shift, d_in - shift)
            if n_front > 0:
                diag = np.diagonal(layer.weights, offset=shift)[:n_front]
                front[:n_front] += diag * x[shift : shift + n_front]
            start = window - shift
            if start < d_out:
                diag = np.diagonal(layer.weights, offset=shift - window)
                wrap[start : start + diag.size] += diag * x[: diag.size]
        out += front + wrap
    return out + layer.bias


def reference_infer(m: ModelSpec, sample) -> np.ndarray:
    """Run the model on one plaintext sample and return the flat output vector."""
    x = np.asarray(sample, dtype=np.float64)
    expected = (m.channels, m.height, m.width)
    if x.shape != expected:
        raise ShapeMismatch(f"sample shape {x.shape} does not match model input {expected}")
    for layer in m.layers:
        x = layer_forward(layer, x)
    return x.reshape(-1)


# -- JSON (de)serialization -------------------------------------------------


def model_from_dict(data: dict) -> ModelSpec:
    try:
        name = str(data["name"])
        shape = data["input"]
        channels, height, width = int(shape["channels"]), int(shape["height"]), int(shape["width"])
        layers = []
        for entry in data["layers"]:
            kind = entry["type"]
            if kind == "conv2d":
                layers.append(
                    Conv2d(
                        ch_in=int(entry["in"]),
                        ch_out=int(entry["out"]),
                        kernel=int(entry["kernel"]),
                        stride=int(entry["stride"]),
                        padding=int(entry.get("padding", 0)),
                        weights=entry["weights"],
                        bias=entry["bias"],
                    )
                )
            elif kind == "conv1d":
                layers.append(
                    Conv1d(
                        ch_in=int(entry["in"]),
                        ch_out=int(entry["out"]),
                        kernel=int(entry["kernel"]),
                        stride=int(entry["stride"]),
                        weights=entry["weights"],
                        bias=entry["bias"],
                    )
                )
            elif kind == "avgpool2d":
                layers.append(AvgPool2d(kernel=int(entry["kernel"])))
            elif kind == "square":
                layers.append(Square())
            elif kind == "approx_relu":
                layers.append(
                    ApproxReLU(
                        a0=float(entry.get("a0", RELU_COEFFS[0])),
                        a1=float(entry.get("a1", RELU_COEFFS[1])),
                        a2=float(entry.get("a2", RELU_COEFFS[2])),
                    )
                )
            elif kind == "flatten":
                layers.append(Flatten())
            elif kind == "fc":
                layers.append(
                    FC(
                        dat_in=int(entry["in"]),
                        dat_out=int(entry["out"]),
                        weights=entry["weights"],
                        bias=entry["bias"],
                    )
                )
            else:
                raise ParseError(f"unknown layer type {kind!r}")
        return ModelSpec(name=name, channels=channels, height=height, width=width, layers=tuple(layers))
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError, ShapeMismatch) as err:
        raise ParseError(f"malformed model description: {err}") from err


def model_to_dict(m: ModelSpec) -> dict:
    layers = []
    for layer in m.layers:
        if isinstance(layer, Conv2d):
            layers.append(
                {
                    "type": "conv2d",
                    "in": layer.ch_in,
                    "out": layer.ch_out,
                    "kernel": layer.kernel,
                    "stride": layer.stride,
                    "padding": layer.padding,
                    "weights": layer.weights.reshape(-1).tolist(),
                    "bias": layer.bias.tolist(),
                }
            )
        elif isinstance(layer, Conv1d):
            layers.append(
                {
                    "type": "conv1d",
                    "in": layer.ch_in,
                    "out": layer.ch_out,
                    "kernel": layer.kernel,
                    "stride": layer.stride,
                    "weights": layer.weights.reshape(-1).tolist(),
                    "bias": layer.bias.tolist(),
                }
            )
        elif isinstance(layer, AvgPool2d):
            layers.append({"type": "avgpool2d", "kernel": layer.kernel})
        elif isinstance(layer, Square):
            layers.append({"type": "square"})
        elif isinstance(layer, ApproxReLU):
            layers.append({"type": "approx_relu", "a0": layer.a0, "a1": layer.a1, "a2": layer.a2})
        elif isinstance(layer, Flatten):
            layers.append({"type": "flatten"})
        elif isinstance(layer, FC):
            layers.append(
                {
                    "type": "fc",
                    "in": layer.dat_in,
                    "out": layer.dat_out,
                    "weights": layer.weights.reshape(-1).tolist(),
                    "bias": layer.bias.tolist(),
                }
            )
    return {"name": m.name, "input": m.input_shape, "layers": layers}


def load_model(path) -> ModelSpec:
    """Load a model description from a JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        raise ParseError(f"cannot read model file {path}: {err}") from err
    if not isinstance(data, dict):
        raise ParseError("model file must contain a JSON object")
    return model_from_dict(data)


# -- built-in architectures --------------------------------------------------

# Each entry: input (channels, height, width) followed by layer stubs.
# Weight tensors are drawn uniformly from [-0.5, 0.5) with a seeded generator.
_BUILTINS = {
    "M1": (
        (1, 28, 28),
        (
            ("conv2d", dict(ch_in=1, ch_out=8, kernel=4, stride=3)),
            ("square",),
            ("flatten",),
            ("fc", dict(dat_in=648, dat_out=64)),
            ("square",),
            ("fc", dict(dat_in=64, dat_out=10)),
        ),
    ),
    "M2": (
        (1, 28, 28),
        (
            ("conv2d", dict(ch_in=1, ch_out=4, kernel=5, stride=1)),
            ("square",),
            ("avgpool2d", dict(kernel=2)),
            ("conv2d", dict(ch_in=4, ch_out=12, kernel=5, stride=1)),
            ("square",),
            ("avgpool2d", dict(kernel=2)),
            ("flatten",),
            ("fc", dict(dat_in=192, dat_out=10)),
        ),
    ),
    "M3": (
        (1, 28, 28),
        (
            ("conv2d", dict(ch_in=1, ch_out=6, kernel=3, stride=1)),
            ("approx_relu",),
            ("avgpool2d", dict(kernel=2)),
            ("flatten",),
            ("fc", dict(dat_in=1014, dat_out=120)),
            ("approx_relu",),
            ("fc", dict(dat_in=120, dat_out=10)),
        ),
    ),
    "M4": (
        (1, 32, 32),
        (
            ("conv2d", dict(ch_in=1, ch_out=6, kernel=5, stride=1)),
            ("square",),
            ("avgpool2d", dict(kernel=2)),
            ("conv2d", dict(ch_in=6, ch_out=16, kernel=5, stride=1)),
            ("square",),
            ("avgpool2d", dict(kernel=2)),
            ("conv2d", dict(ch_in=16, ch_out=120, kernel=5, stride=1)),
            ("square",),
            ("flatten",),
            ("fc", dict(dat_in=120, dat_out=84)),
            ("square",),
            ("fc", dict(dat_in=84, dat_out=10)),
        ),
    ),
    "M5": (
        (3, 32, 32),
        (
            ("conv2d", dict(ch_in=3, ch_out=16, kernel=3, stride=1)),
            ("square",),
            ("avgpool2d", dict(kernel=2)),
            ("conv2d", dict(ch_in=16, ch_out=64, kernel=4, stride=1)),
            ("square",),
            ("avgpool2d", dict(kernel=2)),
            ("conv2d", dict(ch_in=64, ch_out=128, kernel=3, stride=1)),
            ("square",),
            ("avgpool2d", dict(kernel=4)),
            ("flatten",),
            ("fc", dict(dat_in=128, dat_out=10)),
        ),
    ),
    "M6": (
        (1, 16, 16),
        (
            ("conv2d", dict(ch_in=1, ch_out=6, kernel=4, stride=2)),
            ("square",),
            ("flatten",),
            ("fc", dict(dat_in=294, dat_out=64)),
            ("square",),
            ("fc", dict(dat_in=64, dat_out=10)),
        ),
    ),
    "M7": (
        (1, 1, 128),
        (
            ("conv1d", dict(ch_in=1, ch_out=2, kernel=2, stride=2)),
            ("square",),
            ("conv1d", dict(ch_in=2, ch_out=4, kernel=2, stride=2)),
            ("flatten",),
            ("fc", dict(dat_in=128, dat_out=32)),
            ("square",),
            ("fc", dict(dat_in=32, dat_out=5)),
        ),
    ),
}


def builtin_names() -> list:
    return sorted(_BUILTINS)


def builtin(name: str, seed: int = 0) -> ModelSpec:
    """Instantiate a built-in architecture with seeded random weights."""
    key = name.upper()
    if key not in _BUILTINS:
        raise UnknownModel(f"unknown built-in model {name!r}; available: {', '.join(builtin_names())}")
    (channels, height, width), stubs = _BUILTINS[key]
    rng = np.random.default_rng(seed)

    def draw(*shape):
        return rng.uniform(-0.5, 0.5, size=shape)

    layers = []
    for stub in stubs:
        kind = stub[0]
        args = stub[1] if len(stub) > 1 else {}
        if kind == "conv2d":
            layers.append(
                Conv2d(
                    **args,
                    weights=draw(args["ch_out"], args["ch_in"], args["kernel"], args["kernel"]),
                    bias=draw(args["ch_out"]),
                )
            )
        elif kind == "conv1d":
            layers.append(
                Conv1d(
                    **args,
                    weights=draw(args["ch_out"], args["ch_in"], args["kernel"]),
                    bias=draw(args["ch_out"]),
                )
            )
        elif kind == "avgpool2d":
            layers.append(AvgPool2d(**args))
        elif kind == "square":
            layers.append(Square())
        elif kind == "approx_relu":
            layers.append(ApproxReLU())
        elif kind == "flatten":
            layers.append(Flatten())
        elif kind == "fc":
            layers.append(FC(**args, weights=draw(args["dat_out"], args["dat_in"]), bias=draw(args["dat_out"])))
    return ModelSpec(name=key, channels=channels, height=height, width=width, layers=tuple(layers))
