"""
Minimal reverse-mode differentiation over float64 tensors.

A forward pass records every layer application on an explicit
ComputationTape. backward() then walks the tape in reverse and returns a
GradientSet holding parameter gradients, the input gradient and, for every
tapped layer, its activation together with the activation gradient.

ReLU backward is pluggable. STANDARD passes the upstream gradient where the
forward input is positive. GUIDED additionally requires the upstream gradient
to be positive. The guided rule is a joint positivity mask at each ReLU; the
printed two-factor product max(0, R) * max(0, dy/dx) is read as that mask.
"""

import enum
import logging
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from xaidesk.core.exceptions import (
    DimensionException,
    NumericException,
    SeedIndexException,
    TapeStateException,
)

logger = logging.getLogger(__name__)


class ReluPolicy(str, enum.Enum):
    """Backward rule applied at every ReLU."""

    STANDARD = "standard"
    GUIDED = "guided"


class Tensor:
    """N-dimensional float64 array with an optional gradient buffer."""

    __slots__ = ("data", "grad")

    def __init__(self, data, grad: Optional[np.ndarray] = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = grad

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        return f"<Tensor(shape={self.shape}, grad={'yes' if self.grad is not None else 'no'})>"


# Layers


class Layer:
    """Base class of a differentiable layer descriptor."""

    op: str = "layer"

    def __init__(self, layer_id: str):
        self.layer_id = layer_id

    def parameters(self) -> Dict[str, np.ndarray]:
        return {}

    def with_parameters(self, params: Dict[str, np.ndarray]) -> "Layer":
        return self

    def check(self, shape: Tuple[int, ...]) -> None:
        """Raise DimensionException when the input shape does not fit."""

    def forward(self, x: np.ndarray):
        raise NotImplementedError

    def backward(self, grad: np.ndarray, saved, policy: ReluPolicy):
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"<{type(self).__name__}(id={self.layer_id})>"


class Conv2d(Layer):
    """Stride-1 convolution with symmetric zero padding, weight (O, C, k, k)."""

    op = "conv2d"

    def __init__(self, layer_id: str, weight: np.ndarray, bias: np.ndarray, pad: Optional[int] = None):
        super().__init__(layer_id)
        self.weight = np.asarray(weight, dtype=np.float64)
        self.bias = np.asarray(bias, dtype=np.float64)
        if self.weight.ndim != 4 or self.weight.shape[2] != self.weight.shape[3]:
            raise DimensionException(layer_id, f"conv weight must be (O, C, k, k), got {self.weight.shape}")
        if self.bias.shape != (self.weight.shape[0],):
            raise DimensionException(layer_id, f"conv bias must be ({self.weight.shape[0]},)")
        self.kernel = self.weight.shape[2]
        self.pad = (self.kernel - 1) // 2 if pad is None else pad

    def parameters(self) -> Dict[str, np.ndarray]:
        return {"weight": self.weight, "bias": self.bias}

    def with_parameters(self, params: Dict[str, np.ndarray]) -> "Conv2d":
        return Conv2d(self.layer_id, params["weight"], params["bias"], self.pad)

    def check(self, shape: Tuple[int, ...]) -> None:
        if len(shape) != 3:
            raise DimensionException(self.layer_id, f"expected channels x H x W, got {shape}")
        if shape[0] != self.weight.shape[1]:
            raise DimensionException(
                self.layer_id, f"expected {self.weight.shape[1]} input channels, got {shape[0]}"
            )
        if shape[1] + 2 * self.pad < self.kernel or shape[2] + 2 * self.pad < self.kernel:
            raise DimensionException(self.layer_id, f"input {shape} smaller than kernel {self.kernel}")

    def forward(self, x: np.ndarray):
        k, p = self.kernel, self.pad
        padded = np.pad(x, ((0, 0), (p, p), (p, p)))
        windows = sliding_window_view(padded, (k, k), axis=(1, 2))
        channels, out_h, out_w = x.shape[0], windows.shape[1], windows.shape[2]
        cols = windows.transpose(0, 3, 4, 1, 2).reshape(channels * k * k, out_h * out_w)
        out = self.weight.reshape(self.weight.shape[0], -1) @ cols + self.bias[:, None]
        return out.reshape(self.weight.shape[0], out_h, out_w), (cols, x.shape)

    def backward(self, grad: np.ndarray, saved, policy: ReluPolicy):
        cols, in_shape = saved
        k, p = self.kernel, self.pad
        out_channels, out_h, out_w = grad.shape
        flat = grad.reshape(out_channels, -1)
        weight_grad = (flat @ cols.T).reshape(self.weight.shape)
        bias_grad = flat.sum(axis=1)
        col_grad = (self.weight.reshape(out_channels, -1).T @ flat).reshape(in_shape[0], k, k, out_h, out_w)
        padded = np.zeros((in_shape[0], in_shape[1] + 2 * p, in_shape[2] + 2 * p))
        for di in range(k):
            for dj in range(k):
                padded[:, di:di + out_h, dj:dj + out_w] += col_grad[:, di, dj]
        input_grad = padded[:, p:p + in_shape[1], p:p + in_shape[2]]
        return input_grad, {"weight": weight_grad, "bias": bias_grad}


class Relu(Layer):
    op = "relu"

    def forward(self, x: np.ndarray):
        return np.maximum(x, 0.0), x

    def backward(self, grad: np.ndarray, saved, policy: ReluPolicy):
        return relu_backward(saved, grad, policy), {}


class MaxPool2(Layer):
    """2x2 max pooling, stride 2. Ties resolve to the first maximum in row-major order."""

    op = "maxpool2"

    def check(self, shape: Tuple[int, ...]) -> None:
        if len(shape) != 3:
            raise DimensionException(self.layer_id, f"expected channels x H x W, got {shape}")
        if shape[1] % 2 or shape[2] % 2:
            raise DimensionException(self.layer_id, f"H and W must be even, got {shape[1]}x{shape[2]}")

    def forward(self, x: np.ndarray):
        channels, height, width = x.shape
        blocks = (
            x.reshape(channels, height // 2, 2, width // 2, 2)
            .transpose(0, 1, 3, 2, 4)
            .reshape(channels, height // 2, width // 2, 4)
        )
        winner = blocks.argmax(axis=-1)
        out = np.take_along_axis(blocks, winner[..., None], axis=-1)[..., 0]
        return out, (winner, x.shape)

    def backward(self, grad: np.ndarray, saved, policy: ReluPolicy):
        winner, (channels, height, width) = saved
        blocks = np.zeros((channels, height // 2, width // 2, 4))
        np.put_along_axis(blocks, winner[..., None], grad[..., None], axis=-1)
        input_grad = (
            blocks.reshape(channels, height // 2, width // 2, 2, 2)
            .transpose(0, 1, 3, 2, 4)
            .reshape(channels, height, width)
        )
        return input_grad, {}


class Flatten(Layer):
    op = "flatten"

    def forward(self, x: np.ndarray):
        return x.reshape(-1), x.shape

    def backward(self, grad: np.ndarray, saved, policy: ReluPolicy):
        return grad.reshape(saved), {}


class Affine(Layer):
    """y = W x + b on a rank-1 input, weight (out, in)."""

    op = "affine"

    def __init__(self, layer_id: str, weight: np.ndarray, bias: np.ndarray):
        super().__init__(layer_id)
        self.weight = np.asarray(weight, dtype=np.float64)
        self.bias = np.asarray(bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise DimensionException(layer_id, f"affine weight {self.weight.shape} / bias {self.bias.shape}")

    def parameters(self) -> Dict[str, np.ndarray]:
        return {"weight": self.weight, "bias": self.bias}

    def with_parameters(self, params: Dict[str, np.ndarray]) -> "Affine":
        return Affine(self.layer_id, params["weight"], params["bias"])

    def check(self, shape: Tuple[int, ...]) -> None:
        if len(shape) != 1 or shape[0] != self.weight.shape[1]:
            raise DimensionException(self.layer_id, f"expected rank-1 input of {self.weight.shape[1]}, got {shape}")

    def forward(self, x: np.ndarray):
        return self.weight @ x + self.bias, x

    def backward(self, grad: np.ndarray, saved, policy: ReluPolicy):
        return self.weight.T @ grad, {"weight": np.outer(grad, saved), "bias": grad.copy()}


class Softmax(Layer):
    op = "softmax"

    def check(self, shape: Tuple[int, ...]) -> None:
        if len(shape) != 1:
            raise DimensionException(self.layer_id, f"softmax needs a rank-1 input, got {shape}")

    def forward(self, x: np.ndarray):
        probabilities = softmax(x)
        return probabilities, probabilities

    def backward(self, grad: np.ndarray, saved, policy: ReluPolicy):
        return saved * (grad - np.dot(grad, saved)), {}


def softmax(logits: np.ndarray) -> np.ndarray:
    """Shift-invariant softmax; entries stay strictly positive."""
    exp = np.exp(logits - np.max(logits))
    probabilities = exp / exp.sum()
    return np.maximum(probabilities, np.finfo(np.float64).tiny)


def relu_backward(forward_input: np.ndarray, upstream: np.ndarray, policy: ReluPolicy) -> np.ndarray:
    """
    Gradient passed through one ReLU site.

    Args:
        forward_input: Input the ReLU saw on the forward pass.
        upstream: Gradient arriving from the layer above.
        policy: STANDARD or GUIDED rule.

    Returns:
        np.ndarray: upstream where the rule's mask holds, 0 elsewhere.
    """
    mask = forward_input > 0
    if policy == ReluPolicy.GUIDED:
        mask &= upstream > 0
    return np.where(mask, upstream, 0.0)


# Tape


class TapeRecord:
    """One layer application: which tensor went in, which came out, what was saved."""

    __slots__ = ("layer", "input_id", "output_id", "saved")

    def __init__(self, layer: Layer, input_id: int, output_id: int, saved):
        self.layer = layer
        self.input_id = input_id
        self.output_id = output_id
        self.saved = saved

    @property
    def op(self) -> str:
        return self.layer.op


class ComputationTape:
    """Ordered record of a single forward pass. Confined to one thread."""

    def __init__(self, taps: Iterable[str] = ()):
        self.taps = set(taps)
        self.tensors: List[Tensor] = []
        self.records: List[TapeRecord] = []

    def register(self, tensor: Tensor) -> int:
        for index, known in enumerate(self.tensors):
            if known is tensor:
                return index
        self.tensors.append(tensor)
        return len(self.tensors) - 1

    def output_of(self, layer_id: str) -> Tensor:
        for record in self.records:
            if record.layer.layer_id == layer_id:
                return self.tensors[record.output_id]
        raise KeyError(layer_id)

    def __len__(self) -> int:
        return len(self.records)


class GradientSet:
    """Result of backward(): gradients of one scalar w.r.t. everything on the tape."""

    def __init__(
            self,
            parameters: Dict[str, np.ndarray],
            input_grad: np.ndarray,
            taps: Dict[str, Tuple[np.ndarray, np.ndarray]],
    ):
        self.parameters = parameters
        self.input_grad = input_grad
        self.taps = taps

    def tap(self, layer_id: str) -> Tuple[np.ndarray, np.ndarray]:
        """Return (activation, activation gradient) of a tapped layer."""
        return self.taps[layer_id]


def _require_finite(values: np.ndarray, where: str) -> None:
    if not np.all(np.isfinite(values)):
        raise NumericException(f"Non-finite values at {where}")


def forward(layer: Layer, input: Tensor, tape: ComputationTape) -> Tensor:
    """
    Apply one layer and append the application to the tape.

    Args:
        layer: Layer descriptor.
        input: Input tensor (registered on the tape if new).
        tape: Tape of the current pass.

    Returns:
        Tensor: The layer output.

    Raises:
        DimensionException: If the input shape does not fit the layer.
        NumericException: If the input or output holds non-finite values.
    """
    _require_finite(input.data, f"input of layer '{layer.layer_id}'")
    layer.check(input.shape)
    input_id = tape.register(input)
    data, saved = layer.forward(input.data)
    _require_finite(data, f"output of layer '{layer.layer_id}'")
    output = Tensor(data)
    output_id = tape.register(output)
    tape.records.append(TapeRecord(layer, input_id, output_id, saved))
    return output


def head_id(tape: ComputationTape) -> int:
    """Tensor id of the differentiated head: the logits feeding a final softmax, else the last output."""
    last = tape.records[-1]
    return last.input_id if last.op == "softmax" else last.output_id


def backward(
        tape: ComputationTape,
        seed: Union[int, np.ndarray],
        policy: ReluPolicy = ReluPolicy.STANDARD,
) -> GradientSet:
    """
    Differentiate one scalar of the tape head.

    Args:
        tape: A tape holding a completed forward pass.
        seed: Index of the head component (a logit) or a full upstream vector.
        policy: ReLU backward rule.

    Returns:
        GradientSet: Parameter, input and tap gradients.

    Raises:
        TapeStateException: If the tape is empty.
        SeedIndexException: If seed is outside the head.
    """
    if not tape.records:
        raise TapeStateException()
    target = head_id(tape)
    head = tape.tensors[target]
    if isinstance(seed, (int, np.integer)):
        if not 0 <= int(seed) < head.data.size:
            raise SeedIndexException(int(seed), head.data.size)
        upstream = np.zeros_like(head.data)
        upstream.flat[int(seed)] = 1.0
    else:
        upstream = np.asarray(seed, dtype=np.float64)
        if upstream.shape != head.shape:
            raise DimensionException("head", f"seed shape {upstream.shape} != head shape {head.shape}")

    grads: Dict[int, np.ndarray] = {target: upstream}
    param_grads: Dict[str, np.ndarray] = {}
    for record in reversed(tape.records):
        grad = grads.get(record.output_id)
        if grad is None:
            continue
        input_grad, layer_grads = record.layer.backward(grad, record.saved, policy)
        if record.input_id in grads:
            grads[record.input_id] = grads[record.input_id] + input_grad
        else:
            grads[record.input_id] = input_grad
        for name, value in layer_grads.items():
            key = f"{record.layer.layer_id}.{name}"
            param_grads[key] = param_grads[key] + value if key in param_grads else value

    for tensor_id, grad in grads.items():
        tape.tensors[tensor_id].grad = grad

    source = tape.records[0].input_id
    taps = {}
    for record in tape.records:
        if record.layer.layer_id in tape.taps:
            activation = tape.tensors[record.output_id]
            grad = grads.get(record.output_id, np.zeros_like(activation.data))
            taps[record.layer.layer_id] = (activation.data, grad)
    return GradientSet(param_grads, grads.get(source, np.zeros_like(tape.tensors[source].data)), taps)


def run_layers(layers: Sequence[Layer], x: Tensor, tape: ComputationTape) -> Tensor:
    """Chain forward() over a layer sequence."""
    for layer in layers:
        x = forward(layer, x, tape)
    return x


def grad_check(
        function: Callable[[np.ndarray], float],
        gradient: Callable[[np.ndarray], np.ndarray],
        point: np.ndarray,
        epsilon: float = 1e-5,
) -> float:
    """
    Compare an analytic gradient with central finite differences.

    Args:
        function: Scalar function of the point.
        gradient: Analytic gradient of function.
        point: Evaluation point.
        epsilon: Central-difference step.

    Returns:
        float: max |analytic - numeric| / max(1, |analytic|) over coordinates.
    """
    from xaidesk.services.oracle_service import finite_diff

    point = np.asarray(point, dtype=np.float64)
    analytic = np.asarray(gradient(point), dtype=np.float64)
    _require_finite(analytic, "analytic gradient")
    numeric = finite_diff(function, point, epsilon)
    if analytic.size == 0:
        return 0.0
    return float(np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))))
