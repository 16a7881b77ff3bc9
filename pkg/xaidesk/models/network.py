"""Layer-sequence networks, the toy CNN and the black-box predict handle."""

import logging
import math
from collections import OrderedDict
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from xaidesk.core.autodiff import (
    Affine,
    ComputationTape,
    Conv2d,
    Flatten,
    Layer,
    MaxPool2,
    Relu,
    Softmax,
    Tensor,
    head_id,
    run_layers,
)
from xaidesk.core.exceptions import (
    CapabilityException,
    InvalidArgumentException,
    NumericException,
)
from xaidesk.core.rng import SplitMix64
from xaidesk.schemas.model import ArchitectureConfig
from xaidesk.utils.validators import validate_image

logger = logging.getLogger(__name__)

GRADCAM_TAP = "relu2"


def image_to_input(image: np.ndarray) -> np.ndarray:
    """uint8 H x W x 3 image -> float64 3 x H x W tensor data in [0, 1]."""
    return image.transpose(2, 0, 1).astype(np.float64) / 255.0


class Network:
    """
    Ordered sequence of layers ending in a softmax.

    Networks are immutable: with_parameters() returns a new network and
    every forward pass owns its own tape, so one network can serve many
    threads at once.
    """

    def __init__(self, layers: Sequence[Layer], version: str = "custom"):
        ids = [layer.layer_id for layer in layers]
        if len(set(ids)) != len(ids):
            raise InvalidArgumentException(f"Duplicate layer ids in {ids}")
        if not layers or layers[-1].op != "softmax":
            raise InvalidArgumentException("A network must end with a softmax layer")
        self.layers: List[Layer] = list(layers)
        self.version = version

    def __repr__(self) -> str:
        return f"<Network(version={self.version}, layers={len(self.layers)}, params={self.parameter_count})>"

    @property
    def layer_ids(self) -> List[str]:
        return [layer.layer_id for layer in self.layers]

    def layer_index(self, layer_id: str) -> int:
        try:
            return self.layer_ids.index(layer_id)
        except ValueError:
            raise InvalidArgumentException(
                f"Unknown layer '{layer_id}'; known layers: {', '.join(self.layer_ids)}"
            )

    def parameters(self) -> "OrderedDict[str, np.ndarray]":
        params: "OrderedDict[str, np.ndarray]" = OrderedDict()
        for layer in self.layers:
            for name, value in layer.parameters().items():
                params[f"{layer.layer_id}.{name}"] = value
        return params

    @property
    def parameter_count(self) -> int:
        return sum(value.size for value in self.parameters().values())

    def with_parameters(self, params: Dict[str, np.ndarray]) -> "Network":
        layers = []
        for layer in self.layers:
            own = {
                name: np.asarray(params[f"{layer.layer_id}.{name}"], dtype=np.float64)
                for name in layer.parameters()
            }
            layers.append(layer.with_parameters(own) if own else layer)
        return self._rebuild(layers)

    def _rebuild(self, layers: List[Layer]) -> "Network":
        return Network(layers, self.version)

    @property
    def input_shape(self) -> Optional[Tuple[int, ...]]:
        return None

    def forward(self, x: np.ndarray, taps: Iterable[str] = ()) -> Tuple[np.ndarray, np.ndarray, ComputationTape]:
        """
        Run a full forward pass on a fresh tape.

        Args:
            x: Network input data.
            taps: Layer ids whose activation and gradient must be retained.

        Returns:
            tuple: (probabilities, logits, tape).
        """
        for tap in taps:
            self.layer_index(tap)
        tape = ComputationTape(taps)
        probabilities = run_layers(self.layers, Tensor(x), tape)
        logits = tape.tensors[head_id(tape)].data
        return probabilities.data, logits, tape

    def predict(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        probabilities, logits, _ = self.forward(x)
        return probabilities, logits

    def forward_tail(self, layer_id: str, activation: np.ndarray) -> np.ndarray:
        """Logits obtained by feeding an activation into the layers after layer_id."""
        start = self.layer_index(layer_id) + 1
        tape = ComputationTape()
        run_layers(self.layers[start:], Tensor(activation), tape)
        return tape.tensors[head_id(tape)].data

    def activation_pattern(self, x: np.ndarray) -> bytes:
        """ReLU signs and pool winners of a pass; equal patterns mean no kink was crossed."""
        _, _, tape = self.forward(x)
        parts = []
        for record in tape.records:
            if record.op == "relu":
                parts.append(np.packbits(record.saved > 0).tobytes())
            elif record.op == "maxpool2":
                parts.append(record.saved[0].astype(np.uint8).tobytes())
        return b"".join(parts)


class ToyConvNet(Network):
    """conv-relu-pool, conv-relu-pool, affine-relu, affine, softmax."""

    def __init__(self, layers: Sequence[Layer], architecture: ArchitectureConfig):
        super().__init__(layers, architecture.version)
        self.architecture = architecture

    def _rebuild(self, layers: List[Layer]) -> "ToyConvNet":
        return ToyConvNet(layers, self.architecture)

    @property
    def input_shape(self) -> Tuple[int, ...]:
        side = self.architecture.input_size
        return (3, side, side)

    @classmethod
    def from_parameters(cls, params: Dict[str, np.ndarray], architecture: ArchitectureConfig) -> "ToyConvNet":
        layers = [
            Conv2d("conv1", params["conv1.weight"], params["conv1.bias"]),
            Relu("relu1"),
            MaxPool2("pool1"),
            Conv2d("conv2", params["conv2.weight"], params["conv2.bias"]),
            Relu(GRADCAM_TAP),
            MaxPool2("pool2"),
            Flatten("flatten"),
            Affine("fc1", params["fc1.weight"], params["fc1.bias"]),
            Relu("relu3"),
            Affine("fc2", params["fc2.weight"], params["fc2.bias"]),
            Softmax("softmax"),
        ]
        return cls(layers, architecture)


def parameter_shapes(architecture: ArchitectureConfig) -> "OrderedDict[str, Tuple[int, ...]]":
    a = architecture
    k = a.kernel
    return OrderedDict(
        [
            ("conv1.weight", (a.conv1_channels, 3, k, k)),
            ("conv1.bias", (a.conv1_channels,)),
            ("conv2.weight", (a.conv2_channels, a.conv1_channels, k, k)),
            ("conv2.bias", (a.conv2_channels,)),
            ("fc1.weight", (a.hidden, a.flat_features)),
            ("fc1.bias", (a.hidden,)),
            ("fc2.weight", (a.classes, a.hidden)),
            ("fc2.bias", (a.classes,)),
        ]
    )


def glorot_bound(shape: Tuple[int, ...]) -> float:
    """s = sqrt(6 / (fan_in + fan_out)); conv fans include the receptive field."""
    receptive = int(np.prod(shape[2:])) if len(shape) > 2 else 1
    fan_out, fan_in = shape[0] * receptive, shape[1] * receptive
    return math.sqrt(6.0 / (fan_in + fan_out))


def build_toycnn(seed: int, architecture: Optional[ArchitectureConfig] = None) -> ToyConvNet:
    """
    Build a freshly initialized toy CNN.

    Weights are uniform(-s, s) drawn from one SplitMix64 stream, consumed
    layer by layer and row-major inside each tensor. Biases are zero and
    consume no draws.

    Args:
        seed: Stream seed.
        architecture: Layer widths; the 3x64x64 default when omitted.

    Returns:
        ToyConvNet: The initialized network.
    """
    architecture = architecture or ArchitectureConfig()
    rng = SplitMix64(seed)
    params: Dict[str, np.ndarray] = {}
    for name, shape in parameter_shapes(architecture).items():
        if name.endswith(".bias"):
            params[name] = np.zeros(shape)
            continue
        bound = glorot_bound(shape)
        size = int(np.prod(shape))
        params[name] = rng.uniform_array(size, -bound, bound).reshape(shape)
    model = ToyConvNet.from_parameters(params, architecture)
    logger.debug(f"Built {model!r} from seed {seed}")
    return model


class ModelHandle:
    """
    Black-box predict interface shared by all explainers.

    predict maps an ImageU8 to (probabilities, logits). Handles built from a
    Network are gradient-capable; handles wrapping an arbitrary callable are
    opaque and only usable by the perturbation explainers.
    """

    def __init__(
            self,
            predict_fn: Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]],
            network: Optional[Network] = None,
    ):
        self._predict_fn = predict_fn
        self.network = network

    @classmethod
    def from_network(cls, network: Network) -> "ModelHandle":
        return cls(lambda image: network.predict(image_to_input(image)), network)

    @classmethod
    def opaque(cls, probability_fn: Callable[[np.ndarray], np.ndarray]) -> "ModelHandle":
        """Wrap a function returning class probabilities; logits are their logs."""

        def predict(image: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
            probabilities = np.asarray(probability_fn(image), dtype=np.float64)
            logits = np.log(np.maximum(probabilities, np.finfo(np.float64).tiny))
            return probabilities, logits

        return cls(predict)

    @property
    def gradient_capable(self) -> bool:
        return self.network is not None

    def require_network(self) -> Network:
        if self.network is None:
            raise CapabilityException(
                "Model is opaque (no gradients); gradcam and guided need a gradient-capable model, "
                "use lime or shap instead"
            )
        return self.network

    def predict(self, image: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Class probabilities and logits for one image.

        Raises:
            NumericException: If the model output is non-finite or not a distribution.
        """
        validate_image(image)
        probabilities, logits = self._predict_fn(image)
        probabilities = np.asarray(probabilities, dtype=np.float64)
        if not np.all(np.isfinite(probabilities)) or not np.all(np.isfinite(logits)):
            raise NumericException("Model returned non-finite output")
        if np.any(probabilities < 0) or abs(probabilities.sum() - 1.0) > 1e-9:
            raise NumericException("Model output is not a probability distribution")
        return probabilities, np.asarray(logits, dtype=np.float64)

    def probability(self, image: np.ndarray, class_index: int) -> float:
        return float(self.predict(image)[0][class_index])

    def class_count(self, image: np.ndarray) -> int:
        return len(self.predict(image)[0])


def as_network(model) -> Network:
    """Accept a Network or a ModelHandle, returning the gradient-capable network."""
    if isinstance(model, Network):
        return model
    if isinstance(model, ModelHandle):
        return model.require_network()
    raise CapabilityException(f"{type(model).__name__} does not expose gradients; use lime or shap")


def predicted_class(probabilities: np.ndarray) -> int:
    """Argmax with ties resolved to the lowest index."""
    return int(np.argmax(probabilities))
