"""
XAIW weight files.

Layout (little-endian):
    "XAIW\\0"                       magic, 5 bytes
    u32 version                     = 1
    u32 tensor count
    per tensor:
        u16 name length, UTF-8 name
        u8 rank, rank x u32 dims
        product(dims) x f64 values, row-major
"""

import logging
import math
import struct
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError

from xaidesk.core.exceptions import FileException, FormatException
from xaidesk.models.network import Network, ToyConvNet, parameter_shapes
from xaidesk.schemas.model import ArchitectureConfig

logger = logging.getLogger(__name__)

MAGIC = b"XAIW\x00"
VERSION = 1


def encode_weights(network: Network) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(network.parameters()))]
    for name, value in network.parameters().items():
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)) + encoded)
        parts.append(struct.pack("<B", value.ndim) + struct.pack(f"<{value.ndim}I", *value.shape))
        parts.append(np.ascontiguousarray(value, dtype="<f8").tobytes())
    return b"".join(parts)


def save_weights(network: Network, path: Union[str, Path]) -> Path:
    path = Path(path)
    try:
        path.write_bytes(encode_weights(network))
    except OSError as e:
        raise FileException(path, str(e))
    logger.info(f"Saved {network.parameter_count} parameters to {path}")
    return path


class _Reader:
    """Cursor over the payload that reports truncation with its offset."""

    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, fmt: str, what: str, tensor: Optional[str] = None) -> Tuple:
        size = struct.calcsize(fmt)
        if self.offset + size > len(self.data):
            raise FormatException(self.offset, f"Truncated {what}", tensor)
        values = struct.unpack_from(fmt, self.data, self.offset)
        self.offset += size
        return values

    def raw(self, size: int, what: str, tensor: Optional[str] = None) -> bytes:
        if self.offset + size > len(self.data):
            raise FormatException(self.offset, f"Truncated {what}", tensor)
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk


def decode_weights(data: bytes) -> Dict[str, np.ndarray]:
    """
    Parse XAIW bytes into named arrays.

    Raises:
        FormatException: On bad magic (offset 0), unsupported version
            (offset 5) or truncation (offset of the missing field, tensor named).
    """
    if data[:len(MAGIC)] != MAGIC:
        raise FormatException(0, "Bad magic, expected XAIW")
    reader = _Reader(data)
    reader.offset = len(MAGIC)
    (version,) = reader.take("<I", "version")
    if version != VERSION:
        raise FormatException(len(MAGIC), f"Unsupported version {version}")
    (count,) = reader.take("<I", "tensor count")
    tensors: Dict[str, np.ndarray] = {}
    for index in range(count):
        (name_length,) = reader.take("<H", f"name length of tensor #{index}")
        try:
            name = reader.raw(name_length, f"name of tensor #{index}").decode("utf-8")
        except UnicodeDecodeError:
            raise FormatException(reader.offset - name_length, f"Tensor #{index} name is not UTF-8")
        (rank,) = reader.take("<B", "rank", name)
        dims = reader.take(f"<{rank}I", "dims", name)
        size = int(np.prod(dims)) if rank else 1
        payload = reader.raw(8 * size, "values", name)
        tensors[name] = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(dims)
    if reader.offset != len(data):
        raise FormatException(reader.offset, "Trailing bytes after last tensor")
    return tensors


def infer_architecture(tensors: Dict[str, np.ndarray]) -> ArchitectureConfig:
    """Recover the toy CNN widths from tensor shapes."""
    try:
        conv1, conv2 = tensors["conv1.weight"].shape, tensors["conv2.weight"].shape
        fc1, fc2 = tensors["fc1.weight"].shape, tensors["fc2.weight"].shape
    except KeyError as e:
        raise FormatException(0, f"Missing tensor {e} for the toy CNN layout")
    side = 4 * math.isqrt(fc1[1] // conv2[0]) if conv2[0] else 0
    try:
        architecture = ArchitectureConfig(
            input_size=side,
            conv1_channels=conv1[0],
            conv2_channels=conv2[0],
            hidden=fc1[0],
            classes=fc2[0],
            kernel=conv1[2],
        )
    except ValidationError:
        raise FormatException(0, "Tensor shapes do not describe a valid toy CNN")
    expected = parameter_shapes(architecture)
    found: List[str] = list(tensors)
    if found != list(expected) or any(tensors[k].shape != s for k, s in expected.items()):
        raise FormatException(0, "Tensor names or shapes do not match the toy CNN layout")
    return architecture


def load_weights(path: Union[str, Path]) -> ToyConvNet:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise FileException(path, str(e))
    tensors = decode_weights(data)
    network = ToyConvNet.from_parameters(tensors, infer_architecture(tensors))
    logger.info(f"Loaded {network!r} from {path}")
    return network
