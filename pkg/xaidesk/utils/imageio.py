"""PPM / PGM encoding for images, saliency maps and label maps."""

import io
import logging
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from xaidesk.core.exceptions import FileException, FormatException
from xaidesk.utils.validators import validate_image

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def round_half_up(values) -> np.ndarray:
    return np.floor(np.asarray(values, dtype=np.float64) + 0.5)


def read_ppm(path: PathLike) -> np.ndarray:
    """
    Read a binary P6 image.

    Args:
        path: PPM file.

    Returns:
        np.ndarray: uint8 H x W x 3 array.

    Raises:
        FileException: If the file cannot be read.
        FormatException: If it is not an 8-bit RGB PPM.
    """
    try:
        with Image.open(path) as image:
            if image.format != "PPM" or image.mode != "RGB":
                raise FormatException(0, f"{path} is not an 8-bit P6 image ({image.format}, {image.mode})")
            return np.array(image, dtype=np.uint8)
    except (UnidentifiedImageError, SyntaxError) as e:
        raise FormatException(0, f"{path} is not a PPM image: {e}")
    except OSError as e:
        raise FileException(path, str(e))


def ppm_bytes(image: np.ndarray) -> bytes:
    buffer = io.BytesIO()
    Image.fromarray(validate_image(image), "RGB").save(buffer, format="PPM")
    return buffer.getvalue()


def write_ppm(path: PathLike, image: np.ndarray) -> Path:
    path = Path(path)
    try:
        path.write_bytes(ppm_bytes(image))
    except OSError as e:
        raise FileException(path, str(e))
    return path


def write_map_pgm(path: PathLike, values: np.ndarray) -> Path:
    """Write a [0, 1] map as 16-bit P5, sample = round(65535 * value)."""
    path = Path(path)
    samples = round_half_up(np.clip(values, 0.0, 1.0) * 65535.0).astype(np.int32)
    try:
        Image.fromarray(samples).save(path, format="PPM")
    except OSError as e:
        raise FileException(path, str(e))
    return path


def read_map_pgm(path: PathLike) -> np.ndarray:
    """Inverse of write_map_pgm, up to the 16-bit quantization."""
    try:
        with Image.open(path) as image:
            return np.array(image, dtype=np.float64) / 65535.0
    except OSError as e:
        raise FileException(path, str(e))


def label_pgm_bytes(labels: np.ndarray, region_count: int) -> bytes:
    """P5 label map whose maxval is region_count - 1 (at least 1)."""
    maxval = max(region_count - 1, 1)
    height, width = labels.shape
    header = f"P5\n{width} {height}\n{maxval}\n".encode("ascii")
    dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
    return header + labels.astype(dtype).tobytes()


def write_label_pgm(path: PathLike, labels: np.ndarray, region_count: int) -> Path:
    path = Path(path)
    try:
        path.write_bytes(label_pgm_bytes(labels, region_count))
    except OSError as e:
        raise FileException(path, str(e))
    return path
