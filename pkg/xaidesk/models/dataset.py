"""Deterministic synthetic shapes dataset (disk, square, triangle, ring)."""

import enum
import logging
import re
from pathlib import Path
from typing import List, Union

import numpy as np

from xaidesk.core.exceptions import FileException, InvalidArgumentException
from xaidesk.core.rng import SplitMix64
from xaidesk.utils.imageio import read_ppm, write_ppm

logger = logging.getLogger(__name__)

SAMPLE_NAME = re.compile(r"^(\d{5})_(\d+)\.ppm$")


class ShapeClass(enum.IntEnum):
    """Class labels of the shapes dataset."""

    DISK = 0
    SQUARE = 1
    TRIANGLE = 2
    RING = 3


CLASS_COUNT = len(ShapeClass)


class Sample:
    """One labelled image."""

    __slots__ = ("image", "label")

    def __init__(self, image: np.ndarray, label: int):
        if not 0 <= label < CLASS_COUNT:
            raise InvalidArgumentException(f"Label {label} outside [0, {CLASS_COUNT})")
        self.image = image
        self.label = int(label)

    def __repr__(self) -> str:
        return f"<Sample(label={ShapeClass(self.label).name.lower()}, shape={self.image.shape})>"


def shape_mask(label: int, size: int, cx: int, cy: int, half: int) -> np.ndarray:
    """
    Boolean pixel mask of one shape.

    Square: |dx|, |dy| <= half. Disk: radius half. Ring: annulus with inner
    radius half / 2. Triangle: apex at (cx, cy - half), base on row cy + half
    spanning cx - half .. cx + half.
    """
    yy, xx = np.mgrid[0:size, 0:size]
    dx, dy = xx - cx, yy - cy
    dist2 = dx * dx + dy * dy
    if label == ShapeClass.DISK:
        return dist2 <= half * half
    if label == ShapeClass.SQUARE:
        return (np.abs(dx) <= half) & (np.abs(dy) <= half)
    if label == ShapeClass.TRIANGLE:
        return (dy >= -half) & (dy <= half) & (2 * np.abs(dx) <= dy + half)
    inner = half / 2.0
    return (dist2 <= half * half) & (dist2 >= inner * inner)


def gen_shapes_dataset(n: int, seed: int, size: int = 64) -> List[Sample]:
    """
    Generate n labelled shape images.

    Draw order: the balanced label list [i % 4] is Fisher-Yates shuffled
    first; then, per sample, center x, center y, half-size, dominant
    channel, dominant value, the two remaining channel values (in channel
    order), and finally size * size background levels row-major.

    Args:
        n: Number of samples.
        seed: Stream seed.
        size: Image side (64 for the model input).

    Returns:
        List[Sample]: The dataset.

    Raises:
        InvalidArgumentException: If n is zero.
    """
    if n < 1:
        raise InvalidArgumentException("Dataset size n must be at least 1")
    rng = SplitMix64(seed)
    labels = [i % CLASS_COUNT for i in range(n)]
    rng.shuffle(labels)

    low_center, high_center = size // 4, (3 * size) // 4
    low_half, high_half = size // 8, (14 * size) // 64
    samples = []
    for label in labels:
        cx = rng.integer(low_center, high_center)
        cy = rng.integer(low_center, high_center)
        half = rng.integer(low_half, high_half)
        dominant = rng.next_below(3)
        color = np.zeros(3, dtype=np.uint8)
        color[dominant] = rng.integer(200, 255)
        for channel in range(3):
            if channel != dominant:
                color[channel] = rng.integer(0, 80)
        noise = np.floor(rng.float_array(size * size) * 61.0).astype(np.uint8).reshape(size, size)
        image = np.repeat(noise[:, :, None], 3, axis=2)
        image[shape_mask(label, size, cx, cy, half)] = color
        samples.append(Sample(image, label))
    logger.debug(f"Generated {n} samples from seed {seed}")
    return samples


def class_histogram(samples: List[Sample]) -> List[int]:
    counts = [0] * CLASS_COUNT
    for sample in samples:
        counts[sample.label] += 1
    return counts


def dataset_channel_mean(samples: List[Sample]) -> np.ndarray:
    """Per-channel mean pixel value over a dataset."""
    stacked = np.stack([sample.image for sample in samples]).astype(np.float64)
    return stacked.mean(axis=(0, 1, 2))


def write_dataset(samples: List[Sample], out_dir: Union[str, Path]) -> List[Path]:
    """Write samples as NNNNN_<label>.ppm files."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise FileException(out_dir, str(e))
    return [write_ppm(out_dir / f"{i:05d}_{s.label}.ppm", s.image) for i, s in enumerate(samples)]


def read_dataset(data_dir: Union[str, Path]) -> List[Sample]:
    """
    Load a dataset directory written by write_dataset.

    Raises:
        FileException: If the directory is missing, empty or holds misnamed files.
    """
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise FileException(data_dir, "dataset directory not found")
    samples = []
    for path in sorted(data_dir.glob("*.ppm")):
        match = SAMPLE_NAME.match(path.name)
        if not match:
            raise FileException(path, "expected a file named NNNNN_<label>.ppm")
        samples.append(Sample(read_ppm(path), int(match.group(2))))
    if not samples:
        raise FileException(data_dir, "no samples found")
    return samples
