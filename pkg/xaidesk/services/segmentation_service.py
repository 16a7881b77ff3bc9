"""Superpixel segmentation and coalition-mask application."""

import logging
import math
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import ndimage
from skimage.color import rgb2lab

from xaidesk.core.exceptions import InvalidArgumentException
from xaidesk.schemas.segmentation import Baseline
from xaidesk.utils.imageio import write_label_pgm
from xaidesk.utils.validators import validate_image

logger = logging.getLogger(__name__)

FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)
# Lab distance under which two seeds count as the same colour
SEED_COLOUR_TOLERANCE = 1.0


class Segmentation:
    """Per-pixel superpixel ids in [0, region_count)."""

    def __init__(self, labels: np.ndarray, region_count: int, method: str = "grid"):
        self.labels = np.asarray(labels, dtype=np.int64)
        self.region_count = int(region_count)
        self.method = method

    def __repr__(self) -> str:
        return f"<Segmentation(method={self.method}, K={self.region_count}, shape={self.labels.shape})>"

    @property
    def shape(self) -> Tuple[int, int]:
        return self.labels.shape

    def region_sizes(self) -> np.ndarray:
        return np.bincount(self.labels.ravel(), minlength=self.region_count)

    def splat(self, scores: np.ndarray) -> np.ndarray:
        """Per-pixel map where each pixel takes its region's score."""
        scores = np.asarray(scores, dtype=np.float64)
        if scores.shape != (self.region_count,):
            raise InvalidArgumentException(f"Expected {self.region_count} region scores, got {scores.shape}")
        return scores[self.labels]

    def describe(self) -> Dict[str, object]:
        return {"method": self.method, "region_count": self.region_count}


def grid_segment(image: np.ndarray, rows: int, cols: int) -> Segmentation:
    """
    Rectangular grid; cell boundaries at floor(i*H/rows) and floor(j*W/cols), ids row-major.

    Raises:
        InvalidArgumentException: If rows or cols is zero or exceeds the image.
    """
    validate_image(image)
    height, width = image.shape[:2]
    if rows < 1 or cols < 1:
        raise InvalidArgumentException("Grid rows and cols must be positive")
    if rows > height or cols > width:
        raise InvalidArgumentException(f"Grid {rows}x{cols} exceeds image {height}x{width}")
    row_of = np.searchsorted((np.arange(1, rows) * height) // rows, np.arange(height), side="right")
    col_of = np.searchsorted((np.arange(1, cols) * width) // cols, np.arange(width), side="right")
    labels = row_of[:, None] * cols + col_of[None, :]
    return Segmentation(labels, rows * cols, method=f"grid{rows}x{cols}")


def _seed_grid(height: int, width: int, n_segments: int) -> Tuple[int, int]:
    cols = max(1, int(round(math.sqrt(n_segments * width / height))))
    rows = max(1, int(round(n_segments / cols)))
    return min(rows, height), min(cols, width)


def _spread_seeds(lab: np.ndarray, seed_y: np.ndarray, seed_x: np.ndarray) -> np.ndarray:
    """
    Flat pixel index of each seed after moving colour repeats.

    A seed whose Lab colour lies within SEED_COLOUR_TOLERANCE of an earlier
    seed moves to the pixel of its grid cell farthest in colour from every
    earlier seed, the one nearest the cell centre on ties. Seeds in cells
    without such a pixel stay put.
    """
    height, width = lab.shape[:2]
    rows, cols = len(seed_y), len(seed_x)
    y_edges = (np.arange(rows + 1) * height) // rows
    x_edges = (np.arange(cols + 1) * width) // cols
    chosen = []
    for row in range(rows):
        for col in range(cols):
            y, x = int(seed_y[row]), int(seed_x[col])
            if chosen:
                previous = lab.reshape(-1, 3)[chosen]
                if np.linalg.norm(previous - lab[y, x], axis=1).min() < SEED_COLOUR_TOLERANCE:
                    y0, y1, x0, x1 = y_edges[row], y_edges[row + 1], x_edges[col], x_edges[col + 1]
                    cell = lab[y0:y1, x0:x1].reshape(-1, 1, 3)
                    spread = np.linalg.norm(cell - previous[None, :, :], axis=2).min(axis=1)
                    if spread.max() >= SEED_COLOUR_TOLERANCE:
                        cy, cx = np.mgrid[y0:y1, x0:x1]
                        offset = ((cy - y) ** 2 + (cx - x) ** 2).ravel()
                        candidates = np.flatnonzero(spread == spread.max())
                        best = int(candidates[np.argmin(offset[candidates])])
                        y, x = y0 + best // (x1 - x0), x0 + best % (x1 - x0)
            chosen.append(y * width + x)
    return np.array(chosen, dtype=np.int64)


def _relabel(labels: np.ndarray) -> Tuple[np.ndarray, int]:
    """Renumber ids contiguously in order of first row-major appearance."""
    _, first, inverse = np.unique(labels.ravel(), return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inverse].reshape(labels.shape), len(first)


def _merge_orphans(labels: np.ndarray) -> np.ndarray:
    """
    Make every label one 4-connected region.

    For each label only its largest connected component survives; every
    other component is absorbed by the largest label touching it.
    """
    labels = labels.copy()
    changed = True
    while changed:
        changed = False
        sizes = np.bincount(labels.ravel())
        for label in np.unique(labels):
            components, count = ndimage.label(labels == label, structure=FOUR_CONNECTED)
            if count <= 1:
                continue
            component_sizes = np.bincount(components.ravel())[1:]
            keep = int(np.argmax(component_sizes)) + 1
            for component in range(1, count + 1):
                if component == keep:
                    continue
                region = components == component
                ring = ndimage.binary_dilation(region, structure=FOUR_CONNECTED) & ~region
                neighbours = np.unique(labels[ring])
                neighbours = neighbours[neighbours != label]
                if neighbours.size == 0:
                    continue
                target = int(neighbours[np.argmax(sizes[neighbours])])
                labels[region] = target
                logger.debug(f"Merged orphan of {int(region.sum())} px from region {label} into {target}")
                changed = True
    return labels


def slic_segment(image: np.ndarray, n_segments: int, compactness: float = 10.0, iterations: int = 10) -> Segmentation:
    """
    Simplified SLIC superpixels.

    k-means in (L*, a*, b*, x*m/S, y*m/S) with S = sqrt(HW/K) and m the
    compactness. Seeds sit at the centres of a uniform grid, except that a
    seed repeating an earlier seed's colour moves within its cell to the
    most distinct colour there. A fixed number of iterations runs without
    connectivity enforcement, then orphan fragments are merged into their
    largest touching neighbour.

    Args:
        image: uint8 RGB image.
        n_segments: Requested region count K.
        compactness: Spatial weight m.
        iterations: Number of assignment/update rounds.

    Returns:
        Segmentation: Labels with a 4-connected region per id.

    Raises:
        InvalidArgumentException: If K is zero or exceeds the pixel count.
    """
    validate_image(image)
    height, width = image.shape[:2]
    if n_segments < 1:
        raise InvalidArgumentException("SLIC needs K >= 1")
    if n_segments > height * width:
        raise InvalidArgumentException(f"K={n_segments} exceeds pixel count {height * width}")
    if compactness <= 0:
        raise InvalidArgumentException("compactness must be positive")

    step = math.sqrt(height * width / n_segments)
    spatial = compactness / step
    lab_image = rgb2lab(image.astype(np.float64) / 255.0)
    lab = lab_image.reshape(-1, 3)
    yy, xx = np.mgrid[0:height, 0:width]
    # pixel centres sit at half-integer coordinates
    features = np.column_stack([lab, (xx.ravel() + 0.5) * spatial, (yy.ravel() + 0.5) * spatial])

    rows, cols = _seed_grid(height, width, n_segments)
    seed_y = ((np.arange(rows) + 0.5) * height / rows).astype(int)
    seed_x = ((np.arange(cols) + 0.5) * width / cols).astype(int)
    grid_index = (seed_y[:, None] * width + seed_x[None, :]).ravel()
    seed_index = _spread_seeds(lab_image, seed_y, seed_x)
    centres = features[seed_index].copy()
    # unmoved seeds take the exact cell centre
    kept = seed_index == grid_index
    centres[kept, 3] = np.tile((np.arange(cols) + 0.5) * width / cols, rows)[kept] * spatial
    centres[kept, 4] = np.repeat((np.arange(rows) + 0.5) * height / rows, cols)[kept] * spatial

    assignment = np.zeros(height * width, dtype=np.int64)
    for _ in range(iterations):
        distances = ((features[:, None, :] - centres[None, :, :]) ** 2).sum(axis=2)
        assignment = np.argmin(distances, axis=1)
        for k in range(len(centres)):
            members = assignment == k
            if members.any():
                centres[k] = features[members].mean(axis=0)

    labels = _merge_orphans(assignment.reshape(height, width))
    labels, count = _relabel(labels)
    if not n_segments / 2 <= count <= 2 * n_segments:
        logger.warning(f"SLIC produced {count} regions for K={n_segments}")
    return Segmentation(labels, count, method=f"slic{n_segments}")


def is_four_connected(segmentation: Segmentation) -> bool:
    """True when every id labels exactly one 4-connected component."""
    for label in range(segmentation.region_count):
        _, count = ndimage.label(segmentation.labels == label, structure=FOUR_CONNECTED)
        if count != 1:
            return False
    return True


def apply_mask(
        image: np.ndarray,
        segmentation: Segmentation,
        mask: np.ndarray,
        baseline: Optional[Baseline] = None,
) -> np.ndarray:
    """
    Keep present superpixels and paint absent ones with the baseline colour.

    Args:
        image: uint8 RGB image.
        segmentation: Superpixels of the image.
        mask: Boolean vector of length K, True = present.
        baseline: Fill for absent regions, mid-gray by default.

    Returns:
        np.ndarray: A new image of the same shape.

    Raises:
        InvalidArgumentException: On length or shape mismatch.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (segmentation.region_count,):
        raise InvalidArgumentException(
            f"Mask length {mask.shape} does not match region count {segmentation.region_count}"
        )
    if image.shape[:2] != segmentation.shape:
        raise InvalidArgumentException("Segmentation and image dimensions differ")
    baseline = baseline or Baseline.gray()
    out = image.copy()
    out[~mask[segmentation.labels]] = baseline.color()
    return out


def full_mask(region_count: int) -> np.ndarray:
    return np.ones(region_count, dtype=bool)


def mask_from_int(bits: int, region_count: int) -> np.ndarray:
    """Bit i of the integer is superpixel i."""
    return ((bits >> np.arange(region_count)) & 1).astype(bool)


def mask_to_int(mask: np.ndarray) -> int:
    return int(sum(1 << int(i) for i in np.flatnonzero(mask)))


def export_segmentation_pgm(segmentation: Segmentation, path) -> Path:
    """Write the label map as P5 with maxval K - 1."""
    return write_label_pgm(path, segmentation.labels, segmentation.region_count)
