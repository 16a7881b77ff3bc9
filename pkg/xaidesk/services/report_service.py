"""
Rendering, deletion faithfulness and report output.

Colormap: three stops, 0 -> blue, 0.5 -> green, 1 -> red, linear in
between with half-up rounding per channel, so overlays are byte-stable.
"""

import logging
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
from scipy.integrate import trapezoid

from xaidesk.config import settings
from xaidesk.core.exceptions import FileException, InvalidArgumentException
from xaidesk.models.network import ModelHandle
from xaidesk.schemas.report import Attribution, ReportDocument
from xaidesk.schemas.segmentation import Baseline
from xaidesk.utils.imageio import round_half_up, write_map_pgm, write_ppm
from xaidesk.utils.validators import validate_count, validate_image

logger = logging.getLogger(__name__)


def colormap(values: np.ndarray) -> np.ndarray:
    """Map values in [0, 1] to uint8 RGB on the blue-green-red ramp."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    low = v <= 0.5
    rising = round_half_up(255.0 * 2.0 * v)
    falling = round_half_up(255.0 * (2.0 * v - 1.0))
    red = np.where(low, 0.0, falling)
    green = np.where(low, rising, 255.0 - falling)
    blue = np.where(low, 255.0 - rising, 0.0)
    return np.stack([red, green, blue], axis=-1).astype(np.uint8)


def splat_normalize(attribution: Attribution) -> np.ndarray:
    """
    Per-pixel display values in [0, 1].

    Superpixel scores are splatted to their regions and min-max
    normalized over the image; constant scores give 0.5 everywhere.
    Pixel maps pass through unchanged.
    """
    if attribution.pixel_map is not None:
        return attribution.pixel_map
    pixels = attribution.segmentation.splat(attribution.scores)
    low, high = pixels.min(), pixels.max()
    if high == low:
        return np.full(pixels.shape, 0.5)
    return (pixels - low) / (high - low)


def render_overlay(image: np.ndarray, attribution: Attribution, alpha: Optional[float] = None) -> np.ndarray:
    """
    Blend the colormapped attribution over the image.

    out = (1 - alpha) * image + alpha * colormap(value), rounded half-up.
    """
    validate_image(image)
    alpha = settings.OVERLAY_ALPHA if alpha is None else alpha
    if not 0.0 <= alpha <= 1.0:
        raise InvalidArgumentException(f"alpha must lie in [0, 1], got {alpha}")
    values = splat_normalize(attribution)
    if values.shape != image.shape[:2]:
        raise InvalidArgumentException(f"Attribution {values.shape} does not match image {image.shape[:2]}")
    blended = (1.0 - alpha) * image.astype(np.float64) + alpha * colormap(values).astype(np.float64)
    return np.clip(round_half_up(blended), 0, 255).astype(np.uint8)


def render_grid(
        rows: Sequence[Sequence[np.ndarray]],
        labels: Optional[Sequence[str]] = None,
        gutter: Optional[int] = None,
) -> np.ndarray:
    """
    Compose cells row-major with black gutters.

    Args:
        rows: One list of images per row (original first, then one overlay per method).
        labels: Column labels, logged for the record.
        gutter: Gutter width in pixels.

    Returns:
        np.ndarray: The composed uint8 image.

    Raises:
        InvalidArgumentException: On ragged rows or mismatched cell sizes.
    """
    gutter = settings.GRID_GUTTER if gutter is None else gutter
    if not rows or not rows[0]:
        raise InvalidArgumentException("Grid needs at least one row and one column")
    columns = len(rows[0])
    if any(len(row) != columns for row in rows):
        raise InvalidArgumentException(f"Ragged grid: row lengths {[len(row) for row in rows]}")
    if labels is not None and len(labels) != columns:
        raise InvalidArgumentException(f"{len(labels)} labels for {columns} columns")
    cell_h, cell_w = rows[0][0].shape[:2]
    for row in rows:
        for cell in row:
            validate_image(cell)
            if cell.shape[:2] != (cell_h, cell_w):
                raise InvalidArgumentException(f"Cell {cell.shape[:2]} differs from {(cell_h, cell_w)}")

    height = len(rows) * cell_h + (len(rows) - 1) * gutter
    width = columns * cell_w + (columns - 1) * gutter
    canvas = np.zeros((height, width, 3), dtype=np.uint8)
    for r, row in enumerate(rows):
        top = r * (cell_h + gutter)
        for c, cell in enumerate(row):
            left = c * (cell_w + gutter)
            canvas[top:top + cell_h, left:left + cell_w] = cell
    if labels:
        logger.info(f"Grid {len(rows)}x{columns}: columns {', '.join(labels)}")
    return canvas


def deletion_curve(
        model: ModelHandle,
        image: np.ndarray,
        values: np.ndarray,
        class_index: int,
        steps: int,
        baseline: Optional[Baseline] = None,
) -> np.ndarray:
    """Class probability after deleting the top floor(j * HW / steps) pixels, j = 0..steps."""
    validate_count("steps", steps, 2)
    values = np.asarray(values, dtype=np.float64)
    if values.shape != image.shape[:2]:
        raise InvalidArgumentException(f"Attribution {values.shape} does not match image {image.shape[:2]}")
    baseline = baseline or Baseline.gray(settings.BASELINE_GRAY)
    order = np.argsort(-values.ravel(), kind="stable")
    pixel_count = order.size
    flat = image.reshape(-1, 3)
    curve = np.empty(steps + 1)
    for j in range(steps + 1):
        erased = flat.copy()
        erased[order[:(j * pixel_count) // steps]] = baseline.color()
        curve[j] = model.probability(erased.reshape(image.shape), class_index)
    return curve


def deletion_auc(
        model: ModelHandle,
        image: np.ndarray,
        attribution: Union[Attribution, np.ndarray],
        class_index: int,
        steps: Optional[int] = None,
        baseline: Optional[Baseline] = None,
) -> float:
    """
    Area under the deletion curve over fractions j / steps; lower is more faithful.

    Pixels are ranked by attribution descending with ties broken row-major.
    """
    steps = settings.DELETION_STEPS if steps is None else steps
    if isinstance(attribution, Attribution):
        values = splat_normalize(attribution)
    else:
        values = attribution
    curve = deletion_curve(model, image, values, class_index, steps, baseline)
    return float(trapezoid(curve, np.arange(steps + 1) / steps))


def write_report(
        document: ReportDocument,
        out_dir: Union[str, Path],
        overlays: Mapping[str, np.ndarray],
        maps: Mapping[str, np.ndarray],
        grid: Optional[np.ndarray] = None,
) -> List[Path]:
    """
    Write report.json and its artifacts.

    Maps and overlays are written first so every file report.json
    references exists when the JSON lands.

    Args:
        document: Report to serialize.
        out_dir: Target directory, created if missing.
        overlays: Overlay image per method name.
        maps: Normalized map per file name referenced by the document.
        grid: Comparison grid, written as grid.ppm when given.

    Returns:
        List[Path]: Written files, report.json last.

    Raises:
        FileException: On IO failure or a referenced map that was not supplied.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise FileException(out_dir, str(e))

    written: List[Path] = []
    for name, values in maps.items():
        written.append(write_map_pgm(out_dir / name, values))
    for method, overlay in overlays.items():
        written.append(write_ppm(out_dir / f"{method}_overlay.ppm", overlay))
    if grid is not None:
        written.append(write_ppm(out_dir / "grid.ppm", grid))
    for entry in document.methods:
        map_file = entry.attribution.map_file
        if map_file is not None and not (out_dir / map_file).is_file():
            raise FileException(out_dir / map_file, "referenced map was not written")

    report_path = out_dir / settings.REPORT_FILE
    try:
        report_path.write_text(document.model_dump_json(indent=2, exclude_none=True) + "\n", encoding="utf-8")
    except OSError as e:
        raise FileException(report_path, str(e))
    written.append(report_path)
    logger.info(f"Wrote {len(written)} files to {out_dir}")
    return written


def read_report(path: Union[str, Path]) -> ReportDocument:
    path = Path(path)
    try:
        return ReportDocument.model_validate_json(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise FileException(path, str(e))


def method_maps(attributions: Dict[str, Attribution]) -> Dict[str, np.ndarray]:
    """File name -> normalized map for every per-pixel attribution."""
    return {
        f"{name}_map.pgm": attribution.pixel_map
        for name, attribution in attributions.items()
        if attribution.pixel_map is not None
    }
