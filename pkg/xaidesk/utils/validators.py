"""Validation helpers for images and index arguments."""

from typing import Optional

import numpy as np

from xaidesk.core.exceptions import InvalidArgumentException


def validate_image(image: np.ndarray, size: Optional[int] = None) -> np.ndarray:
    """
    Check that an array is an 8-bit RGB image.

    Args:
        image: Candidate H x W x 3 array.
        size: Required side length, if any.

    Returns:
        np.ndarray: The same image.

    Raises:
        InvalidArgumentException: If dtype, rank or dimensions are wrong.
    """
    if not isinstance(image, np.ndarray) or image.dtype != np.uint8:
        raise InvalidArgumentException("Image must be a uint8 array")
    if image.ndim != 3 or image.shape[2] != 3:
        raise InvalidArgumentException(f"Image must be H x W x 3, got {image.shape}")
    if size is not None and image.shape[:2] != (size, size):
        raise InvalidArgumentException(f"Image must be {size}x{size}, got {image.shape[0]}x{image.shape[1]}")
    return image


def validate_class_index(class_index: int, class_count: int) -> int:
    if not 0 <= class_index < class_count:
        raise InvalidArgumentException(f"Class index {class_index} outside [0, {class_count})")
    return class_index


def validate_count(name: str, value: int, minimum: int = 1) -> int:
    if value < minimum:
        raise InvalidArgumentException(f"{name} must be >= {minimum}, got {value}")
    return value
