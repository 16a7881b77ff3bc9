"""Tests for superpixel segmentation and mask application."""

import numpy as np
import pytest

from xaidesk.core.exceptions import InvalidArgumentException
from xaidesk.schemas.segmentation import Baseline
from xaidesk.services.segmentation_service import (
    apply_mask,
    export_segmentation_pgm,
    full_mask,
    grid_segment,
    is_four_connected,
    mask_from_int,
    mask_to_int,
    slic_segment,
)


def test_grid_boundaries(flat_image):
    """Test floor-based cell boundaries on a 3x3 grid of 64 pixels."""
    seg = grid_segment(flat_image, 3, 3)
    assert seg.region_count == 9
    assert seg.labels[20, 0] == 0 and seg.labels[21, 0] == 3 and seg.labels[42, 0] == 6
    assert seg.labels[0, 63] == 2
    assert list(seg.region_sizes()) == [441, 441, 462, 441, 441, 462, 462, 462, 484]


def test_grid_rejects_bad_shapes(flat_image):
    """Test zero and oversized grids."""
    with pytest.raises(InvalidArgumentException):
        grid_segment(flat_image, 0, 3)
    with pytest.raises(InvalidArgumentException):
        grid_segment(flat_image, 65, 1)


def test_slic_on_uniform_image_follows_seed_grid(flat_image):
    """Test that colour-free SLIC reduces to the spatial seed grid."""
    seg = slic_segment(flat_image, 16)
    assert seg.region_count == 16
    assert is_four_connected(seg)
    assert seg.region_sizes().min() == 256


def test_slic_regions_are_connected(disk_image):
    """Test that every SLIC region is one 4-connected component with ids in first-appearance order."""
    seg = slic_segment(disk_image, 32)
    assert is_four_connected(seg)
    assert 16 <= seg.region_count <= 64
    assert seg.labels[0, 0] == 0
    assert seg.region_sizes().sum() == 64 * 64


@pytest.mark.parametrize("vertical_edge", [True, False])
def test_slic_two_tone_follows_colour_edge(vertical_edge):
    """Test that K=2 on a half/half two-tone image splits along the colour edge."""
    image = np.empty((64, 64, 3), dtype=np.uint8)
    image[...] = (30, 40, 200)
    if vertical_edge:
        image[:, 32:] = (230, 190, 20)
    else:
        image[32:, :] = (230, 190, 20)
    seg = slic_segment(image, 2)
    labels = seg.labels if vertical_edge else seg.labels.T
    assert seg.region_count == 2
    # one pixel of slack on each side of the edge
    assert np.all(labels[:, :31] == 0)
    assert np.all(labels[:, 33:] == 1)


def test_slic_rejects_too_many_regions(flat_image):
    """Test K above the pixel count."""
    with pytest.raises(InvalidArgumentException):
        slic_segment(flat_image[:4, :4], 17)


def test_full_mask_is_identity(disk_image):
    """Test that keeping every superpixel returns the image unchanged."""
    seg = grid_segment(disk_image, 4, 4)
    np.testing.assert_array_equal(apply_mask(disk_image, seg, full_mask(16)), disk_image)


def test_empty_mask_is_baseline(disk_image):
    """Test that removing everything yields the constant baseline image."""
    seg = grid_segment(disk_image, 4, 4)
    out = apply_mask(disk_image, seg, np.zeros(16, dtype=bool), Baseline.gray(128))
    assert np.all(out == 128)


def test_partial_mask_only_touches_absent_regions(disk_image):
    """Test that only pixels of absent superpixels change."""
    seg = grid_segment(disk_image, 2, 2)
    mask = np.array([True, False, True, True])
    out = apply_mask(disk_image, seg, mask, Baseline.gray(0))
    np.testing.assert_array_equal(out[:32, :32], disk_image[:32, :32])
    assert np.all(out[:32, 32:] == 0)


def test_mask_length_mismatch(disk_image):
    """Test that a mask of the wrong length is rejected."""
    seg = grid_segment(disk_image, 2, 2)
    with pytest.raises(InvalidArgumentException):
        apply_mask(disk_image, seg, np.ones(5, dtype=bool))


def test_mask_bits():
    """Test that bit i of a mask integer is superpixel i."""
    mask = mask_from_int(0b1010, 4)
    assert list(mask) == [False, True, False, True]
    assert mask_to_int(mask) == 0b1010


def test_splat_scores(flat_image):
    """Test that each pixel takes its region's score."""
    seg = grid_segment(flat_image, 1, 2)
    pixels = seg.splat(np.array([0.25, -1.0]))
    assert pixels[10, 5] == 0.25 and pixels[10, 40] == -1.0


def test_export_label_map(tmp_path, flat_image):
    """Test the P5 label-map header with maxval K - 1."""
    seg = grid_segment(flat_image, 3, 3)
    path = export_segmentation_pgm(seg, tmp_path / "seg.pgm")
    data = path.read_bytes()
    assert data.startswith(b"P5\n64 64\n8\n")
    assert len(data) == len(b"P5\n64 64\n8\n") + 64 * 64
