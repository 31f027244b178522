import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lang2color import colorspace as cs

from .oracle_colorspace import rgb8_to_lab

# frozen from the scalar double-precision oracle in oracle_colorspace.py
GREY128_L = 53.585015771669404


def _pixel(r, g, b):
    return np.array([[[r, g, b]]], dtype=np.uint8)


def test_reference_white():
    lab = cs.rgb_to_lab(_pixel(255, 255, 255))[0, 0]
    assert abs(lab[0] - 100.0) < 1e-3
    assert abs(lab[1]) < 1e-3 and abs(lab[2]) < 1e-3


def test_black():
    lab = cs.rgb_to_lab(_pixel(0, 0, 0))[0, 0]
    assert np.allclose(lab, 0.0, atol=1e-3)


def test_mid_grey_matches_oracle():
    lab = cs.rgb_to_lab(_pixel(128, 128, 128))[0, 0]
    assert abs(lab[0] - GREY128_L) < 1e-9
    assert abs(lab[0] - 53.6) < 0.05
    assert abs(lab[1]) < 1e-3 and abs(lab[2]) < 1e-3


@given(
    st.integers(0, 255), st.integers(0, 255), st.integers(0, 255)
)
@settings(max_examples=200, deadline=None)
def test_matches_scalar_oracle(r, g, b):
    lab = cs.rgb_to_lab(_pixel(r, g, b))[0, 0]
    expected = rgb8_to_lab(r, g, b)
    assert np.allclose(lab, expected, atol=1e-9)


@given(st.integers(0, 255), st.integers(0, 255), st.integers(0, 255))
@settings(max_examples=200, deadline=None)
def test_roundtrip_random(r, g, b):
    rgb = _pixel(r, g, b)
    back = cs.lab_to_rgb(cs.rgb_to_lab(rgb))
    assert np.abs(back.astype(int) - rgb.astype(int)).max() <= 1


def test_roundtrip_lattice():
    v = np.unique(np.append(np.arange(0, 256, 16), 255)).astype(np.uint8)
    grid = np.stack(np.meshgrid(v, v, v, indexing="ij"), axis=-1).reshape(1, -1, 3)
    back = cs.lab_to_rgb(cs.rgb_to_lab(grid))
    assert np.abs(back.astype(int) - grid.astype(int)).max() <= 1


def test_grey_axis_is_neutral():
    greys = np.arange(256, dtype=np.uint8)
    img = np.stack([greys] * 3, axis=-1)[None]
    lab = cs.rgb_to_lab(img)
    assert np.abs(lab[..., 1]).max() < 0.5
    assert np.abs(lab[..., 2]).max() < 0.5
    # lightness strictly increases along the grey ramp
    assert np.all(np.diff(lab[0, :, 0]) > 0)


def test_ab_range_covers_quantizer_grid():
    rng = np.random.default_rng(0)
    rgb = rng.integers(0, 256, size=(64, 64, 3), dtype=np.uint8)
    lab = cs.rgb_to_lab(rgb)
    assert np.abs(lab[..., 1:]).max() <= 110.0
    # the most saturated corners stay inside too
    corners = np.array(
        [[[255, 0, 0], [0, 255, 0], [0, 0, 255], [255, 255, 0], [255, 0, 255], [0, 255, 255]]],
        dtype=np.uint8,
    )
    assert np.abs(cs.rgb_to_lab(corners)[..., 1:]).max() <= 110.0


def test_decode_clips_out_of_gamut():
    lab = np.array([[[50.0, 500.0, 0.0]]])
    rgb, clipped = cs.lab_to_rgb(lab, return_clip_count=True)
    assert rgb.dtype == np.uint8
    assert clipped == 1
    in_gamut, n = cs.lab_to_rgb(np.array([[[50.0, 0.0, 0.0]]]), return_clip_count=True)
    assert n == 0


def test_fit_ab_to_gamut_preserves_lightness():
    lightness = np.array([[80.0, 40.0], [95.0, 10.0]])
    ab = np.array([[[90.0, -80.0], [10.0, 5.0]], [[70.0, 70.0], [-60.0, 90.0]]])
    fitted = cs.fit_ab_to_gamut(lightness, ab)
    rgb, clipped = cs.lab_to_rgb(cs.merge_lab(lightness, fitted), return_clip_count=True)
    assert clipped == 0
    back = cs.rgb_to_lab(rgb)
    assert np.abs(back[..., 0] - lightness).max() < 0.5
    # the in-gamut pixel is untouched
    assert np.array_equal(fitted[0, 1], ab[0, 1])
    # chroma only shrinks, never grows or rotates
    norm_in = np.linalg.norm(ab, axis=-1)
    norm_out = np.linalg.norm(fitted, axis=-1)
    assert np.all(norm_out <= norm_in + 1e-9)


def test_lab_white_decodes_to_white():
    rgb = cs.lab_to_rgb(np.array([[[100.0, 0.0, 0.0]]]))
    assert tuple(rgb[0, 0]) == (255, 255, 255)


def test_split_merge_roundtrip():
    rng = np.random.default_rng(1)
    lab = np.stack(
        [rng.uniform(0, 100, (5, 7)), rng.uniform(-80, 80, (5, 7)), rng.uniform(-80, 80, (5, 7))],
        axis=-1,
    )
    lightness, ab = cs.split_lab(lab)
    merged = cs.merge_lab(lightness, ab)
    assert np.array_equal(merged, lab)


def test_split_single_pixel():
    lightness, ab = cs.split_lab(np.array([[[50.0, 20.0, -30.0]]]))
    assert lightness[0, 0] == 50.0
    assert tuple(ab[0, 0]) == (20.0, -30.0)


def test_split_of_greyscale_origin_is_neutral():
    grey = np.full((4, 4, 3), 77, dtype=np.uint8)
    _, ab = cs.split_lab(cs.rgb_to_lab(grey))
    assert np.abs(ab).max() < 0.5


def test_merge_shape_mismatch():
    with pytest.raises(ValueError):
        cs.merge_lab(np.zeros((2, 2)), np.zeros((3, 3, 2)))


def test_merged_prediction_renders(quantizer_spec):
    from lang2color.quantizer import dequantize_labels

    labels = np.full((4, 4), 312)
    ab = dequantize_labels(labels, quantizer_spec)
    rgb = cs.lab_to_rgb(cs.merge_lab(np.full((4, 4), 60.0), ab))
    assert rgb.shape == (4, 4, 3)


def test_image_io_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    rgb = rng.integers(0, 256, size=(9, 11, 3), dtype=np.uint8)
    png = tmp_path / "x.png"
    cs.save_image(png, rgb)
    assert np.array_equal(cs.load_image(png), rgb)
    jpg = tmp_path / "x.jpg"
    cs.save_image(jpg, rgb)  # lossy; just verify shape and dtype survive
    loaded = cs.load_image(jpg)
    assert loaded.shape == rgb.shape and loaded.dtype == np.uint8


def test_image_io_rejects_other_formats(tmp_path):
    with pytest.raises(ValueError):
        cs.save_image(tmp_path / "x.bmp", np.zeros((2, 2, 3), dtype=np.uint8))
    with pytest.raises(ValueError):
        cs.load_image(tmp_path / "x.tiff")


def test_mask_io_roundtrip(tmp_path):
    mask = np.zeros((6, 6), dtype=bool)
    mask[2:4, 1:5] = True
    path = tmp_path / "m.png"
    cs.save_mask(path, mask)
    assert np.array_equal(cs.load_mask(path), mask)
