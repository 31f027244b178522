"""Conversion between 8-bit sRGB and CIE Lab, plus channel split/merge.

Conventions used across the package:

* rgb: uint8 array of shape (H, W, 3), sRGB encoded
* lab: float array of shape (H, W, 3) holding L in [0, 100] and the two
  color axes a, b
* lightness: float array (H, W); ab: float array (H, W, 2)

Reference white is D65 (2 degree observer) and the transfer curve is
the sRGB one (IEC 61966-2-1). All math is done in float64; decoding an
out-of-gamut Lab value clips in linear RGB before the 8-bit rounding.
"""

from pathlib import Path

import numpy as np
from PIL import Image

# D65 reference white
WHITE_POINT = np.array([0.95047, 1.0, 1.08883])

# linear sRGB -> XYZ
RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
XYZ_TO_RGB = np.linalg.inv(RGB_TO_XYZ)

_DELTA = 6.0 / 29.0

SUPPORTED_SUFFIXES = (".png", ".jpg", ".jpeg")


def _srgb_decode(u):
    return np.where(u <= 0.04045, u / 12.92, ((u + 0.055) / 1.055) ** 2.4)


def _srgb_encode(u):
    u = np.clip(u, 0.0, 1.0)
    return np.where(u <= 0.0031308, 12.92 * u, 1.055 * u ** (1.0 / 2.4) - 0.055)


def _f(t):
    return np.where(t > _DELTA**3, np.cbrt(t), t / (3.0 * _DELTA**2) + 4.0 / 29.0)


def _f_inv(u):
    return np.where(u > _DELTA, u**3, 3.0 * _DELTA**2 * (u - 4.0 / 29.0))


def _check_rgb(rgb):
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[-1] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got shape {rgb.shape}")
    if rgb.dtype != np.uint8:
        if np.any(rgb < 0) or np.any(rgb > 255):
            raise ValueError("rgb channel values must lie in [0, 255]")
    return rgb


def rgb_to_lab(rgb):
    """Convert an (H, W, 3) uint8 sRGB image to float64 CIE Lab."""
    rgb = _check_rgb(rgb)
    lin = _srgb_decode(rgb.astype(np.float64) / 255.0)
    xyz = lin @ RGB_TO_XYZ.T
    fxyz = _f(xyz / WHITE_POINT)
    lab = np.empty(rgb.shape, dtype=np.float64)
    lab[..., 0] = 116.0 * fxyz[..., 1] - 16.0
    lab[..., 1] = 500.0 * (fxyz[..., 0] - fxyz[..., 1])
    lab[..., 2] = 200.0 * (fxyz[..., 1] - fxyz[..., 2])
    return lab


def lab_to_rgb(lab, return_clip_count=False):
    """Convert an (H, W, 3) Lab image back to uint8 sRGB.

    Out-of-gamut pixels are clipped in linear RGB. When
    ``return_clip_count`` is set, also returns how many pixels needed
    clipping (useful to assert that synthetic renders stay in gamut).
    """
    lab = np.asarray(lab, dtype=np.float64)
    if lab.ndim != 3 or lab.shape[-1] != 3:
        raise ValueError(f"expected an (H, W, 3) Lab image, got shape {lab.shape}")
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    xyz = np.stack([_f_inv(fx), _f_inv(fy), _f_inv(fz)], axis=-1) * WHITE_POINT
    lin = xyz @ XYZ_TO_RGB.T
    clipped = np.any((lin < 0.0) | (lin > 1.0), axis=-1)
    srgb = _srgb_encode(np.clip(lin, 0.0, 1.0))
    rgb = np.rint(srgb * 255.0).astype(np.uint8)
    if return_clip_count:
        return rgb, int(np.count_nonzero(clipped))
    return rgb


def _linear_rgb_of_lab(lightness, ab):
    fy = (lightness + 16.0) / 116.0
    fx = fy + ab[..., 0] / 500.0
    fz = fy - ab[..., 1] / 200.0
    xyz = np.stack([_f_inv(fx), _f_inv(fy), _f_inv(fz)], axis=-1) * WHITE_POINT
    return xyz @ XYZ_TO_RGB.T


def fit_ab_to_gamut(lightness, ab, iterations=14):
    """Scale chroma toward neutral until (L, ab) is sRGB-displayable.

    Keeps lightness exact: the neutral axis is always in gamut, so a
    per-pixel scale factor in [0, 1] exists. Pixels already in gamut are
    untouched. Used by the rendering pipeline so that the final 8-bit
    encode never has to clip (which would shift L).
    """
    lightness = np.asarray(lightness, dtype=np.float64)
    ab = np.asarray(ab, dtype=np.float64)
    lin = _linear_rgb_of_lab(lightness, ab)
    outside = np.any((lin < 0.0) | (lin > 1.0), axis=-1)
    if not outside.any():
        return ab.copy()
    fitted = ab.copy()
    lo = np.zeros(int(outside.sum()))
    hi = np.ones_like(lo)
    l_out = lightness[outside]
    ab_out = ab[outside]
    for _ in range(iterations):
        mid = (lo + hi) / 2.0
        lin = _linear_rgb_of_lab(l_out, ab_out * mid[..., None])
        ok = np.all((lin >= 0.0) & (lin <= 1.0), axis=-1)
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    fitted[outside] = ab_out * lo[..., None]
    return fitted


def split_lab(lab):
    """Split a Lab image into its lightness map and its (H, W, 2) ab map."""
    lab = np.asarray(lab)
    if lab.ndim != 3 or lab.shape[-1] != 3:
        raise ValueError(f"expected an (H, W, 3) Lab image, got shape {lab.shape}")
    return lab[..., 0].copy(), lab[..., 1:].copy()


def merge_lab(lightness, ab):
    """Recombine a lightness map and an ab map into a Lab image."""
    lightness = np.asarray(lightness)
    ab = np.asarray(ab)
    if ab.ndim != 3 or ab.shape[-1] != 2:
        raise ValueError(f"expected an (H, W, 2) ab map, got shape {ab.shape}")
    if lightness.shape != ab.shape[:2]:
        raise ValueError(
            f"lightness shape {lightness.shape} does not match ab shape {ab.shape[:2]}"
        )
    return np.concatenate([lightness[..., None], ab], axis=-1)


def _check_suffix(path):
    path = Path(path)
    if path.suffix.lower() not in SUPPORTED_SUFFIXES:
        raise ValueError(
            f"unsupported image format {path.suffix!r}; use one of {SUPPORTED_SUFFIXES}"
        )
    return path


def load_image(path):
    """Read a PNG or JPEG file as an (H, W, 3) uint8 sRGB array.

    Greyscale files are expanded to three identical channels.
    """
    path = _check_suffix(path)
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def save_image(path, rgb):
    """Write an (H, W, 3) uint8 array as PNG or JPEG."""
    path = _check_suffix(path)
    rgb = np.asarray(rgb)
    if rgb.dtype != np.uint8:
        raise ValueError("save_image expects a uint8 array")
    Image.fromarray(rgb, mode="RGB").save(path)


def load_mask(path):
    """Read a mask PNG as a boolean (H, W) array (nonzero means inside)."""
    path = _check_suffix(path)
    with Image.open(path) as img:
        return np.asarray(img.convert("L")) > 127


def save_mask(path, mask):
    """Write a boolean (H, W) array as an 8-bit mask PNG."""
    path = _check_suffix(path)
    arr = (np.asarray(mask, dtype=bool) * np.uint8(255))
    Image.fromarray(arr, mode="L").save(path)
