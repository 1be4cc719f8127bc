"""Image container, PPM I/O, rotation, and intensity-space helpers.

All images are held as float64 arrays of shape (height, width, channels)
with intensities on the continuous 0..255 scale.  Quantization only
happens at file boundaries (nearest integer, ties to even).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ImageFormatError(ValueError):
    """Raised for malformed or unsupported image files."""


@dataclass
class Image:
    """A width x height x channels raster with intensities in [0, 255]."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ValueError(f"expected (H, W, 1|3) array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image intensities must be finite")
        self.data = arr

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def copy(self) -> "Image":
        return Image(self.data.copy())


def clamp(data: np.ndarray) -> np.ndarray:
    return np.clip(data, 0.0, 255.0)


def quantize(data: np.ndarray) -> np.ndarray:
    """Nearest-integer quantization, ties to even, as uint8."""
    return np.rint(clamp(data)).astype(np.uint8)


def apply_perturbation(clean: Image, rho: np.ndarray) -> Image:
    """Pixelwise clean + rho, clamped into the valid intensity range."""
    rho = np.asarray(rho, dtype=np.float64)
    if rho.shape != clean.data.shape:
        raise ValueError(
            f"perturbation shape {rho.shape} != image shape {clean.data.shape}"
        )
    return Image(clamp(clean.data + rho))


def rgb_to_luma(image: Image) -> Image:
    """BT.601 luma plane of a 3-channel image."""
    if image.channels != 3:
        raise ValueError("rgb_to_luma requires a 3-channel image")
    y = (
        0.299 * image.data[:, :, 0]
        + 0.587 * image.data[:, :, 1]
        + 0.114 * image.data[:, :, 2]
    )
    return Image(y[:, :, np.newaxis])


def add_luma_delta(image: Image, delta_plane: np.ndarray) -> Image:
    """Add a brightness delta equally to every channel, then clamp."""
    delta = np.asarray(delta_plane, dtype=np.float64)
    if delta.ndim == 3 and delta.shape[2] == 1:
        delta = delta[:, :, 0]
    if delta.shape != (image.height, image.width):
        raise ValueError("delta plane dimensions do not match the image")
    return Image(clamp(image.data + delta[:, :, np.newaxis]))


def rotate(image: Image, angle: float) -> Image:
    """Rotate about the image center with bilinear interpolation.

    Samples falling outside the source frame contribute intensity 0
    (black fill).  Output dimensions are unchanged.
    """
    if abs(angle) > 180.0:
        raise ValueError("rotation angle must lie in [-180, 180] degrees")
    if angle == 0.0:
        return image.copy()
    h, w = image.height, image.width
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    theta = math.radians(angle)
    cos_t, sin_t = math.cos(theta), math.sin(theta)

    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    dx, dy = xx - cx, yy - cy
    # inverse map: where does each output pixel sample the source?
    sx = cos_t * dx + sin_t * dy + cx
    sy = -sin_t * dx + cos_t * dy + cy

    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    fx, fy = sx - x0, sy - y0

    out = np.zeros_like(image.data)
    for (iy, ix, wgt) in (
        (y0, x0, (1 - fx) * (1 - fy)),
        (y0, x0 + 1, fx * (1 - fy)),
        (y0 + 1, x0, (1 - fx) * fy),
        (y0 + 1, x0 + 1, fx * fy),
    ):
        valid = (iy >= 0) & (iy < h) & (ix >= 0) & (ix < w)
        iyc = np.where(valid, iy, 0)
        ixc = np.where(valid, ix, 0)
        sample = image.data[iyc, ixc, :] * valid[:, :, np.newaxis]
        out += wgt[:, :, np.newaxis] * sample
    return Image(out)


def perturbation_to_visual(rho: np.ndarray) -> Image:
    """Grayscale rendering of a perturbation: mid-gray is zero delta."""
    rho = np.asarray(rho, dtype=np.float64)
    if rho.ndim == 3:
        plane = rho.mean(axis=2)
    else:
        plane = rho
    peak = np.abs(plane).max()
    scale = 127.0 / peak if peak > 0 else 0.0
    return Image(clamp(128.0 + plane * scale)[:, :, np.newaxis])


def _read_ppm_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    # skip whitespace and '#' comments
    n = len(buf)
    while pos < n:
        c = buf[pos : pos + 1]
        if c == b"#":
            while pos < n and buf[pos : pos + 1] != b"\n":
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not buf[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise ImageFormatError("truncated PPM header")
    return buf[start:pos], pos


def read_ppm(path) -> Image:
    buf = Path(path).read_bytes()
    if not buf.startswith(b"P6"):
        raise ImageFormatError("not a P6 PPM file")
    pos = 2
    fields = []
    for _ in range(3):
        tok, pos = _read_ppm_token(buf, pos)
        try:
            fields.append(int(tok))
        except ValueError as exc:
            raise ImageFormatError(f"bad PPM header field {tok!r}") from exc
    width, height, maxval = fields
    if maxval != 255:
        raise ImageFormatError(f"unsupported PPM maxval {maxval} (only 255)")
    pos += 1  # single whitespace after maxval
    raster = buf[pos : pos + width * height * 3]
    if len(raster) != width * height * 3:
        raise ImageFormatError("PPM raster shorter than header promises")
    arr = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3)
    return Image(arr.astype(np.float64))


def write_ppm(image: Image, path) -> None:
    if image.channels == 1:
        data = np.repeat(image.data, 3, axis=2)
    else:
        data = image.data
    raster = quantize(data).tobytes()
    header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + raster)


def read_image(path) -> Image:
    path = Path(path)
    if path.suffix.lower() == ".ppm":
        return read_ppm(path)
    if path.suffix.lower() == ".png":
        from PIL import Image as PilImage

        with PilImage.open(path) as img:
            if img.mode not in ("L", "RGB"):
                img = img.convert("RGB")
            return Image(np.asarray(img, dtype=np.float64))
    raise ImageFormatError(f"unsupported image format: {path.suffix}")


def write_image(image: Image, path) -> None:
    path = Path(path)
    if path.suffix.lower() == ".ppm":
        write_ppm(image, path)
        return
    if path.suffix.lower() == ".png":
        from PIL import Image as PilImage

        arr = quantize(image.data)
        if arr.shape[2] == 1:
            pil = PilImage.fromarray(arr[:, :, 0], mode="L")
        else:
            pil = PilImage.fromarray(arr, mode="RGB")
        pil.save(path)
        return
    raise ImageFormatError(f"unsupported image format: {path.suffix}")
