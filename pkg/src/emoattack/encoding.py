"""Genotype layouts and decode paths for perturbation patterns.

Two encodings are supported:

* direct -- one signed intensity delta per block per channel, applied
  uniformly over each block's pixels;
* DCT -- a small set of 8x8 frequency-coefficient alteration patterns
  plus one continuous selector variable per image block choosing which
  pattern (or none) perturbs that block's brightness component.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.fft import dctn, idctn

from .imaging import Image, rgb_to_luma


class ConfigurationError(ValueError):
    """Raised for inconsistent encoding/optimizer configuration."""


def dct_dims(width: int, height: int, n_patterns: int, dct_block: int = 8) -> int:
    """Total design-variable count of the DCT encoding."""
    if min(width, height, n_patterns, dct_block) <= 0:
        raise ConfigurationError("dct_dims arguments must be positive")
    n_blocks = math.ceil(width / dct_block) * math.ceil(height / dct_block)
    return dct_block * dct_block * n_patterns + n_blocks


def forward_dct_block(block: np.ndarray) -> np.ndarray:
    """Orthonormal type-II 2D-DCT of a square block."""
    block = np.asarray(block, dtype=np.float64)
    if block.shape[-1] != block.shape[-2] or block.shape[-1] < 2:
        raise ValueError("block must be square with side >= 2")
    return dctn(block, type=2, norm="ortho", axes=(-2, -1))


def inverse_dct_block(coeffs: np.ndarray) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=np.float64)
    return idctn(coeffs, type=2, norm="ortho", axes=(-2, -1))


class DirectEncoding:
    """Per-block intensity perturbation genotype.

    With channels=3 every RGB channel of a block gets its own delta;
    with channels=1 the genotype holds a single brightness delta per
    block which decodes to an equal delta on all image channels.
    """

    kind = "direct"

    def __init__(self, width, height, channels=3, block_size=1,
                 bounds=(-200.0, 200.0), image_channels=None):
        if block_size < 1:
            raise ConfigurationError("block_size must be >= 1")
        if channels not in (1, 3):
            raise ConfigurationError("channels must be 1 or 3")
        lo, hi = float(bounds[0]), float(bounds[1])
        if not (lo < hi and math.isfinite(lo) and math.isfinite(hi)):
            raise ConfigurationError("bounds must be finite with lo < hi")
        self.width = int(width)
        self.height = int(height)
        self.channels = channels
        self.block_size = int(block_size)
        self.bounds = (lo, hi)
        self.image_channels = channels if image_channels is None else image_channels
        self.blocks_y = math.ceil(self.height / self.block_size)
        self.blocks_x = math.ceil(self.width / self.block_size)

    @property
    def length(self) -> int:
        return self.blocks_y * self.blocks_x * self.channels

    @property
    def lower(self) -> np.ndarray:
        return np.full(self.length, self.bounds[0])

    @property
    def upper(self) -> np.ndarray:
        return np.full(self.length, self.bounds[1])

    def decode(self, genotype: np.ndarray, clean: Image | None = None) -> np.ndarray:
        genotype = np.asarray(genotype, dtype=np.float64)
        if genotype.shape != (self.length,):
            raise ValueError(
                f"genotype length {genotype.shape} != expected ({self.length},)"
            )
        blocks = genotype.reshape(self.blocks_y, self.blocks_x, self.channels)
        full = np.repeat(np.repeat(blocks, self.block_size, axis=0),
                         self.block_size, axis=1)
        plane = full[: self.height, : self.width, :]
        if self.channels == 1 and self.image_channels == 3:
            plane = np.repeat(plane, 3, axis=2)
        return plane


class DctEncoding:
    """Frequency-domain perturbation genotype.

    Layout: the first ceil(W/B)*ceil(H/B) variables are per-block
    pattern selectors in [0, n_patterns + 1); the remaining
    n_patterns * B * B variables are the coefficient alteration
    patterns, each bounded by +-coeff_bound.  A selector flooring to 0
    leaves the block's coefficients unchanged.
    """

    kind = "dct"

    def __init__(self, width, height, n_patterns, dct_block=8,
                 coeff_bound=30.0, image_channels=3):
        if n_patterns < 1:
            raise ConfigurationError("n_patterns must be >= 1")
        if dct_block < 2:
            raise ConfigurationError("dct_block must be >= 2")
        self.width = int(width)
        self.height = int(height)
        self.n_patterns = int(n_patterns)
        self.dct_block = int(dct_block)
        self.coeff_bound = float(coeff_bound)
        self.image_channels = image_channels
        self.blocks_y = math.ceil(self.height / self.dct_block)
        self.blocks_x = math.ceil(self.width / self.dct_block)
        self.n_blocks = self.blocks_y * self.blocks_x

    @property
    def length(self) -> int:
        return self.n_blocks + self.n_patterns * self.dct_block ** 2

    @property
    def lower(self) -> np.ndarray:
        lo = np.zeros(self.length)
        lo[self.n_blocks:] = -self.coeff_bound
        return lo

    @property
    def upper(self) -> np.ndarray:
        hi = np.empty(self.length)
        # keep floor(selector) <= n_patterns even at the bound
        hi[: self.n_blocks] = self.n_patterns + 1 - 1e-9
        hi[self.n_blocks:] = self.coeff_bound
        return hi

    def selectors(self, genotype: np.ndarray) -> np.ndarray:
        raw = np.floor(genotype[: self.n_blocks]).astype(np.int64)
        return np.clip(raw, 0, self.n_patterns).reshape(self.blocks_y, self.blocks_x)

    def patterns(self, genotype: np.ndarray) -> np.ndarray:
        return genotype[self.n_blocks:].reshape(
            self.n_patterns, self.dct_block, self.dct_block
        )

    def decode(self, genotype: np.ndarray, clean: Image) -> np.ndarray:
        genotype = np.asarray(genotype, dtype=np.float64)
        if genotype.shape != (self.length,):
            raise ValueError(
                f"genotype length {genotype.shape} != expected ({self.length},)"
            )
        if (clean.width, clean.height) != (self.width, self.height):
            raise ValueError("clean image dimensions inconsistent with encoding")
        b = self.dct_block
        luma = rgb_to_luma(clean) if clean.channels == 3 else clean
        plane = luma.data[:, :, 0]
        pad_y = self.blocks_y * b - self.height
        pad_x = self.blocks_x * b - self.width
        padded = np.pad(plane, ((0, pad_y), (0, pad_x)), mode="edge")

        blocks = (
            padded.reshape(self.blocks_y, b, self.blocks_x, b)
            .transpose(0, 2, 1, 3)
        )
        coeffs = forward_dct_block(blocks)
        sel = self.selectors(genotype)
        pats = self.patterns(genotype)
        active = sel > 0
        coeffs[active] += pats[sel[active] - 1]
        rec = inverse_dct_block(coeffs)
        rec_plane = rec.transpose(0, 2, 1, 3).reshape(
            self.blocks_y * b, self.blocks_x * b
        )
        # codec behaves like a real pipeline: integer output intensities
        rec_plane = np.clip(np.rint(rec_plane), 0.0, 255.0)
        delta = rec_plane[: self.height, : self.width] - plane
        return np.repeat(delta[:, :, np.newaxis], clean.channels, axis=2)
