"""Spatial pyramid histograms over code images.

Level ``l`` splits the image into a ``2**l x 2**l`` grid.  The pyramid vector
is ordered by level, then grid cell (row-major), then channel, and each
level block is scaled by its matching weight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .descriptors import CodeImage


@dataclass(frozen=True)
class PyramidConfig:
    L: int = 2
    M: int = 256
    normalize: bool = True

    def __post_init__(self):
        if self.L < 0:
            raise ValueError("L must be >= 0")
        if self.M < 1:
            raise ValueError("M must be >= 1")

    @property
    def n_cells(self) -> int:
        return sum(4 ** l for l in range(self.L + 1))

    @property
    def length(self) -> int:
        return self.M * self.n_cells

    def level_slice(self, l: int) -> slice:
        start = self.M * sum(4 ** k for k in range(l))
        return slice(start, start + self.M * 4 ** l)


def level_weight(l: int, L: int) -> float:
    """Weight of every grid at level ``l`` of an ``L``-level pyramid.

    ``1 / 2**L`` for the whole-image level, ``1 / 2**(L - l + 1)`` otherwise.
    """
    if not 0 <= l <= L:
        raise ValueError(f"level {l} outside [0, {L}]")
    if l == 0:
        return 1.0 / 2 ** L
    return 1.0 / 2 ** (L - l + 1)


def level_weights(L: int) -> np.ndarray:
    return np.array([level_weight(l, L) for l in range(L + 1)])


def _splits(n: int, parts: int) -> list[int]:
    return [(k * n) // parts for k in range(parts + 1)]


def grid_bounds(width: int, height: int, l: int):
    """Cell rectangles ``(x0, x1, y0, y1)`` of level ``l``, row-major.

    Boundaries fall at ``floor(k * W / 2**l)`` so the cells tile the image
    exactly even when the size is not divisible.
    """
    parts = 2 ** l
    if width < parts or height < parts:
        raise ValueError(f"image too small for level {l}: "
                         f"{width}x{height} < {parts}x{parts}")
    xs, ys = _splits(width, parts), _splits(height, parts)
    return [(xs[jx], xs[jx + 1], ys[jy], ys[jy + 1])
            for jy in range(parts) for jx in range(parts)]


@dataclass(frozen=True)
class PyramidHistogram:
    config: PyramidConfig
    values: np.ndarray
    weighted: bool = True

    def __post_init__(self):
        if self.values.shape != (self.config.length,):
            raise ValueError(f"pyramid vector has shape {self.values.shape}, "
                             f"expected ({self.config.length},)")

    def _rescale(self, invert: bool) -> np.ndarray:
        out = self.values.copy()
        for l, wl in enumerate(level_weights(self.config.L)):
            out[self.config.level_slice(l)] *= (1.0 / wl) if invert else wl
        return out

    def unweighted(self) -> "PyramidHistogram":
        if not self.weighted:
            return self
        return PyramidHistogram(self.config, self._rescale(invert=True), weighted=False)

    def to_weighted(self) -> "PyramidHistogram":
        if self.weighted:
            return self
        return PyramidHistogram(self.config, self._rescale(invert=False), weighted=True)

    def level_blocks(self, l: int) -> np.ndarray:
        """View of level ``l`` as a ``(4**l, M)`` array of cell histograms."""
        return self.values[self.config.level_slice(l)].reshape(4 ** l, self.config.M)


def level_counts(codes: np.ndarray, M: int, L: int) -> list[np.ndarray]:
    """Integer cell histograms per level, each shaped ``(4**l, M)``.

    Counts are taken once at the finest level and summed upwards; the floor
    boundaries nest, so children tile their parent exactly.
    """
    h, w = codes.shape
    parts = 2 ** L
    grid_bounds(w, h, L)  # size check
    ys = np.searchsorted(_splits(h, parts), np.arange(h), side="right") - 1
    xs = np.searchsorted(_splits(w, parts), np.arange(w), side="right") - 1
    cell = ys[:, None] * parts + xs[None, :]
    flat = cell.ravel() * M + codes.ravel().astype(np.int64)
    finest = np.bincount(flat, minlength=parts * parts * M).reshape(parts, parts, M)

    levels = [finest]
    for _ in range(L):
        f = levels[0]
        levels.insert(0, f[0::2, 0::2] + f[1::2, 0::2] + f[0::2, 1::2] + f[1::2, 1::2])
    return [lv.reshape(-1, M) for lv in levels]


def build_pyramid(code: CodeImage, cfg: PyramidConfig = PyramidConfig()) -> PyramidHistogram:
    """Weighted, concatenated spatial-pyramid histogram of a code image."""
    if code.channels != cfg.M:
        raise ValueError(f"code image has {code.channels} channels, pyramid expects {cfg.M}")
    counts = level_counts(code.codes, cfg.M, cfg.L)
    total = code.width * code.height
    blocks = []
    for l, c in enumerate(counts):
        block = c.ravel().astype(np.float64)
        if cfg.normalize:
            block /= total
        blocks.append(block * level_weight(l, cfg.L))
    return PyramidHistogram(cfg, np.concatenate(blocks), weighted=True)
