"""LBP and Three-Patch LBP code images.

Both operators use replicate (clamp-to-edge) sampling outside the image so
the code image has exactly the source dimensions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imageio import save_pgm

# (dy, dx) clockwise from the top-left neighbour; neighbour i sets bit i.
LBP_OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))

_SCALE2 = 255.0 * 255.0


@dataclass(frozen=True)
class LbpConfig:
    neighbors: int = 8
    radius: int = 1

    def __post_init__(self):
        if (self.neighbors, self.radius) != (8, 1):
            raise ValueError("only the 8-neighbour, radius-1 operator is supported")

    @property
    def channels(self) -> int:
        return 1 << self.neighbors


@dataclass(frozen=True)
class TplbpConfig:
    """Parameters of the three-patch code.

    :param S: number of patches on the ring (bits per code)
    :param w: side of the square patches, odd
    :param alpha: offset along the ring between the two compared patches
    :param r: ring radius in pixels
    :param tau: threshold on the distance difference
    """

    S: int = 8
    w: int = 3
    alpha: int = 2
    r: int = 2
    tau: float = 0.01

    def __post_init__(self):
        if self.S < 2:
            raise ValueError("S must be >= 2")
        if self.w < 1 or self.w % 2 == 0:
            raise ValueError("w must be a positive odd integer")
        if not 1 <= self.alpha < self.S:
            raise ValueError("alpha must satisfy 1 <= alpha < S")
        if self.r < 1:
            raise ValueError("r must be >= 1")
        if not self.tau > 0:
            raise ValueError("tau must be > 0")

    @property
    def channels(self) -> int:
        return 1 << self.S


@dataclass(frozen=True)
class CodeImage:
    codes: np.ndarray
    channels: int

    @property
    def height(self) -> int:
        return self.codes.shape[0]

    @property
    def width(self) -> int:
        return self.codes.shape[1]

    def histogram(self) -> np.ndarray:
        return np.bincount(self.codes.ravel(), minlength=self.channels)

    def save_pgm(self, path) -> None:
        """Write the codes as intensities, as a visual debug aid (S <= 8)."""
        if self.channels > 256:
            raise ValueError("PGM export needs codes that fit in 8 bits")
        save_pgm(path, self.codes.astype(np.uint8))


def _check_image(img) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 2 or img.size == 0:
        raise ValueError(f"expected a non-empty 2-D gray image, got shape {img.shape}")
    return img


def _code_dtype(bits: int):
    return np.uint8 if bits <= 8 else np.uint16 if bits <= 16 else np.int64


def lbp_code_image(img, cfg: LbpConfig = LbpConfig()) -> CodeImage:
    """8-bit LBP: bit i is set iff neighbour i is >= the centre."""
    img = _check_image(img)
    h, w = img.shape
    pad = np.pad(img, 1, mode="edge")
    codes = np.zeros((h, w), dtype=np.uint8)
    for bit, (dy, dx) in enumerate(LBP_OFFSETS):
        neighbour = pad[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
        codes |= (neighbour >= img).astype(np.uint8) << bit
    return CodeImage(codes, cfg.channels)


def ring_offsets(S: int, r: int) -> list[tuple[int, int]]:
    """Integer ``(dy, dx)`` offsets of the S ring patch centres.

    Patch i sits at angle 2*pi*i/S measured counter-clockwise from the +x
    axis (image y grows downwards); centres are rounded to the nearest pixel.
    """
    offsets = []
    for i in range(S):
        theta = 2.0 * math.pi * i / S
        dx = math.floor(r * math.cos(theta) + 0.5)
        dy = math.floor(-r * math.sin(theta) + 0.5)
        offsets.append((dy, dx))
    return offsets


def threshold(x, tau: float):
    """1 where ``x >= tau``, else 0."""
    return (np.asarray(x) >= tau).astype(np.uint8)


def patch_distance(a, b) -> float:
    """Sum of squared differences between two patches scaled to [0, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"patch shapes differ: {a.shape} vs {b.shape}")
    return float(np.sum((a / 255.0 - b / 255.0) ** 2))


def _box_sum(a, w):
    """Sum over every w x w window of ``a`` (valid region only)."""
    c = np.zeros((a.shape[0] + 1, a.shape[1] + 1), dtype=np.int64)
    np.cumsum(np.cumsum(a, axis=0), axis=1, out=c[1:, 1:])
    return c[w:, w:] - c[:-w, w:] - c[w:, :-w] + c[:-w, :-w]


def ring_distances(img, cfg: TplbpConfig) -> np.ndarray:
    """Integer SSD between each ring patch and the central patch.

    Returns an ``(S, H, W)`` int64 array; divide by 255**2 to obtain the
    distances on [0, 1]-scaled intensities.
    """
    img = _check_image(img)
    h, w = img.shape
    half = cfg.w // 2
    pad_by = cfg.r + half
    pad = np.pad(img.astype(np.int64), pad_by, mode="edge")
    # diff images are evaluated over the centres' patch footprint [-half, H+half)
    eh, ew = h + 2 * half, w + 2 * half
    base = pad[cfg.r:cfg.r + eh, cfg.r:cfg.r + ew]
    out = np.empty((cfg.S, h, w), dtype=np.int64)
    for i, (dy, dx) in enumerate(ring_offsets(cfg.S, cfg.r)):
        shifted = pad[cfg.r + dy:cfg.r + dy + eh, cfg.r + dx:cfg.r + dx + ew]
        diff = shifted - base
        out[i] = _box_sum(diff * diff, cfg.w)
    return out


def tplbp_code_image(img, cfg: TplbpConfig = TplbpConfig()) -> CodeImage:
    """Three-patch LBP code image.

    Bit i is ``f(d(C_i, C_p) - d(C_{(i+alpha) mod S}, C_p))`` with
    ``f(x) = [x >= tau]`` and ``d`` the scaled SSD of :func:`patch_distance`.
    All S bits ``i = 0..S-1`` are emitted, so codes span ``[0, 2**S)``.
    """
    dist = ring_distances(img, cfg)
    codes = np.zeros(dist.shape[1:], dtype=np.int64)
    for i in range(cfg.S):
        j = (i + cfg.alpha) % cfg.S
        delta = (dist[i] - dist[j]) / _SCALE2
        codes |= threshold(delta, cfg.tau).astype(np.int64) << i
    return CodeImage(codes.astype(_code_dtype(cfg.S)), cfg.channels)
