"""Image loading, dataset ingestion and seeded train/test splitting.

Images are represented as 2-D ``numpy.uint8`` arrays of shape
``(height, width)``.  Datasets follow the ``<root>/<class_name>/<image>``
layout used by the scene and object benchmarks.
"""

from __future__ import annotations

import json
import logging
import os
import re
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".pgm", ".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".ppm")

PRNG_NAME = "splitmix64/fisher-yates"
PRNG_VERSION = 1

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


class ImageFormatError(ValueError):
    """The file is not in a supported raster format."""


class ImageDecodeError(ValueError):
    """The file claims a supported format but cannot be decoded."""


class DatasetError(ValueError):
    """The dataset directory does not have the expected layout."""


# ---------------------------------------------------------------------------
# grayscale conversion and loading
# ---------------------------------------------------------------------------

def rgb_to_gray(rgb):
    """BT.601 luma with round-half-up, computed in exact integer arithmetic.

    ``gray = floor((299 R + 587 G + 114 B + 500) / 1000)``
    """
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) array, got shape {rgb.shape}")
    c = rgb.astype(np.int64)
    luma = (299 * c[..., 0] + 587 * c[..., 1] + 114 * c[..., 2] + 500) // 1000
    return luma.astype(np.uint8)


def to_gray(array) -> np.ndarray:
    """Convert a 2-D gray or 3-D RGB(A) uint8 array to a gray image."""
    array = np.asarray(array)
    if array.ndim == 2:
        return _as_uint8(array)
    if array.ndim == 3 and array.shape[2] in (3, 4):
        return rgb_to_gray(array[..., :3])
    raise ValueError(f"cannot interpret array of shape {array.shape} as an image")


def _as_uint8(array):
    if array.dtype == np.uint8:
        return array
    if array.min() < 0 or array.max() > 255:
        raise ValueError("intensities must lie in [0, 255]")
    return array.astype(np.uint8)


_PNM_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _read_pgm(raw: bytes, path) -> np.ndarray:
    magic = raw[:2]
    pos = 2
    header = []
    while len(header) < 3:
        m = _PNM_TOKEN.match(raw, pos)
        if m is None:
            raise ImageDecodeError(f"{path}: truncated PGM header")
        header.append(m.group(1))
        pos = m.end()
    try:
        width, height, maxval = (int(t) for t in header)
    except ValueError:
        raise ImageDecodeError(f"{path}: malformed PGM header") from None
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise ImageDecodeError(f"{path}: invalid PGM dimensions or maxval")
    count = width * height

    if magic == b"P5":
        pos += 1  # single whitespace byte after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
        nbytes = count * dtype.itemsize
        if len(raw) - pos < nbytes:
            raise ImageDecodeError(f"{path}: truncated PGM raster "
                                   f"({len(raw) - pos} of {nbytes} bytes)")
        values = np.frombuffer(raw, dtype=dtype, count=count, offset=pos).astype(np.int64)
    else:
        tokens = raw[pos:].split()
        if len(tokens) < count:
            raise ImageDecodeError(f"{path}: truncated PGM raster "
                                   f"({len(tokens)} of {count} samples)")
        try:
            values = np.array([int(t) for t in tokens[:count]], dtype=np.int64)
        except ValueError:
            raise ImageDecodeError(f"{path}: non-integer sample in PGM raster") from None
    if values.max(initial=0) > maxval:
        raise ImageDecodeError(f"{path}: sample exceeds maxval {maxval}")
    if maxval != 255:
        values = (values * 255 + maxval // 2) // maxval
    return values.reshape(height, width).astype(np.uint8)


def load_gray(path) -> np.ndarray:
    """Load a raster file as a ``(height, width)`` uint8 gray image.

    Binary and ASCII PGM are parsed directly; PNG and the other formats
    Pillow understands go through Pillow.  Colour images are converted with
    :func:`rgb_to_gray`.

    :raises ImageFormatError: unsupported or unrecognised format
    :raises ImageDecodeError: truncated or corrupt file
    """
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] in (b"P2", b"P5"):
        return _read_pgm(raw, path)

    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("L", "1"):
                return np.asarray(im.convert("L"), dtype=np.uint8).copy()
            if mode.startswith("I"):
                arr = np.asarray(im, dtype=np.int64)
                peak = 65535 if arr.max(initial=0) > 255 else 255
                return ((arr * 255 + peak // 2) // peak).astype(np.uint8)
            return rgb_to_gray(np.asarray(im.convert("RGB"), dtype=np.uint8))
    except UnidentifiedImageError:
        raise ImageFormatError(f"{path}: unsupported image format") from None
    except (OSError, SyntaxError) as exc:
        raise ImageDecodeError(f"{path}: {exc}") from None


def save_pgm(path, image) -> None:
    """Write a uint8 2-D array as binary PGM."""
    image = _as_uint8(np.asarray(image))
    h, w = image.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(image).tobytes())


# ---------------------------------------------------------------------------
# dataset index
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DatasetIndex:
    root: str
    classes: tuple[str, ...]
    samples: tuple[tuple[str, int], ...]

    def __post_init__(self):
        labels = {label for _, label in self.samples}
        if labels != set(range(len(self.classes))):
            raise DatasetError("class ids must be dense and every class needs a sample")

    @property
    def paths(self) -> list[str]:
        return [p for p, _ in self.samples]

    @property
    def labels(self) -> np.ndarray:
        return np.array([label for _, label in self.samples], dtype=np.int64)

    def class_members(self, class_id: int) -> list[int]:
        return [i for i, (_, label) in enumerate(self.samples) if label == class_id]

    def to_json(self) -> str:
        return json.dumps({
            "root": self.root,
            "classes": list(self.classes),
            "samples": [{"path": p, "class_id": c} for p, c in self.samples],
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "DatasetIndex":
        data = json.loads(text)
        return cls(root=data["root"], classes=tuple(data["classes"]),
                   samples=tuple((s["path"], int(s["class_id"])) for s in data["samples"]))


def scan_dataset(root) -> DatasetIndex:
    """Index ``root/<class>/<image>``; classes and files sorted lexicographically."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} is not a directory")
    class_dirs = sorted(d.name for d in root.iterdir()
                        if d.is_dir() and not d.name.startswith("."))
    if not class_dirs:
        raise DatasetError(f"no classes found under {root}")

    samples = []
    for class_id, name in enumerate(class_dirs):
        files = sorted(f.name for f in (root / name).iterdir()
                       if f.is_file() and not f.name.startswith(".")
                       and f.suffix.lower() in IMAGE_SUFFIXES)
        if not files:
            raise DatasetError(f"class '{name}' contains no images")
        samples.extend((os.path.join(str(root), name, f), class_id) for f in files)
    return DatasetIndex(root=str(root), classes=tuple(class_dirs), samples=tuple(samples))


# ---------------------------------------------------------------------------
# seeded splitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplitSpec:
    train_per_class: int = 100
    seed: int = 0
    repetitions: int = 10

    def __post_init__(self):
        if self.train_per_class < 1:
            raise ValueError("train_per_class must be >= 1")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not 0 <= self.seed <= _MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")


def _mix64(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return z ^ (z >> 31)


@dataclass
class SplitMix64:
    """SplitMix64 generator (Steele, Lea & Flood); stable across platforms."""

    state: int

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK64
        return _mix64(self.state)

    def below(self, n: int) -> int:
        """Unbiased integer in ``[0, n)`` by rejection."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n


def split_stream(seed: int, repetition: int, class_id: int) -> SplitMix64:
    """Generator keyed by ``(seed, repetition, class_id)``."""
    state = _mix64(seed & _MASK64)
    for word in (repetition, class_id):
        state = _mix64(state ^ _mix64((word + _GAMMA) & _MASK64))
    return SplitMix64(state)


def make_split(index: DatasetIndex, spec: SplitSpec, repetition: int):
    """Return sorted ``(train_ids, test_ids)`` sample indices for one repetition.

    Each class contributes ``spec.train_per_class`` samples drawn without
    replacement to the training set.  Classes that are too small keep one
    sample back for testing and a warning is emitted.
    """
    train, test = [], []
    for class_id, name in enumerate(index.classes):
        members = index.class_members(class_id)
        k = spec.train_per_class
        if len(members) <= k:
            k = len(members) - 1
            warnings.warn(f"class '{name}' has {len(members)} samples, not more than "
                          f"{spec.train_per_class}; training on {k}", stacklevel=2)
        rng = split_stream(spec.seed, repetition, class_id)
        order = list(members)
        # partial Fisher-Yates: the first k slots become the training draw
        for i in range(k):
            j = i + rng.below(len(order) - i)
            order[i], order[j] = order[j], order[i]
        train.extend(order[:k])
        test.extend(order[k:])
    return np.array(sorted(train), dtype=np.int64), np.array(sorted(test), dtype=np.int64)
