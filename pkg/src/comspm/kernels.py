"""Histogram intersection, spatial pyramid and combined kernels.

Gram matrices are assembled row by row: every entry is produced by the same
row-reduction routine whatever the worker count, so results are bitwise
reproducible, and square Gram matrices are mirrored from the upper triangle.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .pyramid import PyramidHistogram, level_weight

DESCRIPTOR_TAGS = ("lbp", "tplbp", "combined")

# columns per reduction call; fixed so the work partition never depends on workers
_BLOCK = 256


@dataclass(frozen=True)
class CombineConfig:
    lam: float = 0.3

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")


@dataclass
class GramMatrix:
    """Kernel values between row samples and column samples.

    For a training Gram the rows and columns are the same samples; for a
    test kernel rows are test samples and columns training samples.
    """

    values: np.ndarray
    tag: str
    row_labels: Optional[np.ndarray] = None
    col_labels: Optional[np.ndarray] = None
    lam: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.tag not in DESCRIPTOR_TAGS:
            raise ValueError(f"unknown descriptor tag {self.tag!r}")
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("Gram values must be a 2-D array")
        n, m = self.values.shape
        if self.row_labels is not None:
            self.row_labels = np.asarray(self.row_labels, dtype=np.int64)
            if self.row_labels.shape != (n,):
                raise ValueError("row label count does not match the Gram rows")
        if self.col_labels is not None:
            self.col_labels = np.asarray(self.col_labels, dtype=np.int64)
            if self.col_labels.shape != (m,):
                raise ValueError("column label count does not match the Gram columns")

    @property
    def shape(self):
        return self.values.shape

    @property
    def is_square(self) -> bool:
        return self.values.shape[0] == self.values.shape[1]

    def is_symmetric(self) -> bool:
        return self.is_square and bool(np.array_equal(self.values, self.values.T))

    def submatrix(self, rows, cols) -> "GramMatrix":
        rows = np.asarray(rows)
        cols = np.asarray(cols)
        return GramMatrix(
            self.values[np.ix_(rows, cols)], self.tag,
            None if self.row_labels is None else self.row_labels[rows],
            None if self.col_labels is None else self.col_labels[cols],
            self.lam, dict(self.meta))


def intersection(h1, h2) -> float:
    """``sum(min(h1, h2))`` over two equal-length non-negative vectors."""
    h1 = np.asarray(h1, dtype=np.float64)
    h2 = np.asarray(h2, dtype=np.float64)
    if h1.shape != h2.shape:
        raise ValueError(f"histogram lengths differ: {h1.shape} vs {h2.shape}")
    return float(np.minimum(h1, h2).sum())


def _check_same_config(p1: PyramidHistogram, p2: PyramidHistogram):
    if p1.config != p2.config:
        raise ValueError(f"pyramid configs differ: {p1.config} vs {p2.config}")


def spm_kernel(p1: PyramidHistogram, p2: PyramidHistogram) -> float:
    """Pyramid match kernel as one intersection of the weighted vectors."""
    _check_same_config(p1, p2)
    return intersection(p1.to_weighted().values, p2.to_weighted().values)


def spm_kernel_levels(p1: PyramidHistogram, p2: PyramidHistogram) -> float:
    """Pyramid match kernel as the explicit weighted sum over levels and cells."""
    _check_same_config(p1, p2)
    u1, u2 = p1.unweighted(), p2.unweighted()
    L = p1.config.L
    total = 0.0
    for l in range(L + 1):
        w = level_weight(l, L)
        b1, b2 = u1.level_blocks(l), u2.level_blocks(l)
        for j in range(b1.shape[0]):
            total += w * float(np.minimum(b1[j], b2[j]).sum())
    return total


def combined_kernel(kl, kt, cfg: CombineConfig = CombineConfig()):
    """``lam * kl + (1 - lam) * kt``; works on scalars and arrays alike."""
    return cfg.lam * kl + (1.0 - cfg.lam) * kt


def stack(pyramids: Sequence[PyramidHistogram]) -> np.ndarray:
    """Stack weighted pyramid vectors into a C-contiguous matrix."""
    if not pyramids:
        raise ValueError("no pyramids given")
    cfg = pyramids[0].config
    for p in pyramids:
        if p.config != cfg:
            raise ValueError("all pyramids must share one configuration")
    return np.ascontiguousarray(np.stack([p.to_weighted().values for p in pyramids]))


def _row_intersections(x: np.ndarray, Y: np.ndarray) -> np.ndarray:
    out = np.empty(Y.shape[0])
    for start in range(0, Y.shape[0], _BLOCK):
        out[start:start + _BLOCK] = np.minimum(x, Y[start:start + _BLOCK]).sum(axis=1)
    return out


def intersection_gram(A: np.ndarray, B: Optional[np.ndarray] = None, workers: int = 1) -> np.ndarray:
    """Intersection kernel between the rows of ``A`` and ``B``.

    With ``B`` omitted the square Gram of ``A`` is built from the upper
    triangle and mirrored, so it is exactly symmetric.
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    square = B is None
    B = A if square else np.ascontiguousarray(B, dtype=np.float64)
    if A.shape[1] != B.shape[1]:
        raise ValueError("row vectors of A and B differ in length")
    n, m = A.shape[0], B.shape[0]
    K = np.empty((n, m))

    def row(i):
        if square:
            K[i, i:] = _row_intersections(A[i], B[i:])
        else:
            K[i, :] = _row_intersections(A[i], B)

    if workers <= 1:
        for i in range(n):
            row(i)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(row, range(n)))
    if square:
        iu = np.triu_indices(n, 1)
        K[iu[1], iu[0]] = K[iu]
    return K


def gram(pyramids_a, pyramids_b=None, combine: Optional[CombineConfig] = None,
         workers: int = 1, tag: Optional[str] = None,
         labels_a=None, labels_b=None) -> GramMatrix:
    """Gram matrix of pyramid kernels.

    Without ``combine`` each argument is a list of pyramids of one
    descriptor.  With ``combine`` each argument is a pair
    ``(lbp_pyramids, tplbp_pyramids)`` and the result is the convex
    combination of the two descriptor Grams.  Omitting ``pyramids_b``
    gives the square training Gram.
    """
    if combine is None:
        Ka = stack(pyramids_a)
        Kb = None if pyramids_b is None else stack(pyramids_b)
        if Kb is not None and pyramids_a[0].config != pyramids_b[0].config:
            raise ValueError("pyramid configs differ between the two sets")
        values = intersection_gram(Ka, Kb, workers)
        return GramMatrix(values, tag or "lbp", labels_a,
                          labels_a if pyramids_b is None else labels_b)

    lbp_a, tp_a = pyramids_a
    lbp_b, tp_b = (None, None) if pyramids_b is None else pyramids_b
    if len(lbp_a) != len(tp_a) or (lbp_b is not None and len(lbp_b) != len(tp_b)):
        raise ValueError("LBP and TPLBP pyramid lists must be parallel")
    k_lbp = gram(lbp_a, lbp_b, workers=workers).values
    k_tp = gram(tp_a, tp_b, workers=workers).values
    return GramMatrix(combined_kernel(k_lbp, k_tp, combine), "combined", labels_a,
                      labels_a if pyramids_b is None else labels_b, lam=combine.lam)


def combine_grams(k_lbp: GramMatrix, k_tplbp: GramMatrix, cfg: CombineConfig) -> GramMatrix:
    """Convex combination of two descriptor Grams over the same samples."""
    if k_lbp.shape != k_tplbp.shape:
        raise ValueError("Gram shapes differ")
    return GramMatrix(combined_kernel(k_lbp.values, k_tplbp.values, cfg), "combined",
                      k_lbp.row_labels, k_lbp.col_labels, lam=cfg.lam)
