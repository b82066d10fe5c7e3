"""One-vs-rest SVM trained by SMO on a precomputed kernel matrix.

The binary solver follows the usual dual formulation

    min  1/2 a^T Q a - e^T a,   Q_ij = y_i y_j K_ij,
    s.t. 0 <= a_i <= C,  y^T a = 0,

selecting at every step the pair that violates the KKT conditions most and
solving the two-variable subproblem analytically.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .kernels import GramMatrix

logger = logging.getLogger(__name__)

_TAU = 1e-12


@dataclass(frozen=True)
class SvmConfig:
    C: float = 10.0
    tol: float = 1e-3
    max_iter: int = 0  # 0 selects max(10_000_000, 100 * n)

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError("C must be > 0")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.max_iter < 0:
            raise ValueError("max_iter must be >= 0")


@dataclass
class BinarySolution:
    alpha: np.ndarray
    bias: float
    gradient: np.ndarray
    iterations: int
    gap: float


def _violating_pair(alpha, y, G, C):
    yG = -y * G
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y < 0) & (alpha < C)) | ((y > 0) & (alpha > 0))
    up_vals = np.where(up, yG, -np.inf)
    low_vals = np.where(low, yG, np.inf)
    i = int(np.argmax(up_vals))
    j = int(np.argmin(low_vals))
    return i, j, up_vals[i] - low_vals[j]


def _bias(alpha, y, G, C) -> float:
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = yG[free].mean()
    else:
        at_upper = alpha >= C
        # bounded variables only constrain rho to an interval; take its midpoint
        ub_mask = (at_upper & (y < 0)) | (~at_upper & (y > 0))
        lb_mask = ~ub_mask
        ub = yG[ub_mask].min() if ub_mask.any() else np.inf
        lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
        rho = (ub + lb) / 2.0 if np.isfinite(ub) and np.isfinite(lb) else (
            ub if np.isfinite(ub) else lb)
    return float(-rho)


def solve_binary(K: np.ndarray, y: np.ndarray, C: float = 10.0, tol: float = 1e-3,
                 max_iter: int = 0) -> BinarySolution:
    """SMO on a precomputed kernel with labels ``y`` in {-1, +1}."""
    K = np.asarray(K, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    if K.shape != (n, n):
        raise ValueError(f"kernel shape {K.shape} does not match {n} labels")
    if not np.all(np.abs(y) == 1):
        raise ValueError("labels must be +1 or -1")
    if max_iter == 0:
        max_iter = max(10_000_000, 100 * n)

    diag = np.diag(K).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)
    it = 0
    gap = np.inf
    while it < max_iter:
        i, j, gap = _violating_pair(alpha, y, G, C)
        if gap < tol:
            break
        it += 1
        Ki, Kj = K[i], K[j]
        old_i, old_j = alpha[i], alpha[j]
        quad = diag[i] + diag[j] - 2.0 * Ki[j]
        if quad <= 0:
            quad = _TAU
        if y[i] != y[j]:
            delta = (-G[i] - G[j]) / quad
            diff = old_i - old_j
            ai, aj = old_i + delta, old_j + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
                if ai > C:
                    ai, aj = C, C - diff
            else:
                if ai < 0:
                    ai, aj = 0.0, -diff
                if aj > C:
                    aj, ai = C, C + diff
        else:
            delta = (G[i] - G[j]) / quad
            total = old_i + old_j
            ai, aj = old_i - delta, old_j + delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
                if aj > C:
                    aj, ai = C, total - C
            else:
                if aj < 0:
                    aj, ai = 0.0, total
                if ai < 0:
                    ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        G += y * (y[i] * (ai - old_i) * Ki + y[j] * (aj - old_j) * Kj)
    else:
        warnings.warn(f"SMO stopped at the iteration cap ({max_iter}) with gap {gap:.3g}",
                      RuntimeWarning, stacklevel=2)
    return BinarySolution(alpha, _bias(alpha, y, G, C), G, it, float(gap))


def kkt_violation(K, y, alpha, C) -> float:
    """Largest violation ``max_up(-y G) - min_low(-y G)`` at ``alpha`` (<= 0 is optimal)."""
    K = np.asarray(K, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    G = y * (K @ (alpha * y)) - 1.0
    return float(_violating_pair(np.asarray(alpha), y, G, C)[2])


@dataclass
class SvmModel:
    """Per-class dual coefficients ``alpha_i * y_i`` on their support indices."""

    classes: np.ndarray
    support: list
    coef: list
    bias: np.ndarray
    train_labels: np.ndarray
    config: SvmConfig = field(default_factory=SvmConfig)

    @property
    def n_train(self) -> int:
        return int(self.train_labels.shape[0])

    def dense_coef(self) -> np.ndarray:
        out = np.zeros((len(self.classes), self.n_train))
        for k, (idx, c) in enumerate(zip(self.support, self.coef)):
            out[k, idx] = c
        return out

    def decision_function(self, K_test) -> np.ndarray:
        K_test = np.asarray(K_test.values if isinstance(K_test, GramMatrix) else K_test,
                            dtype=np.float64)
        if K_test.ndim != 2 or K_test.shape[1] != self.n_train:
            raise ValueError(f"test kernel has shape {K_test.shape}, "
                             f"model expects {self.n_train} columns")
        return K_test @ self.dense_coef().T + self.bias[None, :]


def train(gram: GramMatrix, cfg: SvmConfig = SvmConfig()) -> SvmModel:
    """One binary SVM per class (class vs. rest) on a square training Gram."""
    if not gram.is_square:
        raise ValueError("training needs a square Gram matrix")
    if not gram.is_symmetric():
        raise ValueError("training Gram matrix is not symmetric")
    if gram.row_labels is None:
        raise ValueError("training Gram matrix carries no labels")
    labels = gram.row_labels
    classes = np.unique(labels)
    if classes.size < 2:
        raise ValueError("need at least two classes to train")

    support, coef, bias = [], [], []
    for c in classes:
        y = np.where(labels == c, 1.0, -1.0)
        sol = solve_binary(gram.values, y, cfg.C, cfg.tol, cfg.max_iter)
        idx = np.flatnonzero(sol.alpha > 0)
        support.append(idx)
        coef.append(sol.alpha[idx] * y[idx])
        bias.append(sol.bias)
        logger.debug("class %d: %d support vectors, %d iterations, gap %.2e",
                     c, idx.size, sol.iterations, sol.gap)
    return SvmModel(classes, support, coef, np.array(bias), labels.copy(), cfg)


def decide(model: SvmModel, test_gram) -> np.ndarray:
    """Predicted class ids; ties go to the lowest class id."""
    scores = model.decision_function(test_gram)
    return model.classes[np.argmax(scores, axis=1)]


def confusion_matrix(true, pred, n_classes: int) -> np.ndarray:
    """Row-normalised confusion matrix in percent (row = true class)."""
    counts = np.zeros((n_classes, n_classes))
    np.add.at(counts, (np.asarray(true), np.asarray(pred)), 1.0)
    totals = counts.sum(axis=1, keepdims=True)
    return np.divide(100.0 * counts, totals, out=np.zeros_like(counts), where=totals > 0)
