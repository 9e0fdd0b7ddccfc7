"""K-nearest-neighbor regression with cross-validated K.

Exhaustive Euclidean scan; distance ties broken toward the lower stored
index so predictions are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset

DEFAULT_K_GRID = (1, 2, 3, 5, 8, 13, 21, 34, 50)


@dataclass(frozen=True)
class KnnModel:
    x: np.ndarray
    y: np.ndarray
    k: int

    def __post_init__(self):
        if not 1 <= self.k <= self.x.shape[0]:
            raise ValueError(f"k={self.k} outside [1, {self.x.shape[0]}]")

    def predict(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.x.shape[1],):
            raise ValueError(
                f"query has shape {x.shape}, stored dimension is {self.x.shape[1]}")
        return float(self.predict_batch(x[None])[0])

    def predict_batch(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if xs.ndim != 2 or xs.shape[1] != self.x.shape[1]:
            raise ValueError(
                f"queries have shape {xs.shape}, stored dimension is {self.x.shape[1]}")
        return _knn_mean(self.x, self.y, xs, self.k)


def _knn_mean(train_x, train_y, queries, k, chunk=1024):
    out = np.empty(queries.shape[0])
    for start in range(0, queries.shape[0], chunk):
        q = queries[start:start + chunk]
        d2 = ((q[:, None, :] - train_x[None, :, :]) ** 2).sum(axis=2)
        # stable sort = ties resolved toward the lower stored index
        order = np.argsort(d2, axis=1, kind="stable")[:, :k]
        out[start:start + chunk] = train_y[order].mean(axis=1)
    return out


def fit(proper_train: Dataset, k_grid=DEFAULT_K_GRID, folds: int = 5,
        seed: int = 0) -> KnnModel:
    """Select k by K-fold cross-validation (MSE), ties toward smaller k."""
    n = proper_train.n
    if folds < 2 or n < folds:
        raise ValueError(f"need n >= folds >= 2, got n={n}, folds={folds}")
    grid = sorted(set(int(k) for k in k_grid))
    if not grid:
        raise ValueError("empty k grid")
    if grid[0] < 1:
        raise ValueError(f"k must be positive, got {grid[0]}")

    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    fold_ids = np.arange(n) % folds  # applied to the permuted order
    min_train = min(int((fold_ids != f).sum()) for f in range(folds))
    if grid[-1] > min_train:
        raise ValueError(
            f"grid k={grid[-1]} exceeds the smallest CV training part ({min_train})")

    if len(grid) == 1:
        return KnnModel(proper_train.x.copy(), proper_train.y.copy(), grid[0])

    sq_errors = {k: [] for k in grid}
    for f in range(folds):
        val_idx = perm[fold_ids == f]
        tr_idx = perm[fold_ids != f]
        tx, ty = proper_train.x[tr_idx], proper_train.y[tr_idx]
        d2 = ((proper_train.x[val_idx][:, None, :] - tx[None, :, :]) ** 2).sum(axis=2)
        order = np.argsort(d2, axis=1, kind="stable")
        neigh_y = ty[order]
        cum = np.cumsum(neigh_y, axis=1)
        for k in grid:
            pred = cum[:, k - 1] / k
            sq_errors[k].append((pred - proper_train.y[val_idx]) ** 2)
    mse = {k: float(np.concatenate(sq_errors[k]).mean()) for k in grid}
    best_k = min(grid, key=lambda k: (mse[k], k))
    return KnnModel(proper_train.x.copy(), proper_train.y.copy(), best_k)
