"""Dataset container, CSV ingestion, column normalization, seeded splitting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

# proper-train / cp-train / validation / test
DEFAULT_FRACTIONS = (0.4, 0.4, 0.1, 0.1)

# below this (relative) spread a column is treated as constant
_ZERO_VAR_TOL = 1e-15


class IngestionError(ValueError):
    """A CSV file could not be parsed into a numeric dataset."""


class Sample(NamedTuple):
    x: np.ndarray
    y: float


@dataclass(frozen=True)
class NormalizationStats:
    """Per-column mean and population sd; last entry is the label column.

    Columns flagged in ``zero_variance`` were centered only (their raw sd is
    kept as recorded but treated as 1 when scaling).
    """

    mean: np.ndarray
    sd: np.ndarray
    zero_variance: np.ndarray

    def __post_init__(self):
        for name in ("mean", "sd", "zero_variance"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.mean.shape == self.sd.shape == self.zero_variance.shape):
            raise ValueError("normalization stats column counts disagree")

    def effective_sd(self) -> np.ndarray:
        return np.where(self.zero_variance, 1.0, self.sd)

    def to_json_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "sd": self.sd.tolist(),
            "zero_variance": [bool(f) for f in self.zero_variance],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "NormalizationStats":
        return cls(
            mean=np.asarray(d["mean"], dtype=float),
            sd=np.asarray(d["sd"], dtype=float),
            zero_variance=np.asarray(d["zero_variance"], dtype=bool),
        )


@dataclass(frozen=True)
class Dataset:
    """Immutable (n, d) attribute matrix with scalar labels.

    ``stats`` records the normalization applied to produce this dataset;
    None means the values are raw.
    """

    x: np.ndarray
    y: np.ndarray
    stats: NormalizationStats | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 2:
            raise ValueError(f"x must be 2-D, got shape {x.shape}")
        if y.ndim != 1 or y.shape[0] != x.shape[0]:
            raise ValueError("y must be 1-D with one label per row of x")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
            raise ValueError("dataset contains NaN or infinite values")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def __len__(self) -> int:
        return self.n

    def sample(self, i: int) -> Sample:
        return Sample(self.x[i], float(self.y[i]))

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=int)
        return Dataset(self.x[idx], self.y[idx], self.stats)


@dataclass(frozen=True)
class SplitSpec:
    """Deterministic four-way partition: seed plus fractions summing to 1."""

    seed: int
    fractions: tuple = DEFAULT_FRACTIONS

    def __post_init__(self):
        fr = tuple(float(f) for f in self.fractions)
        if len(fr) != 4:
            raise ValueError("need exactly four fractions "
                             "(proper_train, cp_train, validation, test)")
        if any(f < 0.0 or f > 1.0 for f in fr):
            raise ValueError(f"fractions must lie in [0, 1], got {fr}")
        if abs(sum(fr) - 1.0) > 1e-9:
            raise ValueError(f"fractions must sum to 1, got sum {sum(fr)}")
        object.__setattr__(self, "fractions", fr)


def load_csv(path, has_header: bool = False) -> Dataset:
    """Read a numeric CSV (last column = label) into a raw Dataset.

    Lines starting with '#' are ignored. Raises IngestionError naming the
    offending 1-based line on malformed input.
    """
    rows = []
    ncols = None
    with open(path, "r", encoding="utf-8") as fh:
        header_pending = has_header
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            if header_pending:
                header_pending = False
                continue
            cells = text.split(",")
            if ncols is None:
                ncols = len(cells)
                if ncols < 2:
                    raise IngestionError(
                        f"row {lineno}: need at least 2 columns, got {ncols}")
            elif len(cells) != ncols:
                raise IngestionError(
                    f"row {lineno}: expected {ncols} columns, got {len(cells)}")
            try:
                values = [float(c) for c in cells]
            except ValueError:
                raise IngestionError(
                    f"row {lineno}: non-numeric cell in {cells!r}") from None
            if not all(np.isfinite(v) for v in values):
                raise IngestionError(f"row {lineno}: non-finite value")
            rows.append(values)
    if not rows:
        raise IngestionError("no rows")
    arr = np.asarray(rows, dtype=float)
    return Dataset(arr[:, :-1], arr[:, -1])


def _columns(ds: Dataset) -> np.ndarray:
    return np.column_stack([ds.x, ds.y])


def compute_stats(ds: Dataset) -> NormalizationStats:
    """Per-column mean and population sd over attributes plus label."""
    cols = _columns(ds)
    mean = cols.mean(axis=0)
    sd = cols.std(axis=0)  # population convention (divide by n)
    zero_var = sd <= _ZERO_VAR_TOL * np.maximum(1.0, np.abs(mean))
    return NormalizationStats(mean=mean, sd=sd, zero_variance=zero_var)


def apply_normalization(ds: Dataset, stats: NormalizationStats) -> Dataset:
    if stats.mean.shape[0] != ds.d + 1:
        raise ValueError(
            f"stats have {stats.mean.shape[0]} columns, dataset needs {ds.d + 1}")
    cols = (_columns(ds) - stats.mean) / stats.effective_sd()
    return Dataset(cols[:, :-1], cols[:, -1], stats)


def normalize(ds: Dataset) -> Dataset:
    """Center and scale every column (label included) to mean 0, sd 1.

    Zero-variance columns are centered only and flagged in the stats.
    """
    if ds.n < 2:
        raise ValueError("normalization needs at least 2 samples")
    return apply_normalization(ds, compute_stats(ds))


def denormalize(ds: Dataset) -> Dataset:
    """Undo the normalization recorded in ds.stats."""
    if ds.stats is None:
        raise ValueError("dataset carries no normalization stats")
    cols = _columns(ds) * ds.stats.effective_sd() + ds.stats.mean
    return Dataset(cols[:, :-1], cols[:, -1], None)


def split_indices(n: int, spec: SplitSpec):
    """Shuffled index partition into four parts, deterministic in the seed."""
    rng = np.random.default_rng(spec.seed)
    perm = rng.permutation(n)
    cum = np.cumsum(spec.fractions)
    bounds = [int(np.floor(c * n + 1e-9)) for c in cum]
    bounds[-1] = n
    parts = []
    start = 0
    for b in bounds:
        parts.append(perm[start:b])
        start = b
    for i, p in enumerate(parts):
        if p.size == 0:
            raise ValueError(
                f"fraction {spec.fractions[i]} yields an empty part for n={n}")
    return tuple(parts)


def split(ds: Dataset, spec: SplitSpec):
    """Partition into (proper_train, cp_train, validation, test) Datasets."""
    parts = split_indices(ds.n, spec)
    return tuple(ds.subset(p) for p in parts)
