"""Minibatch training with early stopping, and the multi-run protocol."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import knn
from .conformal import evaluate
from .data import DEFAULT_FRACTIONS, Dataset, SplitSpec, split
from .network import AdamState, LocalizerNet, adam_step
from .objective import LossBatch, erc_error_fit_loss, loss_batch, pairwise_size_loss
from .transforms import TRAINABLE_KINDS, FixedTransform, make_family

CLI_FAMILIES = ("fixed", "erc", "erc-fit", "linear", "exp", "sigma")


@dataclass(frozen=True)
class TrainConfig:
    family: str
    seed: int = 0
    epochs: int = 200
    batch_size: int = 16
    learning_rate: float = 1e-3
    patience: int = 20
    gamma: float = 1e-2

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass
class TrainTrace:
    """Per-epoch train/validation losses; epoch 0 is the initialization."""

    epochs: list = field(default_factory=list)  # (epoch, train_loss, val_loss)
    best_epoch: int = 0

    def best_val_loss(self) -> float:
        return min(v for _, _, v in self.epochs)


class TrainingDiverged(RuntimeError):
    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


def _scores(predict, ds: Dataset) -> np.ndarray:
    preds = np.asarray(predict(ds.x), dtype=float)
    return (preds - ds.y) ** 2


def _batches(n, batch_size, rng):
    perm = rng.permutation(n)
    for start in range(0, n, batch_size):
        idx = perm[start:start + batch_size]
        if idx.size >= 2:  # pair terms need at least two elements
            yield idx


def _loop(fam, step_fn, config, cp_x, cp_a, val_x, val_a):
    """Shared epoch loop: minibatch updates, validation, best-epoch snapshot."""
    net = fam.localizer
    trace = TrainTrace()
    if config.epochs == 0:
        return fam, trace
    rng = np.random.default_rng(config.seed)
    state = AdamState.init(net, learning_rate=config.learning_rate)

    best_val = pairwise_size_loss(fam, val_x, val_a)
    best_snap = net.snapshot()
    trace.epochs.append((0, None, best_val))  # init: no training loss yet
    trace.best_epoch = 0

    for epoch in range(1, config.epochs + 1):
        epoch_losses = []
        for idx in _batches(cp_x.shape[0], config.batch_size, rng):
            batch = LossBatch(cp_x[idx], cp_a[idx])
            try:
                loss = step_fn(batch)
                if not np.isfinite(loss.value):
                    raise ValueError("loss is not finite")
                adam_step(net, loss.grads, state)
            except ValueError as exc:
                # blown-up parameters surface as NaN losses, NaN gradients,
                # or degenerate (underflowed) transformed scores
                raise TrainingDiverged(
                    f"training diverged at epoch {epoch}: {exc}",
                    trace) from exc
            epoch_losses.append(loss.value)
        val_loss = pairwise_size_loss(fam, val_x, val_a)
        trace.epochs.append((epoch, float(np.mean(epoch_losses)), val_loss))
        if val_loss < best_val:
            best_val = val_loss
            best_snap = net.snapshot()
            trace.best_epoch = epoch
        elif epoch - trace.best_epoch >= config.patience:
            break
    net.restore(best_snap)
    return fam, trace


def train(config: TrainConfig, cp_train: Dataset, validation: Dataset,
          predict):
    """Train a transform family by minimizing the pairwise size loss.

    Returns the family frozen at the epoch with the best validation loss,
    plus the training trace.
    """
    if config.family not in TRAINABLE_KINDS:
        raise ValueError(f"family '{config.family}' is not trainable")
    if cp_train.n < config.batch_size:
        raise ValueError("training set smaller than one batch")
    net = LocalizerNet.init(cp_train.d, config.seed)
    fam = make_family(config.family, localizer=net, gamma=config.gamma)
    cp_a = _scores(predict, cp_train)
    val_a = _scores(predict, validation)
    return _loop(fam, lambda b: loss_batch(fam, b), config,
                 cp_train.x, cp_a, validation.x, val_a)


def train_erc_error_fit(config: TrainConfig, cp_train: Dataset,
                        validation: Dataset, predict):
    """Train the residual-reweighting family by fitting g to the squared
    residuals instead of minimizing interval size; early stopping still
    selects the epoch with the best validation size loss."""
    if cp_train.n < config.batch_size:
        raise ValueError("training set smaller than one batch")
    net = LocalizerNet.init(cp_train.d, config.seed)
    fam = make_family("erc", localizer=net, gamma=config.gamma)
    cp_a = _scores(predict, cp_train)
    val_a = _scores(predict, validation)
    return _loop(fam, lambda b: erc_error_fit_loss(net, b), config,
                 cp_train.x, cp_a, validation.x, val_a)


@dataclass(frozen=True)
class ProtocolRow:
    dataset: str
    family: str
    alpha: float
    run_seed: int
    mean_size: float
    validity: float


@dataclass(frozen=True)
class ProtocolAggregate:
    family: str
    alpha: float
    size_mean: float
    size_sd: float
    validity_mean: float
    validity_sd: float


@dataclass(frozen=True)
class ProtocolResult:
    rows: list
    aggregates: list
    knn_ks: dict  # run_seed -> selected k


def _fit_family(name, config_base, proper_model, cp_train, validation):
    predict = proper_model.predict_batch
    if name == "fixed":
        return FixedTransform()
    if name == "erc-fit":
        fam, _ = train_erc_error_fit(config_base("erc"), cp_train, validation,
                                     predict)
        return fam
    fam, _ = train(config_base(name), cp_train, validation, predict)
    return fam


def run_protocol(dataset: Dataset, families, alphas, runs: int = 5,
                 seed0: int = 0, fractions=DEFAULT_FRACTIONS,
                 epochs: int = 200, batch_size: int = 16,
                 learning_rate: float = 1e-3, patience: int = 20,
                 gamma: float = 1e-2, k_grid=knn.DEFAULT_K_GRID,
                 folds: int = 5, dataset_name: str = "data") -> ProtocolResult:
    """Repeat split / point-model fit / family training / evaluation.

    Run r uses seed0 + r for the split, the point model's cross-validation,
    and the family training. Aggregates report mean and population sd over
    runs for every (family, alpha) cell.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    unknown = [f for f in families if f not in CLI_FAMILIES]
    if unknown:
        raise ValueError(f"unknown families {unknown}; choose from {CLI_FAMILIES}")
    rows = []
    knn_ks = {}
    for r in range(runs):
        run_seed = seed0 + r
        proper, cp_train, validation, test = split(
            dataset, SplitSpec(run_seed, fractions))
        grid = [k for k in k_grid if k <= proper.n]
        model = knn.fit(proper, grid, folds=folds, seed=run_seed)
        knn_ks[run_seed] = model.k

        def config_base(kind, _seed=run_seed):
            return TrainConfig(family=kind, seed=_seed, epochs=epochs,
                               batch_size=batch_size,
                               learning_rate=learning_rate,
                               patience=patience, gamma=gamma)

        for name in families:
            fam = _fit_family(name, config_base, model, cp_train, validation)
            for report in evaluate(fam, model.predict_batch, cp_train, test,
                                   alphas):
                rows.append(ProtocolRow(dataset_name, name, report.alpha,
                                        run_seed, report.mean_size,
                                        report.empirical_validity))
    aggregates = []
    for name in families:
        for alpha in alphas:
            cell = [row for row in rows
                    if row.family == name and row.alpha == float(alpha)]
            sizes = np.asarray([c.mean_size for c in cell])
            vals = np.asarray([c.validity for c in cell])
            aggregates.append(ProtocolAggregate(
                name, float(alpha), float(sizes.mean()), float(sizes.std()),
                float(vals.mean()), float(vals.std())))
    return ProtocolResult(rows, aggregates, knn_ks)
