"""Locally adaptive conformal prediction via trainable monotone score maps.

The library calibrates split conformal prediction intervals on transformed
squared-residual scores B = phi_x(A), where the attribute-dependent,
strictly monotone transformation phi is parameterized by a small network
and trained to shrink the average interval size while keeping the marginal
coverage guarantee intact.
"""

__version__ = "0.1.0"

from .conformal import (CalibrationRecord, EvalReport, PredictionInterval,
                        base_score, calibrate, calibration_records, evaluate,
                        interval, quantile_index)
from .data import (DEFAULT_FRACTIONS, Dataset, IngestionError,
                   NormalizationStats, Sample, SplitSpec, apply_normalization,
                   compute_stats, denormalize, load_csv, normalize, split,
                   split_indices)
from .knn import DEFAULT_K_GRID, KnnModel
from .knn import fit as fit_knn
from .network import AdamState, LocalizerNet, StaleTapeError, Tape, adam_step
from .objective import (LossBatch, LossValue, erc_error_fit_loss, loss_batch,
                        loss_pair_term, pairwise_size_loss)
from .serialize import ModelBundle, load_model, save_model
from .synthetic import SynthData, SynthSpec, amplitude, generate
from .training import (CLI_FAMILIES, ProtocolAggregate, ProtocolResult,
                       ProtocolRow, TrainConfig, TrainTrace, TrainingDiverged,
                       run_protocol, train, train_erc_error_fit)
from .transforms import (TRAINABLE_KINDS, AdditiveFixture,
                         AdditiveLogRepairFixture, CodomainError, ErcTransform,
                         ExpTransform, FixedTransform, LinearTransform,
                         LogShiftTransform, NoRootError, SigmaTransform,
                         SqrtShiftFixture, TransformFamily, make_family,
                         numeric_inverse)

__all__ = [name for name in dir() if not name.startswith("_")]
