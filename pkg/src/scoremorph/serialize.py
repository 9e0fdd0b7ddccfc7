"""Model-file serialization: family, localizer, normalization, split recipe.

A model file is self-contained given the original data file: it stores the
split seed/fractions and the selected K so the point predictor and the
calibration scores can be reconstructed deterministically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .data import NormalizationStats, SplitSpec
from .ioutil import write_text_atomic
from .network import LocalizerNet
from .transforms import TransformFamily, make_family

MODEL_FORMAT_VERSION = 1

# CLI label -> transform kind ("erc-fit" is a training mode of erc)
_LABEL_TO_KIND = {"fixed": "fixed", "erc": "erc", "erc-fit": "erc",
                  "linear": "linear", "exp": "exp", "sigma": "sigma"}


@dataclass(frozen=True)
class ModelBundle:
    label: str
    family: TransformFamily
    stats: NormalizationStats
    knn_k: int
    split: SplitSpec


def model_to_dict(label: str, family: TransformFamily,
                  stats: NormalizationStats, knn_k: int,
                  split: SplitSpec) -> dict:
    if label not in _LABEL_TO_KIND:
        raise ValueError(f"unknown family label '{label}'")
    cfg = family.config_dict()
    localizer = getattr(family, "localizer", None)
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "family": label,
        "gamma": cfg.get("gamma"),
        "epsilon_floor": cfg["epsilon_floor"],
        "localizer": localizer.to_json_dict() if localizer is not None else None,
        "normalization_stats": stats.to_json_dict(),
        "knn_k": int(knn_k),
        "split": {"seed": int(split.seed), "fractions": list(split.fractions)},
    }


def model_from_dict(doc: dict) -> ModelBundle:
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format_version {version}")
    label = doc["family"]
    kind = _LABEL_TO_KIND.get(label)
    if kind is None:
        raise ValueError(f"unknown family label '{label}'")
    localizer = None
    if doc.get("localizer") is not None:
        localizer = LocalizerNet.from_json_dict(doc["localizer"])
    kwargs = {"epsilon_floor": doc["epsilon_floor"]}
    if kind == "erc":
        kwargs["gamma"] = doc["gamma"]
    family = make_family(kind, localizer=localizer, **kwargs)
    stats = NormalizationStats.from_json_dict(doc["normalization_stats"])
    split = SplitSpec(doc["split"]["seed"], tuple(doc["split"]["fractions"]))
    return ModelBundle(label, family, stats, int(doc["knn_k"]), split)


def save_model(path, label, family, stats, knn_k, split) -> None:
    doc = model_to_dict(label, family, stats, knn_k, split)
    text = json.dumps(doc, indent=1, sort_keys=True)
    write_text_atomic(path, text + "\n")


def load_model(path) -> ModelBundle:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
