"""Synthetic tabular data with controllably correlated outcomes.

Three tasks share one latent structure: each task's noise-free score blends a
shared direction with a task-specific direction, s_j = rho * (w_shared . x)
+ (1 - rho) * (w_j . x) + eps. Two tasks threshold their scores into binary
labels, the third keeps the raw score as a regression target. rho = 1 makes
the tasks rank-identical up to noise; rho = 0 makes their signal directions
orthogonal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import (
    CLASSIFICATION,
    REGRESSION,
    Dataset,
    NormalizationStats,
    OutcomeVector,
)
from .errors import ConfigError, DataError

TASK_NAMES = ("task_a", "task_b", "task_c")
TASK_KINDS = (CLASSIFICATION, CLASSIFICATION, REGRESSION)
N_TASKS = 3


@dataclass(frozen=True)
class SynthConfig:
    n_samples: int = 200
    n_features: int = 30
    n_informative: int = 5
    rho: float = 0.8
    noise_std: float = 0.8
    class_balance: float = 0.5
    missing_frac: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 4:
            raise ConfigError(f"n_samples must be >= 4, got {self.n_samples}")
        if self.n_informative < 3:
            # orthogonal task directions for 3 tasks need at least 3 dimensions
            raise ConfigError(f"n_informative must be >= 3, got {self.n_informative}")
        if self.n_features < self.n_informative:
            raise ConfigError(
                f"n_features={self.n_features} < n_informative={self.n_informative}"
            )
        if not 0.0 <= self.rho <= 1.0:
            raise ConfigError(f"rho must be in [0, 1], got {self.rho}")
        if self.noise_std < 0.0:
            raise ConfigError(f"noise_std must be >= 0, got {self.noise_std}")
        if not 0.0 < self.class_balance < 1.0:
            raise ConfigError(f"class_balance must be in (0, 1), got {self.class_balance}")
        if not 0.0 <= self.missing_frac < 1.0:
            raise ConfigError(f"missing_frac must be in [0, 1), got {self.missing_frac}")

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "n_features": self.n_features,
            "n_informative": self.n_informative,
            "rho": self.rho,
            "noise_std": self.noise_std,
            "class_balance": self.class_balance,
            "missing_frac": self.missing_frac,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        return cls(**d)


@dataclass(frozen=True)
class GroundTruth:
    """The generating weights and thresholds, kept for oracle checks."""

    config: SynthConfig
    shared_weights: np.ndarray
    task_weights: np.ndarray
    thresholds: dict[str, float]

    def __post_init__(self):
        shared = np.asarray(self.shared_weights, dtype=np.float64)
        tasks = np.asarray(self.task_weights, dtype=np.float64)
        if shared.shape != (self.config.n_features,):
            raise ConfigError("shared_weights shape does not match n_features")
        if tasks.shape != (self.config.n_features, N_TASKS):
            raise ConfigError("task_weights must be (n_features, 3)")
        shared.setflags(write=False)
        tasks.setflags(write=False)
        object.__setattr__(self, "shared_weights", shared)
        object.__setattr__(self, "task_weights", tasks)

    @property
    def informative_indices(self) -> tuple[int, ...]:
        return tuple(range(self.config.n_informative))

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "shared_weights": self.shared_weights.tolist(),
            "task_weights": self.task_weights.tolist(),
            "thresholds": dict(self.thresholds),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        return cls(
            SynthConfig.from_dict(d["config"]),
            np.asarray(d["shared_weights"], dtype=np.float64),
            np.asarray(d["task_weights"], dtype=np.float64),
            {k: float(v) for k, v in d["thresholds"].items()},
        )


def save_truth(truth: GroundTruth, path: str | Path) -> None:
    Path(path).write_text(json.dumps(truth.to_dict(), indent=2) + "\n")


def load_truth(path: str | Path) -> GroundTruth:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return GroundTruth.from_dict(doc)


def _draw_weights(rng: np.random.Generator, config: SynthConfig) -> tuple[np.ndarray, np.ndarray]:
    d, m = config.n_features, config.n_informative
    gauss = rng.standard_normal((m, N_TASKS + 1))
    q = np.linalg.qr(gauss)[0]
    shared = np.zeros(d)
    tasks = np.zeros((d, N_TASKS))
    if m >= N_TASKS + 1:
        shared[:m] = q[:, 0]
        tasks[:m, :] = q[:, 1 : N_TASKS + 1]
    else:
        # m == 3: the informative subspace only fits the 3 task directions,
        # so the shared direction is a random unit vector inside it
        tasks[:m, :] = q[:, :N_TASKS]
        extra = rng.standard_normal(m)
        shared[:m] = extra / np.linalg.norm(extra)
    return shared, tasks


def clean_scores(truth: GroundTruth, features: np.ndarray) -> np.ndarray:
    """Noise-free task scores (n, 3) for the given feature rows."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != truth.config.n_features:
        raise DataError(
            f"features must be (n, {truth.config.n_features}), got {x.shape}"
        )
    if np.isnan(x).any():
        raise DataError("features contain missing values; oracle scores need complete rows")
    rho = truth.config.rho
    shared_part = x @ truth.shared_weights
    task_part = x @ truth.task_weights
    return rho * shared_part[:, None] + (1.0 - rho) * task_part


def generate(config: SynthConfig) -> tuple[Dataset, GroundTruth]:
    """Draw a synthetic dataset and its generating ground truth.

    A single PRNG seeded with ``config.seed`` is consumed in a fixed order:
    weight directions, then the feature matrix, then the noise matrix, then
    the missingness mask. The task directions are orthonormal columns (QR of
    a Gaussian draw) supported on the first ``n_informative`` coordinates;
    when the informative block has room the shared direction is orthonormal
    to all of them. Binary labels threshold each score at its empirical
    (1 - class_balance) quantile. ``missing_frac`` masks an exact count of
    feature cells, round(frac * n * d), chosen uniformly without replacement
    and set to NaN; outcomes are never masked.
    """
    rng = np.random.default_rng(config.seed)
    shared, task_w = _draw_weights(rng, config)
    n, d = config.n_samples, config.n_features
    features = rng.standard_normal((n, d))
    noise = rng.standard_normal((n, N_TASKS)) * config.noise_std

    truth_scores = (
        config.rho * (features @ shared)[:, None]
        + (1.0 - config.rho) * (features @ task_w)
    )
    scores = truth_scores + noise

    thresholds: dict[str, float] = {}
    outcomes = []
    for j, (name, kind) in enumerate(zip(TASK_NAMES, TASK_KINDS)):
        if kind == CLASSIFICATION:
            thr = float(np.quantile(scores[:, j], 1.0 - config.class_balance))
            labels = (scores[:, j] > thr).astype(np.int64)
            if labels.min() == labels.max():
                raise DataError(
                    f"{name}: all labels identical; adjust class_balance or noise_std"
                )
            thresholds[name] = thr
            outcomes.append(OutcomeVector(name, CLASSIFICATION, labels, 2))
        else:
            outcomes.append(OutcomeVector(name, REGRESSION, scores[:, j]))

    if config.missing_frac > 0.0:
        n_mask = int(round(config.missing_frac * n * d))
        flat = rng.choice(n * d, size=n_mask, replace=False)
        features = features.copy()
        features[np.unravel_index(flat, (n, d))] = np.nan

    width = len(str(d - 1))
    names = tuple(f"x{i:0{width}d}" for i in range(d))
    dataset = Dataset(features, names, tuple(outcomes), NormalizationStats.identity(d))
    truth = GroundTruth(config, shared, task_w, thresholds)
    return dataset, truth


def oracle_bayes_metrics(truth: GroundTruth, dataset: Dataset) -> dict:
    """Metrics an oracle scoring with the true noise-free signal would get.

    For the binary tasks this is the AUC (and thresholded F1) of the clean
    score against the realized labels; for the regression task it is the MSE
    of the clean score, i.e. the realized noise power. Trained models cannot
    beat these except by luck.
    """
    from .metrics import confusion_counts, f1_score, roc_auc

    if dataset.n_tasks != N_TASKS or dataset.task_names() != TASK_NAMES:
        raise DataError(f"expected tasks {TASK_NAMES}, got {dataset.task_names()}")
    scores = clean_scores(truth, dataset.raw_features())
    tasks: dict[str, dict] = {}
    for j, (name, kind) in enumerate(zip(TASK_NAMES, TASK_KINDS)):
        outcome = dataset.outcomes[j]
        if kind == CLASSIFICATION:
            preds = (scores[:, j] > truth.thresholds[name]).astype(np.int64)
            tasks[name] = {
                "f1": f1_score(confusion_counts(preds, outcome.values)),
                "auc": roc_auc(scores[:, j], outcome.values),
            }
        else:
            residual = scores[:, j] - outcome.values
            tasks[name] = {"mse": float(np.mean(residual * residual))}
    return {"tasks": tasks}
