"""Multi-task learning on tabular data.

Small numpy-only toolkit: shared-trunk multi-head networks trained with
Adam, a cleaning/imputation/encoding pipeline for raw CSV tables, seeded
k-fold cross-validation and grid search, gradient-based feature
attribution, and a synthetic generator with tunable outcome correlation.
"""

__version__ = "0.1.0"

from .attrib import AttributionReport, grad_cam_features, top_k
from .dataset import (
    ColumnDescriptor,
    Dataset,
    FoldPlan,
    NormalizationStats,
    OutcomeVector,
    RawTable,
    clean,
    kfold_split,
    load_csv,
    load_schema,
    mice_impute,
    preprocess_pipeline,
    save_schema,
    select_task,
    subset_rows,
    transform,
)
from .errors import ConfigError, DataError, NumericalError, TabmtlError
from .metrics import classification_metrics, confusion_counts, f1_score, mse_metric, roc_auc
from .network import (
    HeadSpec,
    LossWeights,
    ModelState,
    NetworkTopology,
    backward,
    forward,
    init_params,
    input_gradients,
    load_model,
    loss_cls,
    loss_mtl,
    loss_reg,
    n_parameters,
    predict,
    save_model,
)
from .optim import ScheduleConfig, adam_step, cosine_lr, init_adam
from .synth import GroundTruth, SynthConfig, generate, oracle_bayes_metrics
from .train import (
    CvReport,
    GridSearchResult,
    SearchSpace,
    TrainConfig,
    TrainResult,
    cross_validate,
    evaluate,
    grid_search,
    train_model,
)

__all__ = [
    "__version__",
    "AttributionReport", "grad_cam_features", "top_k",
    "ColumnDescriptor", "Dataset", "FoldPlan", "NormalizationStats",
    "OutcomeVector", "RawTable", "clean", "kfold_split", "load_csv",
    "load_schema", "mice_impute", "preprocess_pipeline", "save_schema",
    "select_task", "subset_rows", "transform",
    "ConfigError", "DataError", "NumericalError", "TabmtlError",
    "classification_metrics", "confusion_counts", "f1_score", "mse_metric",
    "roc_auc",
    "HeadSpec", "LossWeights", "ModelState", "NetworkTopology", "backward",
    "forward", "init_params", "input_gradients", "load_model", "loss_cls",
    "loss_mtl", "loss_reg", "n_parameters", "predict", "save_model",
    "ScheduleConfig", "adam_step", "cosine_lr", "init_adam",
    "GroundTruth", "SynthConfig", "generate", "oracle_bayes_metrics",
    "CvReport", "GridSearchResult", "SearchSpace", "TrainConfig",
    "TrainResult", "cross_validate", "evaluate", "grid_search", "train_model",
]
