"""Training toolkit for joint domain alignment and discriminative
feature learning.

A small numpy MLP is trained on labeled source rows and unlabeled
target rows with a three-part objective: source cross-entropy, a
covariance-alignment penalty between the domains' bottleneck features,
and a discriminative penalty (instance-pair or class-center based) that
pulls same-class source features together.  Every gradient is analytic
and verified against finite differences by the bundled gradcheck suite.
"""

from .datasets import (
    LabeledDataset,
    SyntheticShiftSpec,
    UnlabeledDataset,
    batch_sampler,
    generate_shifted_gaussians,
    generate_shifted_moons,
    load_idx,
    resample_image,
    subsample,
    to_unlabeled,
    write_idx_images,
    write_idx_labels,
)
from .estimator import JDDAClassifier
from .experiment import (
    AggregateCell,
    AggregateResult,
    ExperimentSpec,
    build_datasets,
    compactness_ratio,
    dump_features,
    parse_config,
    run_experiment,
)
from .gradcheck import CheckResult, format_results, run_suite
from .losses import (
    VARIANTS,
    CenterState,
    LossValue,
    LossWeights,
    center_discriminative_loss,
    coral_loss,
    init_centers,
    instance_discriminative_loss,
    joint_loss,
    softmax,
    source_softmax_loss,
    update_centers,
)
from .network import (
    Adam,
    Sgd,
    backward,
    bottleneck_features,
    forward,
    init_params,
    load_params,
    save_params,
)
from .numerics import (
    centered_covariance,
    frobenius_sq,
    masked_sum,
    pairwise_euclidean,
)
from .trainer import (
    EvalRecord,
    RunReport,
    TrainConfig,
    evaluate,
    lambda_schedule,
    report_csv_text,
    report_summary,
    train,
    train_step,
)

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "AggregateCell",
    "AggregateResult",
    "CenterState",
    "CheckResult",
    "EvalRecord",
    "ExperimentSpec",
    "JDDAClassifier",
    "LabeledDataset",
    "LossValue",
    "LossWeights",
    "RunReport",
    "Sgd",
    "SyntheticShiftSpec",
    "TrainConfig",
    "UnlabeledDataset",
    "VARIANTS",
    "backward",
    "batch_sampler",
    "bottleneck_features",
    "build_datasets",
    "center_discriminative_loss",
    "centered_covariance",
    "compactness_ratio",
    "coral_loss",
    "dump_features",
    "evaluate",
    "format_results",
    "forward",
    "frobenius_sq",
    "generate_shifted_gaussians",
    "generate_shifted_moons",
    "init_centers",
    "init_params",
    "instance_discriminative_loss",
    "joint_loss",
    "lambda_schedule",
    "load_idx",
    "load_params",
    "masked_sum",
    "pairwise_euclidean",
    "parse_config",
    "report_csv_text",
    "report_summary",
    "resample_image",
    "run_experiment",
    "run_suite",
    "save_params",
    "softmax",
    "source_softmax_loss",
    "subsample",
    "to_unlabeled",
    "train",
    "train_step",
    "update_centers",
    "write_idx_images",
    "write_idx_labels",
]
