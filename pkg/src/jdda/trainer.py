"""Mini-batch training of the two-stream shared-weight network.

Each step draws one batch per domain, runs both through the same
parameters, combines the source, alignment and discriminative losses,
and applies one optimizer update.  The alignment weight ramps from 0
toward 1 over the course of training; the discriminative weight stays
fixed.  For the center-based variant the global class centers are
updated every step with their own rate, independently of the network
optimizer.

Target labels are never read here outside evaluate(); the audit test
in tests/test_trainer.py holds the training path to that.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .datasets import LabeledDataset, UnlabeledDataset, batch_sampler
from .losses import (
    VARIANTS,
    LossWeights,
    center_discriminative_loss,
    coral_loss,
    init_centers,
    instance_discriminative_loss,
    joint_loss,
    source_softmax_loss,
    update_centers,
)
from .network import (
    backward,
    bottleneck_features,
    forward,
    init_params,
    make_optimizer,
)

# the alignment weight is the schedule value itself
BASE_LAMBDA1 = 1.0

DEFAULT_LAMBDA2 = {"jdda_instance": 0.03, "jdda_center": 0.01}

REPORT_CSV_VERSION_LINE = "# jdda-report v1"
REPORT_CSV_COLUMNS = ("iteration,source_loss,coral_loss,"
                      "discriminative_loss,lambda1,"
                      "source_accuracy,target_accuracy")


@dataclass
class TrainConfig:
    """Everything one training run depends on.

    ``lambda2`` left as None resolves to the per-variant default
    (0.03 instance, 0.01 center, 0 otherwise).  ``class_count`` left
    as None is taken from the source dataset.
    """

    variant: str = "source_only"
    batch_per_domain: int = 128
    iterations: int = 400
    eta: float = 1e-4
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    lambda2: object = None
    mu: float = 10.0
    gamma: float = 0.5
    alpha: float = 1.0
    beta: float = 1.0
    m1: float = 0.0
    m2: float = 100.0
    eval_interval: int = 50
    seed: int = 0
    hidden_dims: tuple = (32, 8)
    class_count: object = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(
                f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.batch_per_domain < 1:
            raise ValueError("batch_per_domain must be at least 1")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.lambda2 is not None and self.lambda2 < 0:
            raise ValueError("lambda2 must be non-negative")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.eval_interval < 1:
            raise ValueError("eval_interval must be at least 1")
        self.hidden_dims = tuple(int(d) for d in self.hidden_dims)
        if not self.hidden_dims or any(d < 1 for d in self.hidden_dims):
            raise ValueError("hidden_dims must be positive layer sizes")
        if self.class_count is not None and self.class_count < 2:
            raise ValueError("class_count must be at least 2")

    def resolved_lambda2(self):
        if self.lambda2 is not None:
            return float(self.lambda2)
        return DEFAULT_LAMBDA2.get(self.variant, 0.0)

    def step_weights(self, progress):
        """Loss weights at a given schedule position."""
        return LossWeights(
            lambda1=BASE_LAMBDA1 * lambda_schedule(progress, self.mu),
            lambda2=self.resolved_lambda2(),
            alpha=self.alpha,
            beta=self.beta,
            m1=self.m1,
            m2=self.m2,
        )


@dataclass
class EvalRecord:
    iteration: int
    source_loss: float
    coral_loss: float
    discriminative_loss: float
    lambda1: float
    source_accuracy: float
    target_accuracy: float


@dataclass
class RunReport:
    """Eval-point records plus the final summary of one run."""

    records: list = field(default_factory=list)
    final_source_accuracy: float = 0.0
    final_target_accuracy: float = 0.0
    per_class_target_accuracy: dict = field(default_factory=dict)
    total_seconds: float = 0.0
    seconds_per_iteration: float = 0.0


def lambda_schedule(progress, mu=10.0):
    """Alignment-weight ramp: 2 / (1 + exp(-mu * progress)) - 1.

    Exactly 0 at progress 0, approaches 1 as progress reaches 1,
    monotone in between.
    """
    if not 0.0 <= progress <= 1.0:
        raise ValueError(f"progress must lie in [0, 1], got {progress}")
    return 2.0 / (1.0 + math.exp(-mu * progress)) - 1.0


def joint_forward_backward(params, source_features, source_labels,
                           target_features, weights, variant, centers=None):
    """Loss and parameter gradients for one batch pair.

    Both domains run through the same parameters; the source stream
    contributes logit and bottleneck gradients, the target stream only
    bottleneck gradients from the alignment term.  Returns
    (LossValue, gradient dict, source bottleneck features).
    """
    logits, trace_s = forward(params, source_features)
    h_source = trace_s["bottleneck"]
    trace_t = None
    h_target = None
    if variant != "source_only":
        if target_features is None:
            raise ValueError(f"variant {variant} needs a target batch")
        _, trace_t = forward(params, target_features)
        h_target = trace_t["bottleneck"]

    loss = joint_loss(logits, h_source, h_target, source_labels, weights,
                      variant, centers)
    grads = backward(params, trace_s, loss.grads["logits"],
                     d_bottleneck=loss.grads["h_source"])
    if "h_target" in loss.grads:
        target_grads = backward(
            params, trace_t,
            np.zeros((target_features.shape[0], params["layer_dims"][-1])),
            d_bottleneck=loss.grads["h_target"])
        for g, extra in zip(grads["weights"], target_grads["weights"]):
            g += extra
        for g, extra in zip(grads["biases"], target_grads["biases"]):
            g += extra
    return loss, grads, h_source


def train_step(params, optimizer, source_features, source_labels,
               target_features, config, progress, centers=None):
    """One optimizer update plus, for the center variant, one center
    update.  The center update uses the features computed before the
    parameter step and happens even when the optimizer moves nothing
    (the two updates are decoupled).  Returns step metrics.
    """
    weights = config.step_weights(progress)
    if config.variant == "jdda_center":
        if centers is None:
            raise ValueError("jdda_center requires a CenterState")
        if not centers.initialized:
            # first batch seeds the centers before any loss is taken
            update_centers(centers, bottleneck_features(params,
                                                        source_features),
                           source_labels)
    loss, grads, h_source = joint_forward_backward(
        params, source_features, source_labels, target_features, weights,
        config.variant, centers)
    optimizer.step(params, grads)
    if config.variant == "jdda_center":
        update_centers(centers, h_source, source_labels)
    return {
        "loss": loss.value,
        "components": loss.components,
        "lambda1": weights.lambda1,
        "pair_terms": loss.pair_terms,
    }


def evaluate(params, dataset):
    """Argmax accuracy and per-class accuracy on a labeled dataset.

    Target datasets are scored through their held-out labels; a
    dataset without labels cannot be evaluated.  Classes absent from
    the dataset are simply missing from the per-class dict.
    """
    if isinstance(dataset, UnlabeledDataset):
        if not dataset.has_evaluation_labels:
            raise ValueError("dataset has no labels to evaluate against")
        labels = dataset.evaluation_labels()
    else:
        labels = dataset.labels
    logits, _ = forward(params, dataset.features)
    predictions = logits.argmax(axis=1)
    accuracy = float(np.mean(predictions == labels))
    per_class = {}
    for k in np.unique(labels):
        mask = labels == k
        per_class[int(k)] = float(np.mean(predictions[mask] == k))
    return accuracy, per_class


def _component_losses(params, eval_src_x, eval_src_y, eval_tgt_x, weights,
                      variant, centers):
    # raw sub-loss values on the fixed eval slice; inactive terms are 0,
    # as is the center term before the centers exist
    logits, trace = forward(params, eval_src_x)
    h_s = trace["bottleneck"]
    source_value = source_softmax_loss(logits, eval_src_y).value
    coral_value = 0.0
    disc_value = 0.0
    if variant != "source_only":
        h_t = bottleneck_features(params, eval_tgt_x)
        coral_value = coral_loss(h_s, h_t).value
    if variant == "jdda_instance":
        disc_value = instance_discriminative_loss(h_s, eval_src_y,
                                                  weights).value
    elif variant == "jdda_center" and centers is not None \
            and centers.initialized:
        disc_value = center_discriminative_loss(h_s, eval_src_y, centers,
                                                weights).value
    return source_value, coral_value, disc_value


def train(config, source_dataset, target_dataset):
    """Run the full training loop.

    Returns (params, RunReport).  The report records the fixed-slice
    loss components and full-dataset accuracies at iteration 0, every
    eval_interval steps, and at the last iteration.
    """
    if not isinstance(source_dataset, LabeledDataset):
        raise TypeError("source_dataset must be a LabeledDataset")
    if len(source_dataset) == 0 or len(target_dataset) == 0:
        raise ValueError("datasets must be non-empty")
    if config.class_count is not None \
            and config.class_count != source_dataset.class_count:
        raise ValueError(
            f"config says {config.class_count} classes but the source "
            f"dataset has {source_dataset.class_count}")
    class_count = source_dataset.class_count
    input_dim = source_dataset.features.shape[1]
    if target_dataset.features.shape[1] != input_dim:
        raise ValueError(
            f"source features have {input_dim} columns, target has "
            f"{target_dataset.features.shape[1]}")

    init_ss, src_ss, tgt_ss = np.random.SeedSequence(config.seed).spawn(3)
    dims = [input_dim, *config.hidden_dims, class_count]
    params = init_params(dims, np.random.default_rng(init_ss))
    optimizer = make_optimizer(config.optimizer, config.eta, config.beta1,
                               config.beta2, config.adam_eps)
    centers = None
    if config.variant == "jdda_center":
        centers = init_centers(class_count, config.hidden_dims[-1],
                               config.gamma)

    src_batches = batch_sampler(source_dataset, config.batch_per_domain,
                                np.random.default_rng(src_ss))
    tgt_batches = batch_sampler(target_dataset, config.batch_per_domain,
                                np.random.default_rng(tgt_ss))

    # fixed eval slices keep the recorded loss components comparable
    # across iterations (the generators shuffle, so a prefix is mixed)
    eval_src_x = source_dataset.features[:min(config.batch_per_domain,
                                              len(source_dataset))]
    eval_src_y = source_dataset.labels[:eval_src_x.shape[0]]
    eval_tgt_x = target_dataset.features[:min(config.batch_per_domain,
                                              len(target_dataset))]

    records = []
    per_class_target = {}
    # genuinely unlabeled targets (no held-out labels) train fine but
    # cannot be scored; their accuracy records stay nan
    target_scored = (not isinstance(target_dataset, UnlabeledDataset)
                     or target_dataset.has_evaluation_labels)

    def take_record(iteration, lambda1_value):
        nonlocal per_class_target
        weights = config.step_weights(0.0)
        source_value, coral_value, disc_value = _component_losses(
            params, eval_src_x, eval_src_y, eval_tgt_x, weights,
            config.variant, centers)
        source_acc, _ = evaluate(params, source_dataset)
        if target_scored:
            target_acc, per_class_target = evaluate(params, target_dataset)
        else:
            target_acc = float("nan")
        records.append(EvalRecord(iteration, source_value, coral_value,
                                  disc_value, lambda1_value, source_acc,
                                  target_acc))

    take_record(0, 0.0)
    last_lambda1 = 0.0
    start = time.perf_counter()
    for i in range(1, config.iterations + 1):
        progress = (i - 1) / max(config.iterations - 1, 1)
        src_idx = next(src_batches)
        tgt_idx = next(tgt_batches)
        metrics = train_step(params, optimizer,
                             source_dataset.features[src_idx],
                             source_dataset.labels[src_idx],
                             target_dataset.features[tgt_idx],
                             config, progress, centers)
        last_lambda1 = metrics["lambda1"]
        if i % config.eval_interval == 0 or i == config.iterations:
            take_record(i, last_lambda1)
    elapsed = time.perf_counter() - start

    report = RunReport(
        records=records,
        final_source_accuracy=records[-1].source_accuracy,
        final_target_accuracy=records[-1].target_accuracy,
        per_class_target_accuracy=per_class_target,
        total_seconds=elapsed,
        seconds_per_iteration=elapsed / max(config.iterations, 1),
    )
    return params, report


def report_csv_text(report):
    """Render a report as CSV: version comment, column header, one row
    per eval point.  Floats use repr, so the text is deterministic."""
    lines = [REPORT_CSV_VERSION_LINE, REPORT_CSV_COLUMNS]
    for r in report.records:
        lines.append(",".join((
            str(r.iteration),
            repr(float(r.source_loss)),
            repr(float(r.coral_loss)),
            repr(float(r.discriminative_loss)),
            repr(float(r.lambda1)),
            repr(float(r.source_accuracy)),
            repr(float(r.target_accuracy)),
        )))
    return "\n".join(lines) + "\n"


def report_summary(report, config):
    """JSON-ready summary of one run (wall clock lives here, never in
    the CSVs)."""
    from dataclasses import asdict

    config_dict = asdict(config)
    config_dict["hidden_dims"] = list(config.hidden_dims)
    target_acc = report.final_target_accuracy
    scored = not math.isnan(target_acc)
    return {
        "variant": config.variant,
        "seed": config.seed,
        "iterations": config.iterations,
        "final_source_accuracy": report.final_source_accuracy,
        "final_target_accuracy": target_acc if scored else None,
        "final_target_accuracy_pct":
            f"{100.0 * target_acc:.2f}" if scored else None,
        "per_class_target_accuracy":
            {str(k): v for k, v in report.per_class_target_accuracy.items()},
        "total_seconds": report.total_seconds,
        "seconds_per_iteration": report.seconds_per_iteration,
        "config": config_dict,
    }
