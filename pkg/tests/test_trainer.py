"""Trainer tests: schedule values, step semantics, determinism,
descent sanity, evaluation, report serialization, and the audit that
the training path never reads target labels."""

import ast
import inspect
import math

import numpy as np
import pytest

import jdda.trainer
from jdda.datasets import (
    LabeledDataset,
    SyntheticShiftSpec,
    UnlabeledDataset,
    generate_shifted_gaussians,
)
from jdda.losses import init_centers
from jdda.network import Sgd, backward, forward, init_params
from jdda.losses import source_softmax_loss
from jdda.trainer import (
    TrainConfig,
    evaluate,
    lambda_schedule,
    report_csv_text,
    report_summary,
    train,
    train_step,
)


def small_task(seed=0, samples=40, classes=3):
    spec = SyntheticShiftSpec(class_count=classes, samples_per_class=samples,
                              spread=0.5, rotation=0.6, seed=seed)
    return generate_shifted_gaussians(spec)


# ----------------------------------------------------------------- schedule


def test_schedule_endpoints():
    assert lambda_schedule(0.0, mu=10.0) == 0.0
    assert lambda_schedule(1.0, mu=10.0) == pytest.approx(
        0.999909, abs=1e-6)
    # closed form: 2/(1+exp(-mu p)) - 1 == tanh(mu p / 2)
    assert lambda_schedule(1.0, mu=10.0) == pytest.approx(math.tanh(5.0),
                                                          abs=1e-15)
    assert lambda_schedule(0.5, mu=10.0) == pytest.approx(
        0.986614, abs=1e-6)


def test_schedule_monotone_on_grid():
    grid = np.linspace(0.0, 1.0, 1000)
    values = [lambda_schedule(float(p), mu=10.0) for p in grid]
    assert all(b >= a for a, b in zip(values, values[1:]))
    assert all(0.0 <= v < 1.0 for v in values)


def test_schedule_rejects_out_of_range():
    with pytest.raises(ValueError):
        lambda_schedule(-0.1)
    with pytest.raises(ValueError):
        lambda_schedule(1.1)


# ------------------------------------------------------------------ config


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(variant="other")
    with pytest.raises(ValueError):
        TrainConfig(eta=0.0)
    with pytest.raises(ValueError):
        TrainConfig(gamma=0.0)
    with pytest.raises(ValueError):
        TrainConfig(batch_per_domain=0)
    with pytest.raises(ValueError):
        TrainConfig(eval_interval=0)
    with pytest.raises(ValueError):
        TrainConfig(hidden_dims=())
    with pytest.raises(ValueError):
        TrainConfig(lambda2=-0.5)
    with pytest.raises(ValueError):
        TrainConfig(optimizer="rmsprop")
    with pytest.raises(ValueError):
        TrainConfig(iterations=-1)


def test_config_lambda2_defaults_per_variant():
    assert TrainConfig(variant="source_only").resolved_lambda2() == 0.0
    assert TrainConfig(variant="coral_only").resolved_lambda2() == 0.0
    assert TrainConfig(variant="jdda_instance").resolved_lambda2() == 0.03
    assert TrainConfig(variant="jdda_center").resolved_lambda2() == 0.01
    assert TrainConfig(variant="jdda_center",
                       lambda2=0.5).resolved_lambda2() == 0.5


def test_config_step_weights_follow_schedule():
    config = TrainConfig(variant="coral_only", mu=10.0)
    assert config.step_weights(0.0).lambda1 == 0.0
    assert config.step_weights(1.0).lambda1 == pytest.approx(
        math.tanh(5.0), abs=1e-15)


# ------------------------------------------------------------- train_step


def test_source_only_step_equals_plain_classifier_step():
    src, _ = small_task(seed=1)
    batch_x = src.features[:16]
    batch_y = src.labels[:16]

    params_a = init_params([2, 8, 4, 3], seed=5)
    params_b = {
        "layer_dims": params_a["layer_dims"],
        "weights": [w.copy() for w in params_a["weights"]],
        "biases": [b.copy() for b in params_a["biases"]],
    }

    config = TrainConfig(variant="source_only", optimizer="sgd", eta=1e-2,
                         hidden_dims=(8, 4))
    train_step(params_a, Sgd(1e-2), batch_x, batch_y, None, config,
               progress=0.0)

    logits, trace = forward(params_b, batch_x)
    grads = backward(params_b, trace,
                     source_softmax_loss(logits, batch_y).grads["logits"])
    Sgd(1e-2).step(params_b, grads)

    for wa, wb in zip(params_a["weights"], params_b["weights"]):
        assert np.array_equal(wa, wb)
    for ba, bb in zip(params_a["biases"], params_b["biases"]):
        assert np.array_equal(ba, bb)


def test_zero_learning_rate_still_updates_centers():
    src, tgt = small_task(seed=2)
    config = TrainConfig(variant="jdda_center", optimizer="sgd", eta=1e-9,
                         hidden_dims=(8, 4), m2=4.0)
    params = init_params([2, 8, 4, 3], seed=6)
    before = [w.copy() for w in params["weights"]]
    centers = init_centers(3, 4, gamma=0.5)
    # a zero-rate optimizer leaves parameters alone; the center update
    # is its own rule and must run regardless
    train_step(params, Sgd(0.0), src.features[:16], src.labels[:16],
               tgt.features[:16], config, progress=0.0, centers=centers)
    for w, w0 in zip(params["weights"], before):
        assert np.array_equal(w, w0)
    assert centers.initialized
    assert np.any(centers.centers != 0.0)


def test_step_metrics_report_pair_terms():
    src, tgt = small_task(seed=3)
    config = TrainConfig(variant="jdda_instance", optimizer="sgd", eta=1e-4,
                         hidden_dims=(8, 4), m2=4.0)
    params = init_params([2, 8, 4, 3], seed=7)
    metrics = train_step(params, Sgd(1e-4), src.features[:12],
                         src.labels[:12], tgt.features[:12], config,
                         progress=0.5)
    assert metrics["pair_terms"] == 12 * 12
    assert set(metrics["components"]) == {"source", "coral",
                                          "discriminative"}
    assert metrics["lambda1"] == pytest.approx(math.tanh(2.5), abs=1e-15)


def test_repeated_steps_on_fixed_batch_decrease_loss():
    src, tgt = small_task(seed=31, samples=20)
    batch_x, batch_y = src.features[:16], src.labels[:16]
    tgt_x = tgt.features[:16]
    for variant in ("source_only", "coral_only", "jdda_instance",
                    "jdda_center"):
        config = TrainConfig(variant=variant, optimizer="sgd", eta=1e-3,
                             hidden_dims=(8, 4), m2=4.0)
        params = init_params([2, 8, 4, 3], seed=11)
        optimizer = Sgd(1e-3)
        centers = init_centers(3, 4) if variant == "jdda_center" else None
        values = []
        for _ in range(11):
            metrics = train_step(params, optimizer, batch_x, batch_y,
                                 tgt_x if variant != "source_only" else None,
                                 config, progress=1.0, centers=centers)
            values.append(metrics["loss"])
        drops = [a - b for a, b in zip(values, values[1:])]
        assert all(d > 0.0 for d in drops), (variant, values)


def test_center_norms_stay_bounded():
    src, tgt = small_task(seed=4)
    config = TrainConfig(variant="jdda_center", optimizer="adam", eta=1e-3,
                         hidden_dims=(8, 4), m2=4.0)
    params = init_params([2, 8, 4, 3], seed=8)
    from jdda.network import Adam, bottleneck_features

    optimizer = Adam(1e-3)
    centers = init_centers(3, 4, gamma=0.5)
    seen = 0.0  # max feature norm observed (initial centers are zero)
    rng = np.random.default_rng(0)
    for _ in range(40):
        idx = rng.permutation(len(src))[:16]
        h = bottleneck_features(params, src.features[idx])
        seen = max(seen, float(np.linalg.norm(h, axis=1).max()))
        train_step(params, optimizer, src.features[idx], src.labels[idx],
                   tgt.features[idx], config, progress=0.5, centers=centers)
        center_norm = float(np.linalg.norm(centers.centers, axis=1).max())
        assert center_norm <= seen + 1.0


# ------------------------------------------------------------------ train


def test_train_deterministic():
    src, tgt = small_task(seed=5)
    config = TrainConfig(variant="jdda_center", iterations=30,
                         batch_per_domain=16, eval_interval=10,
                         hidden_dims=(8, 4), seed=123, m2=4.0)
    params_a, report_a = train(config, src, tgt)
    params_b, report_b = train(config, src, tgt)
    for wa, wb in zip(params_a["weights"], params_b["weights"]):
        assert np.array_equal(wa, wb)
    assert report_a.records == report_b.records
    assert report_csv_text(report_a) == report_csv_text(report_b)


def test_train_zero_iterations_initial_record_only():
    src, tgt = small_task(seed=6)
    config = TrainConfig(variant="jdda_center", iterations=0,
                         batch_per_domain=16, hidden_dims=(8, 4))
    _, report = train(config, src, tgt)
    assert len(report.records) == 1
    assert report.records[0].iteration == 0
    assert report.records[0].lambda1 == 0.0
    # centers do not exist yet, so the component reads zero
    assert report.records[0].discriminative_loss == 0.0


def test_train_records_monotone_iterations_and_lambda():
    src, tgt = small_task(seed=7)
    config = TrainConfig(variant="coral_only", iterations=25,
                         batch_per_domain=16, eval_interval=10,
                         hidden_dims=(8, 4))
    _, report = train(config, src, tgt)
    iterations = [r.iteration for r in report.records]
    assert iterations == sorted(set(iterations))
    assert iterations[0] == 0 and iterations[-1] == 25
    lambdas = [r.lambda1 for r in report.records]
    assert all(b >= a for a, b in zip(lambdas, lambdas[1:]))


def test_train_source_only_ignores_target_features():
    src, tgt = small_task(seed=8)
    config = TrainConfig(variant="source_only", iterations=15,
                         batch_per_domain=16, eval_interval=5,
                         hidden_dims=(8, 4), seed=9)
    params_a, _ = train(config, src, tgt)
    # a completely different target domain must not change the model
    other = UnlabeledDataset(tgt.features * 100.0 + 7.0,
                             held_out_labels=tgt.evaluation_labels(),
                             class_count=tgt.class_count)
    params_b, _ = train(config, src, other)
    for wa, wb in zip(params_a["weights"], params_b["weights"]):
        assert np.array_equal(wa, wb)


def test_train_rejects_mismatched_inputs():
    src, tgt = small_task(seed=10)
    with pytest.raises(ValueError):
        train(TrainConfig(class_count=5, hidden_dims=(4,)), src, tgt)
    narrow = UnlabeledDataset(tgt.features[:, :1])
    with pytest.raises(ValueError):
        train(TrainConfig(hidden_dims=(4,)), src, narrow)
    with pytest.raises(TypeError):
        train(TrainConfig(hidden_dims=(4,)), tgt, tgt)


# --------------------------------------------------------------- evaluate


def test_evaluate_perfect_predictions():
    params = init_params([2, 6, 3, 3], seed=12)
    rng = np.random.default_rng(13)
    features = rng.normal(size=(50, 2))
    logits, _ = forward(params, features)
    labels = logits.argmax(axis=1)
    if len(np.unique(labels)) < 2:  # keep the fixture honest
        pytest.skip("degenerate draw")
    ds = LabeledDataset(features, labels, 3)
    accuracy, per_class = evaluate(params, ds)
    assert accuracy == 1.0
    assert all(v == 1.0 for v in per_class.values())


def test_evaluate_uniform_model_near_chance():
    # all-zero parameters give identical logits, so the argmax is the
    # first class; accuracy equals that class's frequency, about 1/c
    params = {
        "layer_dims": [2, 4, 3],
        "weights": [np.zeros((2, 4)), np.zeros((4, 3))],
        "biases": [np.zeros(4), np.zeros(3)],
    }
    rng = np.random.default_rng(14)
    n, c = 600, 3
    ds = LabeledDataset(rng.normal(size=(n, 2)), rng.integers(0, c, size=n),
                        c)
    accuracy, _ = evaluate(params, ds)
    sigma = math.sqrt((1 / c) * (1 - 1 / c) / n)
    assert abs(accuracy - 1 / c) < 3 * sigma


def test_evaluate_absent_class_omitted():
    params = init_params([2, 4, 3], seed=15)
    ds = LabeledDataset(np.zeros((4, 2)), np.array([0, 0, 2, 2]), 3)
    _, per_class = evaluate(params, ds)
    assert set(per_class) == {0, 2}


def test_evaluate_requires_labels():
    params = init_params([2, 4, 3], seed=16)
    with pytest.raises(ValueError):
        evaluate(params, UnlabeledDataset(np.zeros((3, 2))))


def test_evaluate_reads_held_out_labels():
    params = init_params([2, 4, 2], seed=17)
    ds = UnlabeledDataset(np.random.default_rng(0).normal(size=(10, 2)),
                          held_out_labels=np.zeros(10, dtype=int),
                          class_count=2)
    accuracy, _ = evaluate(params, ds)
    assert 0.0 <= accuracy <= 1.0


# ---------------------------------------------------------------- reports


def test_report_csv_shape_and_precision():
    src, tgt = small_task(seed=18)
    config = TrainConfig(variant="coral_only", iterations=10,
                         batch_per_domain=16, eval_interval=5,
                         hidden_dims=(8, 4))
    _, report = train(config, src, tgt)
    text = report_csv_text(report)
    lines = text.strip().split("\n")
    assert lines[0] == "# jdda-report v1"
    assert lines[1].split(",")[0] == "iteration"
    assert len(lines) == 2 + len(report.records)
    # repr round-trips the floats exactly
    first = lines[2].split(",")
    assert float(first[1]) == report.records[0].source_loss


def test_report_summary_contents():
    src, tgt = small_task(seed=19)
    config = TrainConfig(variant="source_only", iterations=5,
                         batch_per_domain=16, eval_interval=5,
                         hidden_dims=(8, 4), seed=2)
    _, report = train(config, src, tgt)
    summary = report_summary(report, config)
    assert summary["variant"] == "source_only"
    assert summary["config"]["seed"] == 2
    assert summary["final_target_accuracy_pct"] == \
        f"{100 * report.final_target_accuracy:.2f}"
    assert "total_seconds" in summary


# ------------------------------------------------------------------ audit


def test_training_path_never_touches_target_labels():
    """The held-out-label accessors must be unreachable from the
    training code path; only evaluate() may use them."""
    tree = ast.parse(inspect.getsource(jdda.trainer))
    audited = {"train", "train_step", "joint_forward_backward",
               "_component_losses"}
    banned = {"evaluation_labels", "_held_out_labels", "labels"}
    seen = set()
    violations = []
    for node in ast.walk(tree):
        if isinstance(node, ast.FunctionDef) and node.name in audited:
            seen.add(node.name)
            for sub in ast.walk(node):
                if isinstance(sub, ast.Attribute) and sub.attr in banned:
                    # source_dataset.labels is the labeled domain and fine;
                    # flag only the held-out accessors
                    if sub.attr != "labels":
                        violations.append((node.name, sub.attr))
    assert seen == audited
    assert not violations
