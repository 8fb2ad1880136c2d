"""Experiment orchestration: config files, ablation grids, sweeps,
multi-seed aggregation, and artifact emission.

One ExperimentSpec describes the whole grid: a task (synthetic
Gaussians or moons, or an IDX digit pair), a list of method variants, a
list of seeds, and optionally a lambda2 sweep axis.  run_experiment
trains every (method, lambda2, seed) cell, writes one report CSV, one
JSON summary and one checkpoint per run, then an aggregate CSV/JSON
over seeds.  All CSVs are byte-deterministic for a fixed spec; wall
clock appears only in the JSON summaries.

Runs in the grid are mutually independent (each builds its own RNG
streams from its seed), so they could be farmed out to parallel
workers; this implementation keeps them sequential and single-threaded,
and writes each artifact atomically.
"""

import dataclasses
import json
import os
import time
from dataclasses import dataclass

import numpy as np

from .datasets import (
    LabeledDataset,
    SyntheticShiftSpec,
    generate_shifted_gaussians,
    generate_shifted_moons,
    load_idx,
    resample_image,
    subsample,
    to_unlabeled,
)
from .fileio import atomic_write_text
from .losses import VARIANTS
from .network import bottleneck_features, save_params
from .trainer import TrainConfig, report_csv_text, report_summary, train

TASKS = ("gaussians", "moons", "idx")

AGGREGATE_CSV_VERSION_LINE = "# jdda-aggregate v1"
AGGREGATE_CSV_COLUMNS = ("method,lambda2,seed_count,mean_accuracy,"
                         "std_accuracy,per_seed_accuracies")
FEATURES_CSV_VERSION_LINE = "# jdda-features v1"

# default lambda2 grid for the sweep verb; spans the useful range with
# both extremes deliberately past it
DEFAULT_SWEEP = (0.0001, 0.001, 0.01, 0.1, 1.0)


@dataclass
class ExperimentSpec:
    """Fully-resolved description of one experiment grid.

    Field names double as config-file keys.  Training defaults follow
    the reference hyperparameters (batch 128 per domain, eta 1e-4,
    Adam(0.9, 0.999, 1e-8), mu 10, gamma 0.5, m1 0, m2 100, lambda2
    per-variant); task and iteration defaults are desk-scale choices.
    """

    task: str = "gaussians"
    class_count: int = 4
    samples_per_class: int = 300
    spread: float = 0.45
    rotation: float = 0.0
    translation: tuple = (0.0, 0.0)
    scale: float = 1.0
    noise: float = 0.0
    data_seed: int = 0
    source_images: str = ""
    source_labels: str = ""
    target_images: str = ""
    target_labels: str = ""
    resample_side: int = 0
    source_subsample: int = 0
    target_subsample: int = 0
    methods: tuple = VARIANTS
    seeds: tuple = (0, 1, 2, 3, 4)
    sweep_lambda2: object = None
    output_dir: str = "runs"
    batch_per_domain: int = 128
    iterations: int = 2000
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
    hidden_dims: tuple = (32, 8)

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, "
                             f"got {self.task!r}")
        self.methods = tuple(self.methods)
        if not self.methods:
            raise ValueError("need at least one method")
        for m in self.methods:
            if m not in VARIANTS:
                raise ValueError(f"unknown method {m!r}")
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.seeds:
            raise ValueError("need at least one seed")
        if self.sweep_lambda2 is not None:
            self.sweep_lambda2 = tuple(float(v) for v in self.sweep_lambda2)
            if not self.sweep_lambda2:
                raise ValueError("sweep_lambda2 must list at least one value")
            if any(v < 0 for v in self.sweep_lambda2):
                raise ValueError("sweep_lambda2 values must be non-negative")
        self.translation = tuple(float(v) for v in self.translation)
        if len(self.translation) != 2:
            raise ValueError("translation needs exactly two components")
        if self.task == "idx":
            missing = [name for name in
                       ("source_images", "source_labels", "target_images")
                       if not getattr(self, name)]
            if missing:
                raise ValueError(
                    f"idx task needs {', '.join(missing)}")

    def train_config(self, method, seed, lambda2=None):
        """TrainConfig for one grid cell.

        lambda2 here is the sweep value; None falls back to the spec's
        own lambda2 and from there to the per-variant default.
        """
        return TrainConfig(
            variant=method,
            batch_per_domain=self.batch_per_domain,
            iterations=self.iterations,
            eta=self.eta,
            optimizer=self.optimizer,
            beta1=self.beta1,
            beta2=self.beta2,
            adam_eps=self.adam_eps,
            lambda2=self.lambda2 if lambda2 is None else lambda2,
            mu=self.mu,
            gamma=self.gamma,
            alpha=self.alpha,
            beta=self.beta,
            m1=self.m1,
            m2=self.m2,
            eval_interval=self.eval_interval,
            seed=seed,
            hidden_dims=self.hidden_dims,
            class_count=self.class_count if self.task != "idx" else None,
        )


def _parse_str(raw):
    return raw


def _parse_int(raw):
    return int(raw)


def _parse_float(raw):
    return float(raw)


def _parse_int_tuple(raw):
    return tuple(int(part) for part in raw.split(",") if part.strip())


def _parse_float_tuple(raw):
    return tuple(float(part) for part in raw.split(",") if part.strip())


def _parse_str_tuple(raw):
    return tuple(part.strip() for part in raw.split(",") if part.strip())


_KEY_PARSERS = {
    "task": _parse_str,
    "class_count": _parse_int,
    "samples_per_class": _parse_int,
    "spread": _parse_float,
    "rotation": _parse_float,
    "translation": _parse_float_tuple,
    "scale": _parse_float,
    "noise": _parse_float,
    "data_seed": _parse_int,
    "source_images": _parse_str,
    "source_labels": _parse_str,
    "target_images": _parse_str,
    "target_labels": _parse_str,
    "resample_side": _parse_int,
    "source_subsample": _parse_int,
    "target_subsample": _parse_int,
    "methods": _parse_str_tuple,
    "seeds": _parse_int_tuple,
    "sweep_lambda2": _parse_float_tuple,
    "output_dir": _parse_str,
    "batch_per_domain": _parse_int,
    "iterations": _parse_int,
    "eta": _parse_float,
    "optimizer": _parse_str,
    "beta1": _parse_float,
    "beta2": _parse_float,
    "adam_eps": _parse_float,
    "lambda2": _parse_float,
    "mu": _parse_float,
    "gamma": _parse_float,
    "alpha": _parse_float,
    "beta": _parse_float,
    "m1": _parse_float,
    "m2": _parse_float,
    "eval_interval": _parse_int,
    "hidden_dims": _parse_int_tuple,
}


def _convert(key, raw):
    if key not in _KEY_PARSERS:
        raise ValueError(f"unknown config key {key!r}")
    try:
        return _KEY_PARSERS[key](raw)
    except ValueError as exc:
        raise ValueError(f"config key {key!r}: {exc}") from None


def parse_config(path=None, overrides=None):
    """Build an ExperimentSpec from a config file plus overrides.

    The file format is one ``key = value`` pair per line; blank lines
    and ``#`` comments are skipped.  Keys are the ExperimentSpec field
    names; list values are comma-separated.  ``overrides`` maps keys to
    raw value strings (this is how CLI flags win over the file).  An
    empty config yields the defaults.
    """
    resolved = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                text = line.split("#", 1)[0].strip()
                if not text:
                    continue
                if "=" not in text:
                    raise ValueError(
                        f"{path}:{lineno}: expected 'key = value', "
                        f"got {text!r}")
                key, raw = (part.strip() for part in text.split("=", 1))
                resolved[key] = _convert(key, raw)
    for key, raw in (overrides or {}).items():
        if raw is None:
            continue
        resolved[key] = _convert(key, raw)
    return ExperimentSpec(**resolved)


def build_datasets(spec):
    """Materialize (source LabeledDataset, target UnlabeledDataset)."""
    if spec.task in ("gaussians", "moons"):
        shift = SyntheticShiftSpec(
            class_count=spec.class_count,
            samples_per_class=spec.samples_per_class,
            spread=spec.spread,
            rotation=spec.rotation,
            translation=spec.translation,
            scale=spec.scale,
            noise=spec.noise,
            seed=spec.data_seed,
        )
        make = (generate_shifted_gaussians if spec.task == "gaussians"
                else generate_shifted_moons)
        return make(shift)

    source = load_idx(spec.source_images, spec.source_labels)
    target = load_idx(spec.target_images, spec.target_labels or None)
    if isinstance(target, LabeledDataset):
        target = to_unlabeled(target)
    if spec.resample_side > 0:
        source = resample_image(source, spec.resample_side)
        target = resample_image(target, spec.resample_side)
    src_seed, tgt_seed = np.random.SeedSequence(spec.data_seed).spawn(2)
    if spec.source_subsample > 0:
        source = subsample(source, spec.source_subsample, src_seed)
    if spec.target_subsample > 0:
        target = subsample(target, spec.target_subsample, tgt_seed)
    return source, target


@dataclass
class AggregateCell:
    """Seed-averaged result for one (method, lambda2) grid cell."""

    method: str
    lambda2: float
    seeds: tuple
    accuracies: tuple
    mean: float
    std: object  # None with fewer than two seeds

    @classmethod
    def from_runs(cls, method, lambda2, seeds, accuracies):
        accs = tuple(float(a) for a in accuracies)
        std = (float(np.std(accs, ddof=1)) if len(accs) >= 2 else None)
        return cls(method=method, lambda2=float(lambda2),
                   seeds=tuple(seeds), accuracies=accs,
                   mean=float(np.mean(accs)), std=std)


@dataclass
class AggregateResult:
    cells: list

    def best(self):
        return max(self.cells, key=lambda cell: cell.mean)


def _run_stem(method, lambda2, seed, with_sweep):
    if with_sweep:
        return f"{method}_lambda2_{repr(float(lambda2))}_seed{seed}"
    return f"{method}_seed{seed}"


def aggregate_csv_text(result):
    lines = [AGGREGATE_CSV_VERSION_LINE, AGGREGATE_CSV_COLUMNS]
    for cell in result.cells:
        per_seed = ";".join(repr(a) for a in cell.accuracies)
        std = "" if cell.std is None else repr(cell.std)
        lines.append(f"{cell.method},{repr(cell.lambda2)},"
                     f"{len(cell.seeds)},{repr(cell.mean)},{std},{per_seed}")
    return "\n".join(lines) + "\n"


def _aggregate_json(result, spec, elapsed):
    cells = []
    for cell in result.cells:
        cells.append({
            "method": cell.method,
            "lambda2": cell.lambda2,
            "seeds": list(cell.seeds),
            "per_seed_accuracy": list(cell.accuracies),
            "mean_accuracy": cell.mean,
            "std_accuracy": cell.std,
            "mean_accuracy_pct": f"{100.0 * cell.mean:.2f}",
        })
    return {
        "format": "jdda-aggregate",
        "version": 1,
        "spec": dataclasses.asdict(spec),
        "total_seconds": elapsed,
        "cells": cells,
    }


def run_experiment(spec):
    """Train every (method, lambda2, seed) cell and emit artifacts.

    Per run: ``<stem>.report.csv``, ``<stem>.summary.json`` and
    ``<stem>.params.json`` in spec.output_dir; per grid:
    ``aggregate.csv`` and ``aggregate.json``.  Returns the
    AggregateResult.  Wall-clock times live only in the JSON files, so
    repeated runs of one spec produce byte-identical CSVs.
    """
    os.makedirs(spec.output_dir, exist_ok=True)
    source, target = build_datasets(spec)
    sweep = spec.sweep_lambda2
    started = time.perf_counter()

    cells = []
    for method in spec.methods:
        for lam in (sweep if sweep is not None else (None,)):
            accuracies = []
            resolved = None
            for seed in spec.seeds:
                config = spec.train_config(method, seed, lambda2=lam)
                resolved = config.resolved_lambda2()
                params, report = train(config, source, target)
                stem = _run_stem(method, resolved, seed, sweep is not None)
                base = os.path.join(spec.output_dir, stem)
                atomic_write_text(base + ".report.csv",
                                  report_csv_text(report))
                atomic_write_text(
                    base + ".summary.json",
                    json.dumps(report_summary(report, config), indent=2)
                    + "\n")
                save_params(params, base + ".params.json")
                accuracies.append(report.final_target_accuracy)
            cells.append(AggregateCell.from_runs(
                method, resolved, spec.seeds, accuracies))

    result = AggregateResult(cells)
    elapsed = time.perf_counter() - started
    atomic_write_text(os.path.join(spec.output_dir, "aggregate.csv"),
                      aggregate_csv_text(result))
    atomic_write_text(
        os.path.join(spec.output_dir, "aggregate.json"),
        json.dumps(_aggregate_json(result, spec, elapsed), indent=2) + "\n")
    return result


def compactness_ratio(features, labels):
    """Mean squared distance to own class center over the smallest
    squared distance between class centers.

    Small values mean tight, well-separated classes.  Zero exactly when
    every sample sits on its class center; needs at least two classes
    present.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    present = np.unique(labels)
    if present.shape[0] < 2:
        raise ValueError("compactness needs at least two classes present")
    centers = np.stack([features[labels == k].mean(axis=0)
                        for k in present])
    deviations = features - centers[np.searchsorted(present, labels)]
    within = float(np.mean(np.sum(deviations ** 2, axis=1)))
    gaps = np.sum((centers[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    off_diagonal = ~np.eye(present.shape[0], dtype=bool)
    return within / float(np.min(gaps[off_diagonal]))


def dump_features(params, dataset, path, domain=None):
    """Write bottleneck features to CSV for external plotting.

    Columns are domain, label, feature_1..feature_L.  Labels come from
    the dataset when available (held-out evaluation labels count; this
    is an analysis artifact, not training), else -1.  When at least two
    labeled classes are present a ``# compactness_ratio=`` comment is
    included; that ratio is returned, else None.
    """
    feats = bottleneck_features(params, dataset.features)
    if isinstance(dataset, LabeledDataset):
        labels = dataset.labels
        default_domain = "source"
    else:
        labels = (dataset.evaluation_labels()
                  if dataset.has_evaluation_labels else None)
        default_domain = "target"
    domain = default_domain if domain is None else domain

    ratio = None
    if labels is not None and np.unique(labels).shape[0] >= 2:
        ratio = compactness_ratio(feats, labels)

    width = feats.shape[1]
    lines = [FEATURES_CSV_VERSION_LINE]
    if ratio is not None:
        lines.append(f"# compactness_ratio={repr(ratio)}")
    lines.append("domain,label," +
                 ",".join(f"feature_{j + 1}" for j in range(width)))
    for i in range(feats.shape[0]):
        label = -1 if labels is None else int(labels[i])
        values = ",".join(repr(float(v)) for v in feats[i])
        lines.append(f"{domain},{label},{values}")
    atomic_write_text(path, "\n".join(lines) + "\n")
    return ratio
