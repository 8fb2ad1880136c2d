"""Datasets: synthetic domain-shift generators, IDX ingestion, batching.

Source data travels as LabeledDataset.  Target data travels as
UnlabeledDataset, whose labels (when known) are held out behind an
explicit accessor so nothing in the training path can touch them; an
audit test enforces that the trainer never calls it.

All generators are pure functions of their spec: the same spec yields
bitwise-identical arrays.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .fileio import atomic_write_bytes, atomic_write_text
from .validation import as_labels, as_matrix

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

DATASET_CSV_HEADER = "# jdda-dataset v1"


@dataclass
class LabeledDataset:
    """Features with class labels; the source-domain container."""

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    provenance: str = ""

    def __post_init__(self):
        self.features = as_matrix(self.features, "features")
        self.labels = as_labels(self.labels, class_count=self.class_count)
        if self.labels.shape[0] != self.features.shape[0]:
            raise ValueError(
                f"{self.features.shape[0]} feature rows but "
                f"{self.labels.shape[0]} labels"
            )

    def __len__(self):
        return self.features.shape[0]


class UnlabeledDataset:
    """Features only; the target-domain container.

    Ground-truth labels, when known, are stored privately and exposed
    only through evaluation_labels().  Training code must never call
    that accessor (tests/test_trainer.py audits the trainer source for
    this).
    """

    def __init__(self, features, held_out_labels=None, class_count=None,
                 provenance=""):
        self.features = as_matrix(features, "features")
        self.provenance = provenance
        self.class_count = class_count
        if held_out_labels is None:
            self._held_out_labels = None
        else:
            labels = as_labels(held_out_labels, class_count=class_count,
                               name="held_out_labels")
            if labels.shape[0] != self.features.shape[0]:
                raise ValueError(
                    f"{self.features.shape[0]} feature rows but "
                    f"{labels.shape[0]} held-out labels"
                )
            self._held_out_labels = labels

    def __len__(self):
        return self.features.shape[0]

    @property
    def has_evaluation_labels(self):
        return self._held_out_labels is not None

    def evaluation_labels(self):
        """Ground-truth labels for scoring only."""
        if self._held_out_labels is None:
            raise ValueError("this dataset has no held-out labels")
        return self._held_out_labels.copy()


def to_unlabeled(dataset):
    """Strip a labeled dataset down to the target-domain container,
    keeping the labels behind the evaluation accessor."""
    return UnlabeledDataset(
        dataset.features,
        held_out_labels=dataset.labels,
        class_count=dataset.class_count,
        provenance=dataset.provenance,
    )


@dataclass
class SyntheticShiftSpec:
    """Recipe for a source/target pair under a rigid transform.

    The source domain is sampled around ``means`` (one row per class)
    with isotropic ``spread``.  The target domain is an independent
    draw from the same process pushed through rotation, scaling and
    translation, plus optional extra ``noise``.  When ``means`` is
    None, classes sit on an ellipse with radii (4, 1.5).
    """

    class_count: int = 4
    samples_per_class: int = 150
    means: object = None
    spread: float = 0.45
    rotation: float = 0.0
    translation: tuple = (0.0, 0.0)
    scale: float = 1.0
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.class_count < 1:
            raise ValueError("class_count must be positive")
        if self.samples_per_class < 1:
            raise ValueError("samples_per_class must be positive")
        if self.spread < 0:
            raise ValueError("spread must be non-negative")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")


def _default_means(class_count):
    angles = 2.0 * np.pi * np.arange(class_count) / class_count
    return np.column_stack([4.0 * np.cos(angles), 1.5 * np.sin(angles)])


def _rigid_transform(points, spec):
    c, s = np.cos(spec.rotation), np.sin(spec.rotation)
    rot = np.array([[c, -s], [s, c]])
    return spec.scale * (points @ rot.T) + np.asarray(spec.translation,
                                                      dtype=np.float64)


def _sample_blobs(rng, means, samples_per_class, spread):
    parts, labels = [], []
    for k, mean in enumerate(means):
        parts.append(mean + spread * rng.normal(size=(samples_per_class,
                                                      mean.shape[0])))
        labels.append(np.full(samples_per_class, k, dtype=np.int64))
    return np.vstack(parts), np.concatenate(labels)


def generate_shifted_gaussians(spec):
    """Gaussian blobs, target pushed through the spec's transform.

    Returns (source LabeledDataset, target UnlabeledDataset); the
    target keeps its ground-truth labels held out for evaluation.  Rows
    are shuffled so any prefix is class-mixed.
    """
    means = (_default_means(spec.class_count) if spec.means is None
             else as_matrix(spec.means, "means"))
    if means.shape[0] != spec.class_count:
        raise ValueError("means must have one row per class")
    root = np.random.SeedSequence(spec.seed)
    src_rng, tgt_rng, shuffle_rng = (np.random.default_rng(s)
                                     for s in root.spawn(3))

    src_x, src_y = _sample_blobs(src_rng, means, spec.samples_per_class,
                                 spec.spread)
    tgt_x, tgt_y = _sample_blobs(tgt_rng, means, spec.samples_per_class,
                                 spec.spread)
    tgt_x = _rigid_transform(tgt_x, spec)
    if spec.noise > 0:
        tgt_x = tgt_x + spec.noise * tgt_rng.normal(size=tgt_x.shape)

    src_order = shuffle_rng.permutation(src_x.shape[0])
    tgt_order = shuffle_rng.permutation(tgt_x.shape[0])
    tag = f"gaussians(seed={spec.seed})"
    source = LabeledDataset(src_x[src_order], src_y[src_order],
                            spec.class_count, provenance=tag)
    target = UnlabeledDataset(tgt_x[tgt_order],
                              held_out_labels=tgt_y[tgt_order],
                              class_count=spec.class_count, provenance=tag)
    return source, target


def _sample_moons(rng, samples_per_class, jitter):
    t0 = rng.uniform(0.0, np.pi, size=samples_per_class)
    t1 = rng.uniform(0.0, np.pi, size=samples_per_class)
    upper = np.column_stack([np.cos(t0), np.sin(t0)])
    lower = np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
    x = np.vstack([upper, lower])
    if jitter > 0:
        x = x + jitter * rng.normal(size=x.shape)
    y = np.concatenate([np.zeros(samples_per_class, dtype=np.int64),
                        np.ones(samples_per_class, dtype=np.int64)])
    return x, y


def generate_shifted_moons(spec):
    """Two interleaved half-moon arcs; target transformed as above.

    With spread and noise both zero every point lies exactly on its
    arc: class 0 on the unit circle around the origin, class 1 on the
    unit circle around (1, 0.5).
    """
    if spec.class_count != 2:
        raise ValueError("moons are a two-class task")
    root = np.random.SeedSequence(spec.seed)
    src_rng, tgt_rng, shuffle_rng = (np.random.default_rng(s)
                                     for s in root.spawn(3))

    src_x, src_y = _sample_moons(src_rng, spec.samples_per_class, spec.spread)
    tgt_x, tgt_y = _sample_moons(tgt_rng, spec.samples_per_class, spec.spread)
    tgt_x = _rigid_transform(tgt_x, spec)
    if spec.noise > 0:
        tgt_x = tgt_x + spec.noise * tgt_rng.normal(size=tgt_x.shape)

    src_order = shuffle_rng.permutation(src_x.shape[0])
    tgt_order = shuffle_rng.permutation(tgt_x.shape[0])
    tag = f"moons(seed={spec.seed})"
    source = LabeledDataset(src_x[src_order], src_y[src_order], 2,
                            provenance=tag)
    target = UnlabeledDataset(tgt_x[tgt_order],
                              held_out_labels=tgt_y[tgt_order],
                              class_count=2, provenance=tag)
    return source, target


def _read_exact(fh, count, path, what):
    data = fh.read(count)
    if len(data) != count:
        raise ValueError(f"{path}: truncated {what}")
    return data


def load_idx(images_path, labels_path=None, class_count=None):
    """Read an IDX image file (and optional label file) into a dataset.

    Pixels are scaled to [0, 1] and flattened row-major.  With labels a
    LabeledDataset is returned, otherwise an UnlabeledDataset without
    held-out labels.
    """
    with open(images_path, "rb") as fh:
        magic, n, rows, cols = struct.unpack(
            ">IIII", _read_exact(fh, 16, images_path, "header"))
        if magic != IDX_IMAGE_MAGIC:
            raise ValueError(
                f"{images_path}: bad magic 0x{magic:08x}, "
                f"expected 0x{IDX_IMAGE_MAGIC:08x}")
        payload = _read_exact(fh, n * rows * cols, images_path, "payload")
        if fh.read(1):
            raise ValueError(f"{images_path}: trailing bytes after payload")
    pixels = np.frombuffer(payload, dtype=np.uint8).astype(np.float64) / 255.0
    features = pixels.reshape(n, rows * cols)

    if labels_path is None:
        return UnlabeledDataset(features, provenance=str(images_path))

    with open(labels_path, "rb") as fh:
        magic, n_labels = struct.unpack(
            ">II", _read_exact(fh, 8, labels_path, "header"))
        if magic != IDX_LABEL_MAGIC:
            raise ValueError(
                f"{labels_path}: bad magic 0x{magic:08x}, "
                f"expected 0x{IDX_LABEL_MAGIC:08x}")
        raw = _read_exact(fh, n_labels, labels_path, "payload")
        if fh.read(1):
            raise ValueError(f"{labels_path}: trailing bytes after payload")
    if n_labels != n:
        raise ValueError(
            f"{labels_path} has {n_labels} labels for {n} images")
    labels = np.frombuffer(raw, dtype=np.uint8).astype(np.int64)
    if class_count is None:
        class_count = int(labels.max()) + 1 if labels.size else 1
    return LabeledDataset(features, labels, class_count,
                          provenance=str(images_path))


def write_idx_images(path, features, rows, cols):
    """Write [0,1] features back to IDX u8 pixels (test fixtures)."""
    x = as_matrix(features, "features")
    if x.shape[1] != rows * cols:
        raise ValueError(f"features have {x.shape[1]} columns, "
                         f"expected {rows * cols}")
    if x.min() < 0.0 or x.max() > 1.0:
        raise ValueError("pixel values must lie in [0, 1]")
    payload = np.rint(x * 255.0).astype(np.uint8).tobytes()
    header = struct.pack(">IIII", IDX_IMAGE_MAGIC, x.shape[0], rows, cols)
    atomic_write_bytes(path, header + payload)


def write_idx_labels(path, labels):
    y = as_labels(labels, class_count=256)
    header = struct.pack(">II", IDX_LABEL_MAGIC, y.shape[0])
    atomic_write_bytes(path, header + y.astype(np.uint8).tobytes())


def _square_side(dim):
    side = int(round(dim ** 0.5))
    if side * side != dim:
        raise ValueError(f"{dim} pixels do not form a square image")
    return side


def _bilinear_weights(side_in, side_out):
    # pixel-center convention, edges clamped
    pos = (np.arange(side_out) + 0.5) * side_in / side_out - 0.5
    pos = np.clip(pos, 0.0, side_in - 1.0)
    lo = np.floor(pos).astype(np.int64)
    hi = np.minimum(lo + 1, side_in - 1)
    frac = pos - lo
    w = np.zeros((side_out, side_in))
    w[np.arange(side_out), lo] += 1.0 - frac
    w[np.arange(side_out), hi] += frac
    return w


def resample_image(dataset, target_side):
    """Bilinear resize of every (square) image in a dataset.

    Returns a new dataset of the same kind; labels and provenance carry
    over.  Values stay inside [0, 1] because every output pixel is a
    convex combination of inputs.
    """
    if target_side < 1:
        raise ValueError("target_side must be positive")
    side = _square_side(dataset.features.shape[1])
    w = _bilinear_weights(side, target_side)
    images = dataset.features.reshape(-1, side, side)
    resized = np.einsum("oi,nij,pj->nop", w, images, w)
    flat = resized.reshape(-1, target_side * target_side)
    if isinstance(dataset, LabeledDataset):
        return LabeledDataset(flat, dataset.labels, dataset.class_count,
                              provenance=dataset.provenance)
    held = dataset._held_out_labels
    return UnlabeledDataset(flat, held_out_labels=held,
                            class_count=dataset.class_count,
                            provenance=dataset.provenance)


def subsample(dataset, n, seed):
    """Deterministic random subset of n rows, same dataset kind."""
    total = len(dataset)
    if not 1 <= n <= total:
        raise ValueError(f"cannot take {n} rows from {total}")
    order = np.random.default_rng(seed).permutation(total)[:n]
    if isinstance(dataset, LabeledDataset):
        return LabeledDataset(dataset.features[order], dataset.labels[order],
                              dataset.class_count,
                              provenance=dataset.provenance)
    held = dataset._held_out_labels
    return UnlabeledDataset(
        dataset.features[order],
        held_out_labels=None if held is None else held[order],
        class_count=dataset.class_count, provenance=dataset.provenance)


def batch_sampler(dataset, batch_size, seed):
    """Endless deterministic stream of index batches.

    Each epoch is a fresh permutation; a trailing partial batch is
    completed from the head of the next epoch, so every index appears
    exactly once per epoch.
    """
    n = int(dataset) if isinstance(dataset, (int, np.integer)) \
        else len(dataset)
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    if batch_size > n:
        raise ValueError(f"batch_size {batch_size} exceeds dataset size {n}")
    rng = np.random.default_rng(seed)
    buffer = np.empty(0, dtype=np.int64)
    while True:
        while buffer.size < batch_size:
            buffer = np.concatenate([buffer, rng.permutation(n)])
        yield buffer[:batch_size].copy()
        buffer = buffer[batch_size:]


def dataset_csv_text(dataset):
    """CSV dump: label column (−1 when unknown) then feature columns."""
    n, d = dataset.features.shape
    if isinstance(dataset, LabeledDataset):
        labels = dataset.labels
    else:
        labels = np.full(n, -1, dtype=np.int64)
    header = "label," + ",".join(f"f{j}" for j in range(d))
    lines = [DATASET_CSV_HEADER, header]
    for i in range(n):
        row = ",".join(repr(float(v)) for v in dataset.features[i])
        lines.append(f"{labels[i]},{row}")
    return "\n".join(lines) + "\n"


def write_dataset_csv(dataset, path):
    atomic_write_text(path, dataset_csv_text(dataset))
