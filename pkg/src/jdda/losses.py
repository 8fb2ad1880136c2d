"""The four training losses with closed-form values and gradients.

Every loss returns a LossValue bundling the scalar, the gradients with
respect to the feature or logit inputs it was given, and a count of the
pair terms it evaluated (the cost model the complexity tests assert
against).  Gradients here are exact derivatives of the stated formulas;
the finite-difference suite checks them entry by entry.

Conventions, fixed across the package:

* The alignment loss compares unnormalized centered covariances
  (``Hc.T @ Hc`` with no ``1/(b-1)``) and scales by ``1/(4 L^2)`` where
  ``L`` is the bottleneck width.
* The instance loss hinges unsquared pairwise distances against the
  margins and squares the hinge; it runs over the full b x b matrix, so
  each unordered pair is counted twice and the diagonal (always zero
  for m1 >= 0) is included.
* The center loss hinges squared distances and does not square the
  hinge.  Sample-to-center terms use the global centers, which are
  constants for backpropagation; the separation term uses batch class
  centers, which are differentiable means of the current batch.
* Hinges use the strict-slack subgradient: exactly at the kink the
  gradient contribution is zero.
"""

from dataclasses import dataclass, field

import numpy as np

from .numerics import centered_covariance, frobenius_sq, pairwise_euclidean
from .validation import as_labels, as_matrix


@dataclass
class LossWeights:
    """Weights and margins for the joint objective."""

    lambda1: float = 1.0
    lambda2: float = 0.0
    alpha: float = 1.0
    beta: float = 1.0
    m1: float = 0.0
    m2: float = 100.0

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "alpha", "beta", "m1", "m2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.m2 < self.m1:
            raise ValueError("m2 must be at least m1")


@dataclass
class LossValue:
    """Scalar loss, gradients per supplied input, and a term counter."""

    value: float
    grads: dict
    pair_terms: int = 0
    components: dict = field(default_factory=dict)


@dataclass
class CenterState:
    """Global class centers and their update rate.

    ``initialized`` is False until the first update call, which seeds
    the centers of the classes present in that batch with their batch
    means.
    """

    centers: np.ndarray
    gamma: float
    initialized: bool = False

    def __post_init__(self):
        self.centers = as_matrix(self.centers, "centers")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")

    @property
    def class_count(self):
        return self.centers.shape[0]


def init_centers(class_count, feature_dim, gamma=0.5):
    """Fresh all-zero, uninitialized center state."""
    if class_count < 1 or feature_dim < 1:
        raise ValueError("class_count and feature_dim must be positive")
    return CenterState(np.zeros((class_count, feature_dim)), gamma)


def softmax(logits):
    """Row-wise softmax, stabilized by subtracting the row max."""
    z = as_matrix(logits, "logits")
    shifted = z - z.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def source_softmax_loss(logits, labels):
    """Mean softmax cross-entropy over the batch.

    Gradient with respect to the logits is (softmax - onehot) / n.
    """
    z = as_matrix(logits, "logits")
    n, c = z.shape
    y = as_labels(labels, class_count=c)
    if y.shape[0] != n:
        raise ValueError(f"got {n} logit rows but {y.shape[0]} labels")
    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    value = float(np.mean(log_norm - shifted[np.arange(n), y]))
    grad = softmax(z)
    grad[np.arange(n), y] -= 1.0
    grad /= n
    return LossValue(value, {"logits": grad})


def coral_loss(h_source, h_target):
    """Squared Frobenius distance between the domain covariances.

    Value is ||Cov(Hs) - Cov(Ht)||_F^2 / (4 L^2) with the unnormalized
    centered covariances; gradients are returned for both feature
    batches.  Symmetric in its arguments up to the gradient signs.
    """
    hs = as_matrix(h_source, "h_source")
    ht = as_matrix(h_target, "h_target")
    if hs.shape != ht.shape:
        raise ValueError(
            f"h_source {hs.shape} and h_target {ht.shape} must match"
        )
    dim = hs.shape[1]
    diff = centered_covariance(hs) - centered_covariance(ht)
    value = frobenius_sq(diff) / (4.0 * dim * dim)
    # d value / d Cov = diff / (2 L^2); d Cov / dH chains to the
    # centered features, so dH = Hc @ diff / L^2 with opposite signs
    hs_c = hs - hs.mean(axis=0, keepdims=True)
    ht_c = ht - ht.mean(axis=0, keepdims=True)
    scale = 1.0 / (dim * dim)
    return LossValue(
        value,
        {"h_source": scale * (hs_c @ diff), "h_target": -scale * (ht_c @ diff)},
    )


def instance_discriminative_loss(h_source, labels, weights):
    """Pairwise hinge loss pulling same-class features together and
    pushing different-class features at least m2 apart.

    Over the full b x b distance matrix:
    alpha * sum(same * max(0, D - m1)^2) + sum(diff * max(0, m2 - D)^2)
    where D holds unsquared distances.  Ordered pairs are both counted
    and the diagonal contributes zero.  Gradient is returned for the
    features; coincident cross-class pairs sit at a kink of D and get a
    zero gradient contribution.
    """
    h = as_matrix(h_source, "h_source")
    y = as_labels(labels)
    if y.shape[0] != h.shape[0]:
        raise ValueError(f"got {h.shape[0]} feature rows but {y.shape[0]} labels")
    b = h.shape[0]
    dist = pairwise_euclidean(h)
    same = (y[:, None] == y[None, :]).astype(np.float64)
    intra = np.maximum(0.0, dist - weights.m1)
    inter = np.maximum(0.0, weights.m2 - dist)
    value = float(
        weights.alpha * np.sum(same * intra * intra)
        + np.sum((1.0 - same) * inter * inter)
    )
    # d value / d D_ij, then through d D_ij / d h = (h_i - h_j) / D_ij
    d_dist = 2.0 * weights.alpha * same * intra - 2.0 * (1.0 - same) * inter
    safe = np.where(dist > 0.0, dist, 1.0)
    ratio = np.where(dist > 0.0, d_dist / safe, 0.0)
    grad = 2.0 * (ratio.sum(axis=1)[:, None] * h - ratio @ h)
    return LossValue(value, {"h_source": grad}, pair_terms=b * b)


def center_discriminative_loss(h_source, labels, centers, weights):
    """Center-based compactness plus batch-center separation.

    Intra term: beta * sum_i max(0, ||h_i - c_{y_i}||^2 - m1) against
    the global centers, which backpropagation treats as constants.
    Inter term: sum over ordered pairs of classes present in the batch
    of max(0, m2 - ||chat_k - chat_l||^2), where chat are batch class
    means and do carry gradient.  Distances here are squared and the
    hinges are not squared.
    """
    h = as_matrix(h_source, "h_source")
    y = as_labels(labels, class_count=centers.class_count)
    if y.shape[0] != h.shape[0]:
        raise ValueError(f"got {h.shape[0]} feature rows but {y.shape[0]} labels")
    if not centers.initialized:
        raise ValueError("centers must be initialized before the loss is used")
    b = h.shape[0]

    to_center = h - centers.centers[y]
    slack = np.einsum("ij,ij->i", to_center, to_center) - weights.m1
    active = slack > 0.0
    intra_value = weights.beta * float(slack[active].sum())
    grad = np.zeros_like(h)
    grad[active] = 2.0 * weights.beta * to_center[active]

    present = np.unique(y)
    p = present.shape[0]
    inter_value = 0.0
    if p >= 2:
        batch_centers = np.stack([h[y == k].mean(axis=0) for k in present])
        counts = np.array([(y == k).sum() for k in present], dtype=np.float64)
        d2 = pairwise_euclidean(batch_centers, squared=True)
        hinge = np.maximum(0.0, weights.m2 - d2)
        np.fill_diagonal(hinge, 0.0)
        inter_value = float(hinge.sum())
        active_pairs = (hinge > 0.0).astype(np.float64)
        np.fill_diagonal(active_pairs, 0.0)
        # each ordered pair contributes -2 (chat_k - chat_l); both orders
        # of an unordered pair land on chat_k, hence the factor 4
        d_centers = -4.0 * (
            active_pairs.sum(axis=1)[:, None] * batch_centers
            - active_pairs @ batch_centers
        )
        for idx, k in enumerate(present):
            grad[y == k] += d_centers[idx] / counts[idx]

    value = intra_value + inter_value
    return LossValue(value, {"h_source": grad}, pair_terms=b + p * (p - 1))


def update_centers(state, h_source, labels):
    """Move each present class center toward its batch mean.

    First call seeds present classes with their batch means.  After
    that each present class moves by gamma times the averaged
    residual: delta_j = sum(c_j - h_i) / (1 + n_j) over the class
    members.  Absent classes never move.  The state is updated in
    place and returned.
    """
    h = as_matrix(h_source, "h_source")
    y = as_labels(labels, class_count=state.class_count)
    if y.shape[0] != h.shape[0]:
        raise ValueError(f"got {h.shape[0]} feature rows but {y.shape[0]} labels")
    if h.shape[1] != state.centers.shape[1]:
        raise ValueError(
            f"features have {h.shape[1]} columns, centers have "
            f"{state.centers.shape[1]}"
        )
    present = np.unique(y)
    if not state.initialized:
        for k in present:
            state.centers[k] = h[y == k].mean(axis=0)
        state.initialized = True
        return state
    for k in present:
        members = h[y == k]
        n_k = members.shape[0]
        delta = (n_k * state.centers[k] - members.sum(axis=0)) / (1.0 + n_k)
        state.centers[k] -= state.gamma * delta
    return state


VARIANTS = ("source_only", "coral_only", "jdda_instance", "jdda_center")


def joint_loss(logits, h_source, h_target, labels, weights, variant,
               centers=None):
    """Total training objective for one batch pair.

    source term + lambda1 * alignment term + lambda2 * discriminative
    term, with the last two gated by the variant.  ``h_target`` may be
    None only when the variant is source_only.  Gradients are routed to
    the logits and to both feature batches; ``components`` carries the
    raw (unweighted) sub-loss values for reporting.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if variant == "jdda_center" and centers is None:
        raise ValueError("jdda_center requires a CenterState")

    src = source_softmax_loss(logits, labels)
    value = src.value
    grads = {"logits": src.grads["logits"]}
    components = {"source": src.value, "coral": 0.0, "discriminative": 0.0}
    pair_terms = 0

    h = as_matrix(h_source, "h_source")
    grads["h_source"] = np.zeros_like(h)

    if variant != "source_only":
        if h_target is None:
            raise ValueError(f"variant {variant} needs target features")
        coral = coral_loss(h, h_target)
        components["coral"] = coral.value
        value += weights.lambda1 * coral.value
        grads["h_source"] += weights.lambda1 * coral.grads["h_source"]
        grads["h_target"] = weights.lambda1 * coral.grads["h_target"]

    if variant == "jdda_instance":
        disc = instance_discriminative_loss(h, labels, weights)
    elif variant == "jdda_center":
        disc = center_discriminative_loss(h, labels, centers, weights)
    else:
        disc = None
    if disc is not None:
        components["discriminative"] = disc.value
        value += weights.lambda2 * disc.value
        grads["h_source"] += weights.lambda2 * disc.grads["h_source"]
        pair_terms = disc.pair_terms

    return LossValue(float(value), grads, pair_terms=pair_terms,
                     components=components)
