"""Finite-difference verification of every analytic gradient.

This is both a test helper and a user-facing command: it draws small
random instances, compares each analytic gradient against central
differences, and reports the worst relative error per check.

Instances are drawn deterministically from the seed and redrawn when
they are unsuitable for finite differencing: a hinge slack or a
rectifier pre-activation within 1e-3 of its kink, an off-diagonal
pair distance near the square-root singularity of the instance loss,
a loss value large enough to push round-off past the tolerance, or a
nonzero gradient entry small enough to drown in that round-off
(exactly-zero entries are fine; the comparison floor absorbs them).
"""

from dataclasses import dataclass

import numpy as np

from .losses import (
    VARIANTS,
    CenterState,
    LossWeights,
    center_discriminative_loss,
    coral_loss,
    instance_discriminative_loss,
    source_softmax_loss,
)
from .network import forward, init_params, numeric_gradient, relative_error
from .numerics import pairwise_euclidean
from .trainer import joint_forward_backward

EPS = 1e-5
TOLERANCE = 1e-4
MAX_DRAWS = 500
KINK_MARGIN = 1e-3
MIN_PAIR_DISTANCE = 0.02
VALUE_CAP = 100.0
# nonzero analytic entries below this drown in central-difference noise
TINY_GRADIENT = 5e-4

ALL_CHECKS = ("softmax", "coral", "instance", "center", "network")


@dataclass
class CheckResult:
    name: str
    instances: int
    worst_error: float
    tolerance: float

    @property
    def passed(self):
        return self.worst_error < self.tolerance


def _usable(grads, value=None, slacks=(), preacts=()):
    if value is not None and abs(value) > VALUE_CAP:
        return False
    for s in slacks:
        if np.any(np.abs(s) <= KINK_MARGIN):
            return False
    for z in preacts:
        if np.any(np.abs(z) <= KINK_MARGIN):
            return False
    for g in grads:
        magnitude = np.abs(g)
        if np.any((magnitude > 0.0) & (magnitude < TINY_GRADIENT)):
            return False
    return True


def _exhausted(name):
    raise RuntimeError(f"could not draw a usable {name} instance")


def _check_softmax(rng):
    for _ in range(MAX_DRAWS):
        n = int(rng.integers(2, 9))
        c = int(rng.integers(2, 5))
        logits = 2.0 * rng.normal(size=(n, c))
        labels = rng.integers(0, c, size=n)
        result = source_softmax_loss(logits, labels)
        if _usable([result.grads["logits"]], value=result.value):
            break
    else:
        _exhausted("softmax")
    numeric = numeric_gradient(
        lambda: source_softmax_loss(logits, labels).value, [logits], eps=EPS)
    return relative_error(result.grads["logits"], numeric[0])


def _check_coral(rng):
    for _ in range(MAX_DRAWS):
        b = int(rng.integers(2, 9))
        dim = int(rng.integers(1, 7))
        h_s = rng.normal(size=(b, dim))
        h_t = rng.normal(size=(b, dim))
        result = coral_loss(h_s, h_t)
        grads = [result.grads["h_source"], result.grads["h_target"]]
        if _usable(grads, value=result.value):
            break
    else:
        _exhausted("coral")
    numeric = numeric_gradient(
        lambda: coral_loss(h_s, h_t).value, [h_s, h_t], eps=EPS)
    return max(relative_error(a, n) for a, n in zip(grads, numeric))


def _instance_slacks(h, labels, weights):
    dist = pairwise_euclidean(h)
    same = labels[:, None] == labels[None, :]
    off = ~np.eye(h.shape[0], dtype=bool)
    return [dist[same & off] - weights.m1,
            weights.m2 - dist[~same & off]], dist[off]


def _check_instance(rng):
    for _ in range(MAX_DRAWS):
        b = int(rng.integers(2, 9))
        dim = int(rng.integers(1, 7))
        c = int(rng.integers(1, 5))
        h = rng.normal(size=(b, dim))
        labels = rng.integers(0, c, size=b)
        m1 = float(rng.uniform(0.0, 0.3))
        weights = LossWeights(alpha=float(rng.uniform(0.5, 2.0)), m1=m1,
                              m2=m1 + float(rng.uniform(0.3, 2.0)))
        slacks, off_dists = _instance_slacks(h, labels, weights)
        if off_dists.size and off_dists.min() <= MIN_PAIR_DISTANCE:
            continue
        result = instance_discriminative_loss(h, labels, weights)
        if _usable([result.grads["h_source"]], value=result.value,
                   slacks=slacks):
            break
    else:
        _exhausted("instance")
    numeric = numeric_gradient(
        lambda: instance_discriminative_loss(h, labels, weights).value,
        [h], eps=EPS)
    return relative_error(result.grads["h_source"], numeric[0])


def _center_slacks(h, labels, centers, weights):
    to_center = h - centers.centers[labels]
    intra = np.einsum("ij,ij->i", to_center, to_center) - weights.m1
    present = np.unique(labels)
    slacks = [intra]
    if present.shape[0] >= 2:
        batch_centers = np.stack([h[labels == k].mean(axis=0)
                                  for k in present])
        d2 = pairwise_euclidean(batch_centers, squared=True)
        off = ~np.eye(present.shape[0], dtype=bool)
        slacks.append(weights.m2 - d2[off])
    return slacks


def _check_center(rng):
    for _ in range(MAX_DRAWS):
        b = int(rng.integers(2, 9))
        dim = int(rng.integers(1, 7))
        c = int(rng.integers(2, 5))
        h = rng.normal(size=(b, dim))
        labels = rng.integers(0, c, size=b)
        centers = CenterState(rng.normal(size=(c, dim)), 0.5,
                              initialized=True)
        m1 = float(rng.uniform(0.0, 0.3))
        weights = LossWeights(beta=float(rng.uniform(0.5, 2.0)), m1=m1,
                              m2=float(rng.uniform(0.5, 4.0)))
        slacks = _center_slacks(h, labels, centers, weights)
        result = center_discriminative_loss(h, labels, centers, weights)
        if _usable([result.grads["h_source"]], value=result.value,
                   slacks=slacks):
            break
    else:
        _exhausted("center")
    numeric = numeric_gradient(
        lambda: center_discriminative_loss(h, labels, centers,
                                           weights).value, [h], eps=EPS)
    return relative_error(result.grads["h_source"], numeric[0])


def _check_network(rng, variant):
    for _ in range(MAX_DRAWS):
        d = int(rng.integers(2, 5))
        hidden = int(rng.integers(3, 6))
        dim = int(rng.integers(2, 5))
        c = int(rng.integers(2, 5))
        b = int(rng.integers(2, 7))
        params = init_params([d, hidden, dim, c], rng)
        x_source = rng.normal(size=(b, d))
        y_source = rng.integers(0, c, size=b)
        x_target = None if variant == "source_only" \
            else rng.normal(size=(b, d))
        m1 = float(rng.uniform(0.0, 0.3))
        if variant == "jdda_center":
            m2 = float(rng.uniform(0.5, 4.0))
        else:
            m2 = m1 + float(rng.uniform(0.3, 2.0))
        weights = LossWeights(lambda1=float(rng.uniform(0.2, 1.0)),
                              lambda2=float(rng.uniform(0.02, 0.5)),
                              alpha=float(rng.uniform(0.5, 2.0)),
                              beta=float(rng.uniform(0.5, 2.0)),
                              m1=m1, m2=m2)
        centers = None
        if variant == "jdda_center":
            centers = CenterState(rng.normal(size=(c, dim)), 0.5,
                                  initialized=True)

        _, trace_s = forward(params, x_source)
        preacts = list(trace_s["preacts"][:-1])
        if x_target is not None:
            _, trace_t = forward(params, x_target)
            preacts += list(trace_t["preacts"][:-1])
        h_s = trace_s["bottleneck"]
        slacks = []
        if variant == "jdda_instance":
            slacks, off_dists = _instance_slacks(h_s, y_source, weights)
            if off_dists.size and off_dists.min() <= MIN_PAIR_DISTANCE:
                continue
        elif variant == "jdda_center":
            slacks = _center_slacks(h_s, y_source, centers, weights)

        loss, grads, _ = joint_forward_backward(
            params, x_source, y_source, x_target, weights, variant, centers)
        analytic = grads["weights"] + grads["biases"]
        if _usable(analytic, value=loss.value, slacks=slacks,
                   preacts=preacts):
            break
    else:
        _exhausted("network")

    def objective():
        value, _, _ = joint_forward_backward(
            params, x_source, y_source, x_target, weights, variant, centers)
        return value.value

    arrays = params["weights"] + params["biases"]
    numeric = numeric_gradient(objective, arrays, eps=EPS)
    return max(relative_error(a, n) for a, n in zip(analytic, numeric))


_SINGLE_CHECKS = {
    "softmax": _check_softmax,
    "coral": _check_coral,
    "instance": _check_instance,
    "center": _check_center,
}


def run_suite(checks=None, instances=100, seed=0):
    """Run the requested checks; returns one CheckResult per check.

    The network check cycles through all four training variants across
    its instances.
    """
    names = ALL_CHECKS if checks is None else tuple(checks)
    for name in names:
        if name not in ALL_CHECKS:
            raise ValueError(f"unknown check {name!r}; "
                             f"choose from {ALL_CHECKS}")
    if instances < 1:
        raise ValueError("instances must be positive")
    children = np.random.SeedSequence(seed).spawn(len(ALL_CHECKS))
    results = []
    for name in names:
        rng = np.random.default_rng(children[ALL_CHECKS.index(name)])
        worst = 0.0
        for i in range(instances):
            if name == "network":
                error = _check_network(rng, VARIANTS[i % len(VARIANTS)])
            else:
                error = _SINGLE_CHECKS[name](rng)
            worst = max(worst, error)
        results.append(CheckResult(name, instances, worst, TOLERANCE))
    return results


def format_results(results):
    lines = ["check     instances  worst_rel_error  tolerance  status"]
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        lines.append(f"{r.name:<9} {r.instances:>9}  {r.worst_error:>15.3e}"
                     f"  {r.tolerance:>9.0e}  {status}")
    return "\n".join(lines)
