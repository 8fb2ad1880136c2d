"""Fully connected classifier with hand-written backpropagation.

The network is a stack of linear layers with a leaky rectifier on every
hidden layer and raw logits at the top.  The last hidden activation is
the bottleneck: it is the representation the alignment and
discriminative losses act on, and ``backward`` accepts an extra
gradient that is injected at exactly that point on the way down.

Parameters travel as a plain dict (``layer_dims``, ``weights``,
``biases``) so they serialize to JSON without ceremony.
"""

import json

import numpy as np

from .fileio import atomic_write_text
from .validation import as_matrix

LEAKY_SLOPE = 0.01

CHECKPOINT_FORMAT = "jdda-params"
CHECKPOINT_VERSION = 1


def leaky_relu(z):
    return np.where(z > 0.0, z, LEAKY_SLOPE * z)


def init_params(layer_dims, seed=0):
    """Fresh parameters for the given layer sizes.

    ``layer_dims`` runs input, hidden..., classes and must contain at
    least one hidden layer (the bottleneck).  Weights are drawn uniform
    in ``[-sqrt(6/(fan_in+fan_out)), +sqrt(...)]``, biases start at
    zero.  ``seed`` may be an int or a numpy Generator.
    """
    dims = [int(d) for d in layer_dims]
    if len(dims) < 3:
        raise ValueError(
            f"layer_dims needs input, bottleneck and output sizes, got {dims}"
        )
    if any(d < 1 for d in dims):
        raise ValueError(f"layer sizes must be positive, got {dims}")
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return {"layer_dims": dims, "weights": weights, "biases": biases}


def forward(params, x):
    """Run the network on a batch.

    Returns ``(logits, trace)``.  The trace carries every layer input
    and pre-activation plus the bottleneck activations under the key
    ``"bottleneck"``; ``backward`` consumes it.
    """
    a = as_matrix(x, "inputs")
    if a.shape[1] != params["layer_dims"][0]:
        raise ValueError(
            f"inputs have {a.shape[1]} columns, network expects "
            f"{params['layer_dims'][0]}"
        )
    inputs = [a]
    preacts = []
    last = len(params["weights"]) - 1
    for k, (w, b) in enumerate(zip(params["weights"], params["biases"])):
        z = inputs[-1] @ w + b
        preacts.append(z)
        if k < last:
            inputs.append(leaky_relu(z))
    return preacts[-1], {
        "inputs": inputs,
        "preacts": preacts,
        "bottleneck": inputs[-1],
    }


def backward(params, trace, d_logits, d_bottleneck=None):
    """Backpropagate to every weight and bias.

    ``d_logits`` is the loss gradient at the output layer;
    ``d_bottleneck``, when given, is an additional loss gradient with
    respect to the bottleneck activations and is added where the
    bottleneck feeds the top layer.  Returns a dict shaped like the
    parameters.
    """
    weights = params["weights"]
    n_layers = len(weights)
    d_w = [None] * n_layers
    d_b = [None] * n_layers
    d_z = np.asarray(d_logits, dtype=np.float64)
    for k in range(n_layers - 1, -1, -1):
        d_w[k] = trace["inputs"][k].T @ d_z
        d_b[k] = d_z.sum(axis=0)
        if k == 0:
            break
        d_a = d_z @ weights[k].T
        if d_bottleneck is not None and k == n_layers - 1:
            d_a = d_a + d_bottleneck
        # derivative of the leaky rectifier at the previous pre-activation
        d_z = d_a * np.where(trace["preacts"][k - 1] > 0.0, 1.0, LEAKY_SLOPE)
    return {"weights": d_w, "biases": d_b}


def bottleneck_features(params, x):
    """Bottleneck activations for a batch, no trace kept."""
    _, trace = forward(params, x)
    return trace["bottleneck"]


class Sgd:
    """Plain gradient descent. Slow but obvious; used in descent tests."""

    def __init__(self, learning_rate):
        self.learning_rate = float(learning_rate)

    def step(self, params, grads):
        for arr, g in _param_pairs(params, grads):
            arr -= self.learning_rate * g


class Adam:
    """Adaptive moments with bias correction.

    Keeps one first- and second-moment accumulator per parameter array
    and a shared step counter.
    """

    def __init__(self, learning_rate, beta1=0.9, beta2=0.999, eps=1e-8):
        self.learning_rate = float(learning_rate)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self._m = None
        self._v = None

    def step(self, params, grads):
        pairs = list(_param_pairs(params, grads))
        if self._m is None:
            self._m = [np.zeros_like(arr) for arr, _ in pairs]
            self._v = [np.zeros_like(arr) for arr, _ in pairs]
        self.t += 1
        correct1 = 1.0 - self.beta1 ** self.t
        correct2 = 1.0 - self.beta2 ** self.t
        for (arr, g), m, v in zip(pairs, self._m, self._v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            arr -= self.learning_rate * (m / correct1) / (
                np.sqrt(v / correct2) + self.eps
            )


def _param_pairs(params, grads):
    yield from zip(params["weights"], grads["weights"])
    yield from zip(params["biases"], grads["biases"])


def make_optimizer(name, learning_rate, beta1=0.9, beta2=0.999, eps=1e-8):
    if name == "sgd":
        return Sgd(learning_rate)
    if name == "adam":
        return Adam(learning_rate, beta1=beta1, beta2=beta2, eps=eps)
    raise ValueError(f"unknown optimizer {name!r}")


def save_params(params, path):
    """Write a parameter checkpoint as JSON.

    Floats are serialized with full repr precision, so a save/load
    round trip reproduces every array bit for bit.
    """
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "layer_dims": params["layer_dims"],
        "weights": [w.tolist() for w in params["weights"]],
        "biases": [b.tolist() for b in params["biases"]],
    }
    atomic_write_text(path, json.dumps(payload))


def load_params(path):
    """Read a checkpoint written by ``save_params``."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if (
        payload.get("format") != CHECKPOINT_FORMAT
        or payload.get("version") != CHECKPOINT_VERSION
    ):
        raise ValueError(
            f"{path} is not a {CHECKPOINT_FORMAT} "
            f"v{CHECKPOINT_VERSION} checkpoint"
        )
    dims = [int(d) for d in payload["layer_dims"]]
    weights = [np.array(w, dtype=np.float64) for w in payload["weights"]]
    biases = [np.array(b, dtype=np.float64) for b in payload["biases"]]
    if len(weights) != len(dims) - 1 or len(biases) != len(dims) - 1:
        raise ValueError(f"{path}: layer count does not match layer_dims")
    for k, (w, b) in enumerate(zip(weights, biases)):
        if w.shape != (dims[k], dims[k + 1]) or b.shape != (dims[k + 1],):
            raise ValueError(f"{path}: layer {k} arrays do not match layer_dims")
    return {"layer_dims": dims, "weights": weights, "biases": biases}


def numeric_gradient(fun, arrays, eps=1e-5):
    """Central-difference gradient of a scalar function.

    ``fun`` takes no arguments and must read ``arrays`` in place; each
    entry is perturbed by +/- eps in turn.  Two evaluations per
    coordinate, so keep the arrays small.  Test and diagnostic use
    only.
    """
    grads = [np.zeros_like(a) for a in arrays]
    for a, g in zip(arrays, grads):
        for idx in np.ndindex(a.shape):
            orig = a[idx]
            a[idx] = orig + eps
            f_plus = fun()
            a[idx] = orig - eps
            f_minus = fun()
            a[idx] = orig
            g[idx] = (f_plus - f_minus) / (2.0 * eps)
    return grads


def relative_error(analytic, numeric, floor=1e-8):
    """Worst-case elementwise relative difference between two arrays.

    Denominator is ``max(|a|, |b|, floor)`` so zero gradients compare
    cleanly.
    """
    a = np.asarray(analytic, dtype=np.float64)
    b = np.asarray(numeric, dtype=np.float64)
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))
