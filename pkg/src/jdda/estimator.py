"""Scikit-learn front end for the domain-adaptation trainer.

JDDAClassifier wraps train() in the fit/predict/transform contract so
the toolkit composes with pipelines, cross-validation and clone().
The underlying trainer is strict about batch sizes and integer labels;
the estimator smooths those edges (label encoding, batch clamping)
without changing any training semantics.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .datasets import LabeledDataset, UnlabeledDataset
from .losses import softmax
from .network import bottleneck_features, forward
from .trainer import TrainConfig, train
from .validation import as_matrix, check_feature_dim


class JDDAClassifier(ClassifierMixin, BaseEstimator):
    """Domain-adaptive classifier with joint alignment and
    discriminative feature losses.

    Fit on labeled source rows plus (optionally) unlabeled target rows.
    The learned network is shared across domains; predictions work on
    rows from either one.

    Parameters mirror TrainConfig.  ``lambda2=None`` resolves to the
    per-variant default (0.03 instance, 0.01 center).  ``X_target``
    omitted at fit time degrades to an ordinary source-only-data
    classifier: the target stream then just re-samples the source rows.

    Attributes set by fit: ``classes_``, ``params_``, ``report_``,
    ``n_features_in_``.
    """

    def __init__(self, variant="jdda_center", hidden_dims=(32, 8),
                 batch_per_domain=128, iterations=400, eta=1e-4,
                 optimizer="adam", beta1=0.9, beta2=0.999, adam_eps=1e-8,
                 lambda2=None, mu=10.0, gamma=0.5, alpha=1.0, beta=1.0,
                 m1=0.0, m2=100.0, eval_interval=50, seed=0):
        self.variant = variant
        self.hidden_dims = hidden_dims
        self.batch_per_domain = batch_per_domain
        self.iterations = iterations
        self.eta = eta
        self.optimizer = optimizer
        self.beta1 = beta1
        self.beta2 = beta2
        self.adam_eps = adam_eps
        self.lambda2 = lambda2
        self.mu = mu
        self.gamma = gamma
        self.alpha = alpha
        self.beta = beta
        self.m1 = m1
        self.m2 = m2
        self.eval_interval = eval_interval
        self.seed = seed

    def fit(self, X, y, X_target=None):
        """Train the network on source rows X with labels y.

        X_target supplies unlabeled target-domain rows for the
        alignment and discriminative losses; when None the source rows
        stand in for both streams.
        """
        X = as_matrix(X, "X")
        y = np.asarray(y)
        if y.ndim != 1:
            raise ValueError(f"y must be 1-D, got shape {y.shape}")
        if y.shape[0] != X.shape[0]:
            raise ValueError(
                f"{X.shape[0]} rows in X but {y.shape[0]} labels")
        classes, encoded = np.unique(y, return_inverse=True)
        if classes.shape[0] < 2:
            raise ValueError("fit needs at least two distinct classes")

        if X_target is None:
            target_rows = X
        else:
            target_rows = as_matrix(X_target, "X_target")
            check_feature_dim(target_rows, X.shape[1], name="X_target")

        # the trainer rejects batches larger than either domain; clamp
        # here so small datasets work with the default batch size
        batch = min(self.batch_per_domain, X.shape[0], target_rows.shape[0])
        config = TrainConfig(
            variant=self.variant,
            batch_per_domain=batch,
            iterations=self.iterations,
            eta=self.eta,
            optimizer=self.optimizer,
            beta1=self.beta1,
            beta2=self.beta2,
            adam_eps=self.adam_eps,
            lambda2=self.lambda2,
            mu=self.mu,
            gamma=self.gamma,
            alpha=self.alpha,
            beta=self.beta,
            m1=self.m1,
            m2=self.m2,
            eval_interval=self.eval_interval,
            seed=self.seed,
            hidden_dims=self.hidden_dims,
            class_count=classes.shape[0],
        )
        source = LabeledDataset(X, encoded.astype(np.int64),
                                class_count=classes.shape[0])
        target = UnlabeledDataset(target_rows,
                                  class_count=classes.shape[0])
        self.params_, self.report_ = train(config, source, target)
        self.classes_ = classes
        self.n_features_in_ = X.shape[1]
        return self

    def _validated(self, X):
        check_is_fitted(self, "params_")
        X = as_matrix(X, "X")
        check_feature_dim(X, self.n_features_in_, name="X")
        return X

    def predict_proba(self, X):
        """Class-membership probabilities, columns ordered as classes_."""
        X = self._validated(X)
        logits, _ = forward(self.params_, X)
        return softmax(logits)

    def predict(self, X):
        proba = self.predict_proba(X)
        return self.classes_[np.argmax(proba, axis=1)]

    def transform(self, X):
        """Bottleneck features, the representation both losses act on."""
        X = self._validated(X)
        return bottleneck_features(self.params_, X)
