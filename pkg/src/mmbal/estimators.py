"""scikit-learn compatible wrappers around the functional core.

Multimodal inputs are passed as a list with one ``(n_samples, n_features_k)``
array per modality.
"""
import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, ClusterMixin, TransformerMixin
from sklearn.preprocessing import LabelEncoder
from sklearn.utils.validation import check_array, check_consistent_length, check_is_fitted

from .balance import BalanceConfig
from .clustering import KMeansConfig, kmeans, sq_distances, standardize
from .data import MultimodalDataset, Split
from .exceptions import ConfigError
from .nn import mlp_forward, softmax
from .trainer import (ProbeConfig, TrainConfig, build_model_spec, extract_features, fit_linear,
                      predict_logits, train_run, unimodal_probe)


def check_modalities(X, n_modalities=None):
    """Validate a list of per-modality 2-D arrays with a common row count."""
    if isinstance(X, np.ndarray) or not hasattr(X, "__len__"):
        raise ConfigError("X must be a list with one 2-D array per modality")
    xs = [check_array(x, dtype=np.float64) for x in X]
    if n_modalities is not None and len(xs) != n_modalities:
        raise ConfigError(f"expected {n_modalities} modalities, got {len(xs)}")
    check_consistent_length(*xs)
    return xs


class LloydKMeans(ClusterMixin, BaseEstimator):
    """Lloyd k-means with best-of-``n_init`` random sample seeding."""

    def __init__(self, n_clusters=8, max_iter=100, n_init=5, tol=1e-6, standardize=False, random_state=0):
        self.n_clusters = n_clusters
        self.max_iter = max_iter
        self.n_init = n_init
        self.tol = tol
        self.standardize = standardize
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        cfg = KMeansConfig(self.n_clusters, self.max_iter, self.n_init, self.random_state or 0,
                           self.tol, self.standardize)
        res = kmeans(X, cfg)
        self.labels_ = res.assignments
        self.cluster_centers_ = res.centroids
        self.inertia_ = res.inertia
        self.n_iter_ = res.iterations
        self.converged_ = res.converged
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "cluster_centers_")
        X = check_array(X, dtype=np.float64)
        if self.standardize:
            X = standardize(X)
        return np.argmin(sq_distances(X, self.cluster_centers_), axis=1)


class LinearProbe(ClassifierMixin, BaseEstimator):
    """Softmax-regression probe trained with SGD-momentum."""

    def __init__(self, epochs=50, lr=1e-2, momentum=0.9, batch_size=32, random_state=0):
        self.epochs = epochs
        self.lr = lr
        self.momentum = momentum
        self.batch_size = batch_size
        self.random_state = random_state

    def fit(self, X, y):
        X = check_array(X, dtype=np.float64)
        check_consistent_length(X, y)
        self._le = LabelEncoder().fit(y)
        self.classes_ = self._le.classes_
        cfg = ProbeConfig(self.epochs, self.lr, self.momentum, self.batch_size, self.random_state or 0)
        self.spec_, self.params_ = fit_linear(X, self._le.transform(y), max(len(self.classes_), 2), cfg)
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=np.float64)
        return softmax(mlp_forward(self.spec_, self.params_, X)[0])[:, :len(self.classes_)]

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]


class MultimodalClassifier(ClassifierMixin, TransformerMixin, BaseEstimator):
    """Late-fusion MLP classifier with optional Diagnosing & Re-learning.

    Parameters mirror :class:`mmbal.trainer.TrainConfig`. With ``balance=False``
    the estimator is the plain joint-training baseline. Balancing requires
    ``X_val``/``y_val`` at fit time; ``X_test``/``y_test`` are only used to
    fill the per-epoch metrics in ``history_``.

    ``transform`` returns the concatenated (fused) encoder features.
    """

    def __init__(self, hidden_dims=(64,), feature_dim=32, unimodal_heads=False, epochs=100,
                 batch_size=32, lr=1e-3, momentum=0.9, balance=True, period=20, lam=3.0,
                 squash="tanh", reset_momentum=True, kmeans_restarts=5, kmeans_max_iter=100,
                 eval_every=1, random_state=0):
        self.hidden_dims = hidden_dims
        self.feature_dim = feature_dim
        self.unimodal_heads = unimodal_heads
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.momentum = momentum
        self.balance = balance
        self.period = period
        self.lam = lam
        self.squash = squash
        self.reset_momentum = reset_momentum
        self.kmeans_restarts = kmeans_restarts
        self.kmeans_max_iter = kmeans_max_iter
        self.eval_every = eval_every
        self.random_state = random_state

    def _train_config(self):
        bal = None
        if self.balance:
            bal = BalanceConfig(self.period, self.lam, self.squash, self.reset_momentum)
        return TrainConfig(self.epochs, self.batch_size, self.lr, self.momentum, self.random_state or 0,
                           bal, self.eval_every, self.kmeans_max_iter, self.kmeans_restarts)

    def fit(self, X, y, X_val=None, y_val=None, X_test=None, y_test=None):
        xs = check_modalities(X)
        check_consistent_length(xs[0], y)
        self._le = LabelEncoder().fit(y)
        self.classes_ = self._le.classes_
        num_classes = max(len(self.classes_), 2)
        cfg = self._train_config()
        splits = {"train": Split(self._le.transform(y), xs)}
        for name, xv, yv in (("val", X_val, y_val), ("test", X_test, y_test)):
            if xv is not None:
                xv = check_modalities(xv, len(xs))
                check_consistent_length(xv[0], yv)
                splits[name] = Split(self._le.transform(yv), xv)
        if cfg.balance is not None and "val" not in splits:
            raise ConfigError("balance=True needs X_val and y_val for purity diagnosis")
        self.model_spec_ = build_model_spec([x.shape[1] for x in xs], num_classes, self.hidden_dims,
                                            self.feature_dim, self.unimodal_heads)
        result = train_run(MultimodalDataset(num_classes, splits), self.model_spec_, cfg)
        self.params_ = result.params
        self.init_params_ = result.init_params
        self.history_ = result.records
        self.n_modalities_ = len(xs)
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "params_")
        xs = check_modalities(X, self.n_modalities_)
        proba = softmax(predict_logits(self.model_spec_, self.params_, xs))
        return proba[:, :len(self.classes_)]

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]

    def encode(self, X, modality):
        """Features of one modality's encoder."""
        check_is_fitted(self, "params_")
        x = check_array(X, dtype=np.float64)
        return extract_features(self.model_spec_.encoders[modality], self.params_[f"enc{modality}"], x)

    def transform(self, X):
        xs = check_modalities(X, getattr(self, "n_modalities_", None))
        return np.concatenate([self.encode(x, k) for k, x in enumerate(xs)], axis=1)

    def probe(self, modality, X_train, y_train, X_test, y_test, **probe_params):
        """Linear-probe one frozen encoder; returns test ``(accuracy, macro_f1)``."""
        check_is_fitted(self, "params_")
        cfg = ProbeConfig(**{"seed": self.random_state or 0, **probe_params})
        return unimodal_probe(self.model_spec_.encoders[modality], self.params_[f"enc{modality}"],
                              check_array(X_train), self._le.transform(y_train), check_array(X_test),
                              self._le.transform(y_test), len(self.classes_), cfg)
