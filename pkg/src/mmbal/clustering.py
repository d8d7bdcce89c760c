"""Lloyd's k-means and clustering purity."""
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, InputError


@dataclass(frozen=True)
class KMeansConfig:
    k: int
    max_iters: int = 100
    restarts: int = 5
    seed: int = 0
    tol: float = 1e-6
    standardize: bool = False

    def __post_init__(self):
        if self.k < 1 or self.max_iters < 1 or self.restarts < 1:
            raise ConfigError("k, max_iters and restarts must all be >= 1")
        if self.tol < 0:
            raise ConfigError(f"tol must be non-negative, got {self.tol}")


@dataclass
class ClusterResult:
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    iterations: int
    converged: bool
    inertia_history: list = None  # inertia after each assignment step


def _check_features(features, k):
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise InputError(f"features must be a 2-D matrix, got shape {x.shape}")
    if x.shape[0] < k:
        raise InputError(f"cannot form {k} clusters from {x.shape[0]} samples")
    if not np.all(np.isfinite(x)):
        raise InputError("features contain non-finite values")
    return x


def sq_distances(x, centroids):
    # (n, k) squared Euclidean distances, summed in fixed feature order.
    diff = x[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def standardize(x):
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std[std == 0] = 1.0
    return (x - mean) / std


def _assign(x, centroids):
    d = sq_distances(x, centroids)
    # argmin returns the first minimum: ties go to the lowest cluster index.
    a = np.argmin(d, axis=1)
    return a, d[np.arange(x.shape[0]), a]


def _update(x, assignments, centroids, dist):
    k = centroids.shape[0]
    counts = np.bincount(assignments, minlength=k)
    new = np.zeros_like(centroids)
    np.add.at(new, assignments, x)
    nonempty = counts > 0
    new[nonempty] /= counts[nonempty, None]
    empty = np.flatnonzero(~nonempty)
    if empty.size:
        # Reseed each empty cluster at the sample farthest from its centroid.
        order = np.argsort(-dist, kind="stable")
        for c, i in zip(empty, order):
            new[c] = x[i]
    return new


def lloyd(features, init_centroids, max_iters=100, tol=1e-6):
    """Run Lloyd iterations from explicit starting centroids."""
    x = np.asarray(features, dtype=np.float64)
    centroids = np.array(init_centroids, dtype=np.float64)
    prev = None
    converged = False
    iterations = 0
    history = []
    for iterations in range(1, max_iters + 1):
        assignments, dist = _assign(x, centroids)
        history.append(float(dist.sum()))
        if prev is not None and np.array_equal(assignments, prev):
            converged = True
            break
        new = _update(x, assignments, centroids, dist)
        shift = np.sqrt(((new - centroids) ** 2).sum(axis=1)).max()
        centroids = new
        prev = assignments
        if shift < tol:
            converged = True
            break
    assignments, dist = _assign(x, centroids)
    history.append(float(dist.sum()))
    return ClusterResult(assignments, centroids, history[-1], iterations, converged, history)


def kmeans(features, cfg):
    """Best-of-``cfg.restarts`` Lloyd k-means seeded from distinct random samples."""
    x = _check_features(features, cfg.k)
    if cfg.standardize:
        x = standardize(x)
    rng = np.random.default_rng(cfg.seed)
    best = None
    for _ in range(cfg.restarts):
        idx = rng.choice(x.shape[0], size=cfg.k, replace=False)
        res = lloyd(x, x[idx], cfg.max_iters, cfg.tol)
        if best is None or res.inertia < best.inertia:
            best = res
    return best


def purity(assignments, labels, num_classes=None):
    """Fraction of samples that belong to the majority class of their cluster."""
    a = np.asarray(assignments, dtype=np.int64)
    y = np.asarray(labels, dtype=np.int64)
    if a.ndim != 1 or a.shape != y.shape:
        raise InputError("assignments and labels must be 1-D arrays of equal length")
    if a.size == 0:
        raise InputError("purity is undefined for zero samples")
    if a.min() < 0 or y.min() < 0:
        raise InputError("cluster and class indices must be non-negative")
    if num_classes is None:
        num_classes = int(y.max()) + 1
    elif y.max() >= num_classes:
        raise InputError(f"label {y.max()} out of range for {num_classes} classes")
    table = np.zeros((int(a.max()) + 1, num_classes), dtype=np.int64)
    np.add.at(table, (a, y), 1)
    return float(table.max(axis=1).sum() / a.size)
