"""Diagnosing & Re-learning: purity-gap learning-state estimates per modality and
soft re-initialization of the uni-modal encoders.
"""
from dataclasses import asdict, dataclass

import numpy as np

from .clustering import KMeansConfig, kmeans, purity
from .exceptions import ConfigError, InputError
from .nn import check_congruent, interpolate_params

SQUASHES = ("tanh", "clipped_linear")
CLIP_EPS = 1e-6
ALPHA_MAX = float(np.nextafter(1.0, 0.0))


@dataclass(frozen=True)
class BalanceConfig:
    period: int = 20
    lam: float = 3.0
    squash: str = "tanh"
    reset_momentum: bool = True
    # Test hook: permits lam <= 1 (e.g. lam=0 for no-op equivalence checks).
    allow_any_lambda: bool = False

    def __post_init__(self):
        if self.period < 1:
            raise ConfigError(f"period must be >= 1, got {self.period}")
        if self.squash not in SQUASHES:
            raise ConfigError(f"squash must be one of {SQUASHES}, got {self.squash!r}")
        if self.allow_any_lambda:
            if self.lam < 0:
                raise ConfigError(f"lambda must be non-negative, got {self.lam}")
        elif not self.lam > 1:
            raise ConfigError(f"lambda must be > 1, got {self.lam}")


@dataclass
class ModalityDiagnosis:
    modality: int
    purity_train: float
    purity_val: float
    gap: float
    alpha: float
    epoch: int = 0

    def to_dict(self):
        d = asdict(self)
        d.pop("epoch")
        return d


def purity_gap(p_train, p_val):
    for p in (p_train, p_val):
        if not 0.0 < p <= 1.0:
            raise InputError(f"purity must lie in (0, 1], got {p}")
    return abs(p_train - p_val)


def strength(gap, lam, squash="tanh"):
    """Map a purity gap to a re-initialization strength in [0, 1)."""
    if gap < 0:
        raise InputError(f"gap must be non-negative, got {gap}")
    if lam < 0:
        raise InputError(f"lambda must be non-negative, got {lam}")
    x = lam * gap
    if squash == "tanh":
        # tanh(x) rounds to 1.0 for x > ~19; keep the strength strictly below 1.
        return float(min(np.tanh(x), ALPHA_MAX))
    if squash == "clipped_linear":
        return float(min(x, 1.0 - CLIP_EPS))
    raise ConfigError(f"unknown squash {squash!r}")


def diagnose_modality(train_feats, val_feats, train_labels, val_labels, num_classes,
                      kmeans_cfg, balance_cfg, modality=0, epoch=0, val_seed=None):
    """Cluster train and validation features separately and compare their purity.

    ``kmeans_cfg.k`` is forced to ``num_classes``. The validation clustering
    uses ``val_seed`` (default: ``kmeans_cfg.seed + 1``) so that it does not
    share its seeding with the training clustering.
    """
    if kmeans_cfg.k != num_classes:
        kmeans_cfg = KMeansConfig(num_classes, kmeans_cfg.max_iters, kmeans_cfg.restarts,
                                  kmeans_cfg.seed, kmeans_cfg.tol, kmeans_cfg.standardize)
    for feats, labels, name in ((train_feats, train_labels, "train"), (val_feats, val_labels, "val")):
        if np.shape(feats)[0] != np.shape(labels)[0]:
            raise InputError(f"{name} features and labels have different lengths")
    res_train = kmeans(train_feats, kmeans_cfg)
    val_cfg = KMeansConfig(num_classes, kmeans_cfg.max_iters, kmeans_cfg.restarts,
                           kmeans_cfg.seed + 1 if val_seed is None else val_seed,
                           kmeans_cfg.tol, kmeans_cfg.standardize)
    res_val = kmeans(val_feats, val_cfg)
    p_train = purity(res_train.assignments, train_labels, num_classes)
    p_val = purity(res_val.assignments, val_labels, num_classes)
    gap = purity_gap(p_train, p_val)
    alpha = strength(gap, balance_cfg.lam, balance_cfg.squash)
    return ModalityDiagnosis(modality, p_train, p_val, gap, alpha, epoch)


def apply_relearn(encoders, diagnoses, velocities=None, cfg=None):
    """Softly re-initialize every encoder toward its initial parameters.

    ``encoders`` is a list of ``(current, init)`` snapshot pairs, one per
    modality, and ``velocities`` the matching optimizer momentum buffers.
    Returns ``(new_params, new_velocities)`` lists. Velocity of an encoder is
    zeroed when it is actually moved (alpha > 0) and ``cfg.reset_momentum``.
    """
    if len(encoders) != len(diagnoses):
        raise ConfigError(f"{len(encoders)} encoders but {len(diagnoses)} diagnoses")
    if velocities is not None and len(velocities) != len(encoders):
        raise ConfigError("one velocity snapshot per encoder is required")
    reset = cfg.reset_momentum if cfg is not None else True
    new_params, new_vel = [], []
    for k, ((current, init), diag) in enumerate(zip(encoders, diagnoses)):
        new_params.append(interpolate_params(current, init, diag.alpha))
        if velocities is None:
            continue
        vel = velocities[k]
        check_congruent(current, vel, "encoder params and velocity")
        if reset and diag.alpha > 0:
            vel = {name: np.zeros_like(v) for name, v in vel.items()}
        new_vel.append(vel)
    return new_params, (new_vel if velocities is not None else None)


def schedule_should_fire(epoch, period):
    if epoch < 0 or period < 1:
        raise ConfigError("epoch must be >= 0 and period >= 1")
    return epoch % period == 0
