"""Late-fusion multimodal model, the training loop with Diagnosing & Re-learning,
evaluation metrics and the uni-modal linear probe.

Model parameters are a dict of parameter groups: ``enc{k}`` for the encoder of
modality k, ``clf`` for the fused classifier and ``head{k}`` for the optional
uni-modal auxiliary classifiers. Each group is a parameter snapshot as used by
:mod:`mmbal.nn`.
"""
import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.metrics import accuracy_score, f1_score

from .balance import BalanceConfig, apply_relearn, diagnose_modality, schedule_should_fire
from .clustering import KMeansConfig
from .exceptions import ConfigError, InputError
from .nn import (MLPSpec, copy_params, init_mlp, mlp_backward, mlp_forward,
                 sgd_momentum_step, softmax_cross_entropy, zeros_like)
from .rng import substream


@dataclass(frozen=True)
class ModelSpec:
    encoders: tuple
    num_classes: int
    fusion: str = "concat"
    unimodal_heads: bool = False

    def __post_init__(self):
        object.__setattr__(self, "encoders", tuple(self.encoders))
        if len(self.encoders) < 2:
            raise ConfigError("a multimodal model needs at least 2 encoders")
        if self.num_classes < 2:
            raise ConfigError("need at least 2 classes")
        if self.fusion != "concat":
            raise ConfigError(f"unsupported fusion {self.fusion!r}")

    @property
    def n_modalities(self):
        return len(self.encoders)

    @property
    def classifier(self):
        return MLPSpec(sum(e.output_dim for e in self.encoders), (), self.num_classes)

    def head(self, k):
        return MLPSpec(self.encoders[k].output_dim, (), self.num_classes)

    def group_specs(self):
        specs = {f"enc{k}": e for k, e in enumerate(self.encoders)}
        specs["clf"] = self.classifier
        if self.unimodal_heads:
            for k in range(self.n_modalities):
                specs[f"head{k}"] = self.head(k)
        return specs


def build_model_spec(input_dims, num_classes, hidden_dims=(64,), feature_dim=32, unimodal_heads=False):
    encoders = [MLPSpec(d, tuple(hidden_dims), feature_dim) for d in input_dims]
    return ModelSpec(tuple(encoders), num_classes, unimodal_heads=unimodal_heads)


@dataclass(frozen=True)
class ProbeConfig:
    epochs: int = 50
    lr: float = 1e-2
    momentum: float = 0.9
    batch_size: int = 32
    seed: int = 0


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    lr: float = 1e-3
    momentum: float = 0.9
    seed: int = 0
    balance: BalanceConfig = None
    eval_every: int = 1
    kmeans_max_iters: int = 100
    kmeans_restarts: int = 5
    kmeans_tol: float = 1e-6
    kmeans_standardize: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if not self.lr > 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.batch_size < 1 or self.eval_every < 1:
            raise ConfigError("batch_size and eval_every must be >= 1")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"momentum must lie in [0, 1), got {self.momentum}")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    test_acc: float
    test_macro_f1: float
    diagnoses: list = field(default_factory=list)

    def to_dict(self):
        return {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "test_acc": self.test_acc,
            "test_macro_f1": self.test_macro_f1,
            "diagnoses": [d.to_dict() for d in self.diagnoses],
        }

    def to_json(self):
        return json.dumps(self.to_dict())


@dataclass
class TrainResult:
    params: dict
    init_params: dict
    records: list


def init_model(model, seed):
    rng = substream(seed, "init")
    return {name: init_mlp(spec, rng) for name, spec in model.group_specs().items()}


def check_inputs(model, xs):
    if len(xs) != model.n_modalities:
        raise ConfigError(f"model has {model.n_modalities} encoders but got {len(xs)} modalities")
    for k, (x, enc) in enumerate(zip(xs, model.encoders)):
        if np.ndim(x) != 2 or np.shape(x)[1] != enc.input_dim:
            raise ConfigError(f"modality {k} has shape {np.shape(x)}, encoder expects {enc.input_dim} columns")


def forward(model, params, xs):
    """Return fused logits, per-modality features and the caches for backprop."""
    feats, caches = [], []
    for k, x in enumerate(xs):
        f, c = mlp_forward(model.encoders[k], params[f"enc{k}"], x)
        feats.append(f)
        caches.append(c)
    fused = np.concatenate(feats, axis=1)
    logits, clf_cache = mlp_forward(model.classifier, params["clf"], fused)
    return logits, feats, (caches, clf_cache)


def loss_and_grads(model, params, xs, y):
    """Summed loss (fused CE plus unit-weight uni-modal CE terms) and its gradients."""
    logits, feats, (enc_caches, clf_cache) = forward(model, params, xs)
    loss, dlogits = softmax_cross_entropy(logits, y)
    grads = {}
    grads["clf"], dfused = mlp_backward(clf_cache, dlogits)
    splits = np.cumsum([e.output_dim for e in model.encoders])[:-1]
    dfeats = np.split(dfused, splits, axis=1)
    if model.unimodal_heads:
        for k, f in enumerate(feats):
            head_logits, hc = mlp_forward(model.head(k), params[f"head{k}"], f)
            head_loss, dh = softmax_cross_entropy(head_logits, y)
            loss += head_loss
            grads[f"head{k}"], df = mlp_backward(hc, dh)
            dfeats[k] = dfeats[k] + df
    for k, c in enumerate(enc_caches):
        grads[f"enc{k}"], _ = mlp_backward(c, dfeats[k])
    return loss, {name: grads[name] for name in params}


def predict_logits(model, params, xs):
    return forward(model, params, xs)[0]


def extract_features(encoder_spec, encoder_params, x):
    """Encoder output for every row of ``x``, in row order."""
    return mlp_forward(encoder_spec, encoder_params, x)[0]


def classification_metrics(y_true, y_pred, num_classes):
    y_true = np.asarray(y_true)
    if y_true.size == 0:
        raise InputError("cannot evaluate on an empty split")
    acc = accuracy_score(y_true, y_pred)
    f1 = f1_score(y_true, y_pred, labels=list(range(num_classes)), average="macro", zero_division=0)
    return float(acc), float(f1)


def evaluate(params, model, split):
    """Accuracy and macro-F1 of the fused classifier on a data split."""
    if len(split) == 0:
        raise InputError("cannot evaluate on an empty split")
    check_inputs(model, split.features)
    pred = np.argmax(predict_logits(model, params, split.features), axis=1)
    return classification_metrics(split.labels, pred, model.num_classes)


def _sgd_groups(params, grads, velocity, lr, momentum):
    new_p, new_v = {}, {}
    for name in params:
        new_p[name], new_v[name] = sgd_momentum_step(params[name], grads[name], velocity[name], lr, momentum)
    return new_p, new_v


def _minibatches(n, batch_size, rng):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def _stream_seed(seed, name, *keys):
    return int(substream(seed, name, *keys).integers(0, 2**63 - 1))


def diagnose_all(model, params, data, cfg, epoch):
    """Diagnose every modality on the full train and validation splits."""
    train, val = data["train"], data["val"]
    out = []
    for k, enc in enumerate(model.encoders):
        f_train = extract_features(enc, params[f"enc{k}"], train.features[k])
        f_val = extract_features(enc, params[f"enc{k}"], val.features[k])
        kcfg = KMeansConfig(model.num_classes, cfg.kmeans_max_iters, cfg.kmeans_restarts,
                            _stream_seed(cfg.seed, "kmeans", epoch, k, 0), cfg.kmeans_tol,
                            cfg.kmeans_standardize)
        out.append(diagnose_modality(f_train, f_val, train.labels, val.labels, model.num_classes,
                                     kcfg, cfg.balance, modality=k, epoch=epoch,
                                     val_seed=_stream_seed(cfg.seed, "kmeans", epoch, k, 1)))
    return out


def train_run(data, model, cfg, on_record=None, params=None):
    """Train ``model`` on ``data`` and return a :class:`TrainResult`.

    Each epoch runs shuffled mini-batch SGD over the train split. When
    ``cfg.balance`` is set and the epoch index is a multiple of its period,
    every modality is diagnosed and its encoder softly re-initialized before
    the epoch's metrics are taken. ``on_record`` is called with each
    :class:`EpochRecord` as soon as it is produced.
    """
    train = data["train"]
    check_inputs(model, train.features)
    if cfg.balance is not None and "val" not in data.splits:
        raise ConfigError("balancing needs a validation split")
    if params is None:
        params = init_model(model, cfg.seed)
    init_params = {name: copy_params(g) for name, g in params.items()}
    velocity = {name: zeros_like(g) for name, g in params.items()}
    n = len(train)
    eval_split = data.splits.get("test")
    records = []

    for t in range(cfg.epochs):
        rng = substream(cfg.seed, "shuffle", t)
        total = 0.0
        for idx in _minibatches(n, cfg.batch_size, rng):
            xs = [f[idx] for f in train.features]
            loss, grads = loss_and_grads(model, params, xs, train.labels[idx])
            params, velocity = _sgd_groups(params, grads, velocity, cfg.lr, cfg.momentum)
            total += loss * idx.size
        train_loss = total / n

        diagnoses = []
        bal = cfg.balance
        # lambda == 0 makes every strength exactly 0, so the event is a no-op.
        if bal is not None and bal.lam > 0 and schedule_should_fire(t, bal.period):
            diagnoses = diagnose_all(model, params, data, cfg, t)
            keys = [f"enc{k}" for k in range(model.n_modalities)]
            new_enc, new_vel = apply_relearn(
                [(params[key], init_params[key]) for key in keys], diagnoses,
                [velocity[key] for key in keys], bal)
            params = {**params, **dict(zip(keys, new_enc))}
            velocity = {**velocity, **dict(zip(keys, new_vel))}

        if t % cfg.eval_every == 0 or t == cfg.epochs - 1 or diagnoses:
            if eval_split is not None:
                acc, f1 = evaluate(params, model, eval_split)
            else:
                acc, f1 = float("nan"), float("nan")
            rec = EpochRecord(t, float(train_loss), acc, f1, diagnoses)
            records.append(rec)
            if on_record is not None:
                on_record(rec)
    return TrainResult(params, init_params, records)


def fit_linear(features, labels, num_classes, cfg):
    """Train a fresh linear softmax classifier with SGD-momentum; return its params."""
    spec = MLPSpec(features.shape[1], (), num_classes)
    params = init_mlp(spec, substream(cfg.seed, "probe"))
    velocity = zeros_like(params)
    n = features.shape[0]
    for epoch in range(cfg.epochs):
        for idx in _minibatches(n, cfg.batch_size, substream(cfg.seed, "probe", epoch + 1)):
            out, cache = mlp_forward(spec, params, features[idx])
            _, d = softmax_cross_entropy(out, labels[idx])
            grads, _ = mlp_backward(cache, d)
            params, velocity = sgd_momentum_step(params, grads, velocity, cfg.lr, cfg.momentum)
    return spec, params


def unimodal_probe(encoder_spec, encoder_params, train_x, train_y, test_x, test_y, num_classes, cfg=None):
    """Fit a linear classifier on frozen encoder outputs; return test (accuracy, macro-F1)."""
    cfg = cfg or ProbeConfig()
    for x, name in ((train_x, "train"), (test_x, "test")):
        if np.ndim(x) != 2 or np.shape(x)[1] != encoder_spec.input_dim:
            raise ConfigError(f"{name} inputs have shape {np.shape(x)}, encoder expects {encoder_spec.input_dim} columns")
    f_train = extract_features(encoder_spec, encoder_params, train_x)
    f_test = extract_features(encoder_spec, encoder_params, test_x)
    spec, params = fit_linear(f_train, np.asarray(train_y), num_classes, cfg)
    pred = np.argmax(mlp_forward(spec, params, f_test)[0], axis=1)
    return classification_metrics(test_y, pred, num_classes)


def probe_all(model, params, data, cfg=None):
    """Probe every encoder: train on the train split, score on the test split."""
    train, test = data["train"], data["test"]
    return [
        unimodal_probe(enc, params[f"enc{k}"], train.features[k], train.labels,
                       test.features[k], test.labels, model.num_classes, cfg)
        for k, enc in enumerate(model.encoders)
    ]
