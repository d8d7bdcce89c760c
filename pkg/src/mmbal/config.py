"""Flat ``section.key = value`` experiment configs.

One file describes data, model, training, balancing, clustering and probing::

    seed = 0
    data.num_classes = 4
    modality0.dim = 16
    modality0.noise_sigma = 0.5
    modality1.dim = 16
    train.epochs = 100
    balance.lambda = 3

Lines starting with ``#`` are comments. Any ``balance.*`` key enables
Diagnosing & Re-learning; without one the run is plain joint training.
"""
import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .balance import BalanceConfig
from .data import DatasetSpec, ModalitySpec
from .exceptions import ConfigError, ParseError
from .trainer import ProbeConfig, TrainConfig, build_model_spec


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _int_list(text):
    text = text.strip().strip("[]").strip()
    if not text:
        return ()
    return tuple(int(v) for v in text.split(","))


def _str(text):
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] == '"':
        return json.loads(text)
    return text


SCHEMA = {
    "seed": (int, 0),
    "data.dir": (_str, None),
    "data.num_classes": (int, 4),
    "data.n_train": (int, 2000),
    "data.n_val": (int, 500),
    "data.n_test": (int, 1000),
    "model.hidden_dims": (_int_list, (64,)),
    "model.feature_dim": (int, 32),
    "model.unimodal_heads": (_bool, False),
    "train.epochs": (int, 100),
    "train.batch_size": (int, 32),
    "train.lr": (float, 1e-3),
    "train.momentum": (float, 0.9),
    "train.eval_every": (int, 1),
    "balance.period": (int, 20),
    "balance.lambda": (float, 3.0),
    "balance.squash": (_str, "tanh"),
    "balance.reset_momentum": (_bool, True),
    "kmeans.max_iters": (int, 100),
    "kmeans.restarts": (int, 5),
    "kmeans.tol": (float, 1e-6),
    "kmeans.standardize": (_bool, False),
    "probe.enabled": (_bool, True),
    "probe.epochs": (int, 50),
    "probe.lr": (float, 1e-2),
    "probe.momentum": (float, 0.9),
    "probe.batch_size": (int, 32),
}

MODALITY_FIELDS = {
    "dim": (int, None),
    "class_separation": (float, 1.0),
    "noise_sigma": (float, 1.0),
    "informative_fraction": (float, 1.0),
}
_MODALITY_KEY = re.compile(r"^modality(\d+)\.(\w+)$")


def key_schema(key):
    """Return ``(parser, default)`` for a config key or raise ConfigError naming it."""
    if key in SCHEMA:
        return SCHEMA[key]
    m = _MODALITY_KEY.match(key)
    if m and m.group(2) in MODALITY_FIELDS:
        return MODALITY_FIELDS[m.group(2)]
    raise ConfigError(f"unknown config key {key!r}")


def parse_value(key, text):
    parser, _ = key_schema(key)
    try:
        return parser(text)
    except (ValueError, json.JSONDecodeError) as exc:
        raise ConfigError(f"invalid value {text.strip()!r} for {key!r}: {exc}") from None


def format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ",".join(str(int(v)) for v in value)
    if isinstance(value, str):
        return value if re.fullmatch(r"[\w./\-]+", value) else json.dumps(value)
    return str(value)


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=dict)
    base_dir: Path = None  # directory that relative paths resolve against

    def __post_init__(self):
        for key in self.values:
            key_schema(key)

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.values == other.values

    def get(self, key):
        _, default = key_schema(key)
        return self.values.get(key, default)

    def override(self, mapping):
        return ExperimentConfig({**self.values, **mapping}, self.base_dir)

    # -- text form ----------------------------------------------------------
    def to_text(self):
        return "".join(f"{k} = {format_value(self.values[k])}\n" for k in sorted(self.values))

    @property
    def hash(self):
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    # -- typed views ----------------------------------------------------------
    @property
    def seed(self):
        return self.get("seed")

    @property
    def balanced(self):
        return any(k.startswith("balance.") for k in self.values)

    @property
    def n_modalities(self):
        ks = {int(m.group(1)) for m in map(_MODALITY_KEY.match, self.values) if m}
        if ks and ks != set(range(len(ks))):
            raise ConfigError(f"modality indices must be contiguous from 0, got {sorted(ks)}")
        return len(ks)

    def data_dir(self):
        d = self.get("data.dir")
        if d is None:
            return None
        p = Path(d)
        if not p.is_absolute() and self.base_dir is not None:
            p = self.base_dir / p
        return p

    def dataset_spec(self):
        mods = []
        for k in range(self.n_modalities):
            kw = {f: self.get(f"modality{k}.{f}") for f in MODALITY_FIELDS}
            if kw["dim"] is None:
                raise ConfigError(f"missing required key 'modality{k}.dim'")
            mods.append(ModalitySpec(**kw))
        return DatasetSpec(self.get("data.num_classes"), tuple(mods), self.get("data.n_train"),
                           self.get("data.n_val"), self.get("data.n_test"), self.seed)

    def model_spec(self, input_dims, num_classes):
        return build_model_spec(input_dims, num_classes, self.get("model.hidden_dims"),
                                self.get("model.feature_dim"), self.get("model.unimodal_heads"))

    def balance_config(self):
        if not self.balanced:
            return None
        return BalanceConfig(self.get("balance.period"), self.get("balance.lambda"),
                             self.get("balance.squash"), self.get("balance.reset_momentum"))

    def train_config(self, balance=...):
        return TrainConfig(
            epochs=self.get("train.epochs"), batch_size=self.get("train.batch_size"),
            lr=self.get("train.lr"), momentum=self.get("train.momentum"), seed=self.seed,
            balance=self.balance_config() if balance is ... else balance,
            eval_every=self.get("train.eval_every"),
            kmeans_max_iters=self.get("kmeans.max_iters"), kmeans_restarts=self.get("kmeans.restarts"),
            kmeans_tol=self.get("kmeans.tol"), kmeans_standardize=self.get("kmeans.standardize"),
        )

    def probe_config(self):
        return ProbeConfig(self.get("probe.epochs"), self.get("probe.lr"), self.get("probe.momentum"),
                           self.get("probe.batch_size"), self.seed)


def parse_config(text, path=None):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", path=path, line=lineno)
        key, _, val = line.partition("=")
        key = key.strip()
        if key in values:
            raise ParseError(f"duplicate key {key!r}", path=path, line=lineno)
        try:
            values[key] = parse_value(key, val)
        except ConfigError as exc:
            raise ConfigError(f"{path or '<config>'}, line {lineno}: {exc}") from None
    return ExperimentConfig(values, Path(path).parent if path is not None else None)


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read config: {exc.strerror}", path=path) from exc
    return parse_config(text, path)
