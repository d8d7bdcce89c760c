"""Seeded synthetic multimodal datasets and their on-disk CSV formats.

Dataset directory layout::

    labels_{train,val,test}.csv        single column, header ``label``
    modality{k}_{train,val,test}.csv   header ``f0,...,f{d-1}``

Embedding files (features dumped by any trainer) use one file per split with
header ``label,f0,...,f{d-1}``.
"""
import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, InputError, ParseError
from .rng import substream

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class ModalitySpec:
    dim: int
    class_separation: float = 1.0
    noise_sigma: float = 1.0
    informative_fraction: float = 1.0

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigError(f"modality dim must be >= 1, got {self.dim}")
        if self.class_separation < 0 or self.noise_sigma < 0:
            raise ConfigError("class_separation and noise_sigma must be non-negative")
        if not 0.0 <= self.informative_fraction <= 1.0:
            raise ConfigError(f"informative_fraction must lie in [0, 1], got {self.informative_fraction}")

    @property
    def informative_dims(self):
        return int(np.floor(self.informative_fraction * self.dim + 1e-9))


@dataclass(frozen=True)
class DatasetSpec:
    num_classes: int
    modalities: tuple
    n_train: int
    n_val: int
    n_test: int
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "modalities", tuple(self.modalities))
        if self.num_classes < 2:
            raise ConfigError(f"need at least 2 classes, got {self.num_classes}")
        if len(self.modalities) < 2:
            raise ConfigError(f"need at least 2 modalities, got {len(self.modalities)}")
        for split in SPLITS:
            n = getattr(self, f"n_{split}")
            if n < self.num_classes:
                raise ConfigError(f"n_{split}={n} is smaller than the number of classes {self.num_classes}")


@dataclass
class Split:
    labels: np.ndarray
    features: list  # one (n, d_k) float64 matrix per modality

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.features = [np.asarray(f, dtype=np.float64) for f in self.features]
        n = self.labels.shape[0]
        for k, f in enumerate(self.features):
            if f.ndim != 2 or f.shape[0] != n:
                raise ConfigError(f"modality {k} has shape {f.shape}, expected {n} rows")

    def __len__(self):
        return self.labels.shape[0]


@dataclass
class MultimodalDataset:
    num_classes: int
    splits: dict = field(default_factory=dict)

    @property
    def n_modalities(self):
        return len(next(iter(self.splits.values())).features)

    @property
    def dims(self):
        return [f.shape[1] for f in self.splits["train"].features]

    def __getitem__(self, split):
        return self.splits[split]

    def equals(self, other):
        if self.num_classes != other.num_classes or set(self.splits) != set(other.splits):
            return False
        for name, split in self.splits.items():
            o = other.splits[name]
            if not np.array_equal(split.labels, o.labels) or len(split.features) != len(o.features):
                return False
            if not all(np.array_equal(a, b) for a, b in zip(split.features, o.features)):
                return False
        return True


def class_means(mod, num_classes, rng):
    """Class-conditional means: random points on a sphere of radius
    ``class_separation`` inside the informative subspace, zero elsewhere."""
    means = np.zeros((num_classes, mod.dim))
    d_inf = mod.informative_dims
    if d_inf == 0 or mod.class_separation == 0:
        return means
    directions = rng.standard_normal((num_classes, d_inf))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    means[:, :d_inf] = mod.class_separation * directions / norms
    return means


def balanced_labels(n, num_classes, rng):
    """Round-robin labels shuffled, so every class is present when n >= M."""
    return rng.permutation(np.arange(n) % num_classes)


def generate(spec):
    """Draw a :class:`MultimodalDataset` from ``spec``; deterministic in ``spec.seed``."""
    rng = substream(spec.seed, "data")
    means = [class_means(mod, spec.num_classes, rng) for mod in spec.modalities]
    ds = MultimodalDataset(spec.num_classes)
    for split in SPLITS:
        n = getattr(spec, f"n_{split}")
        labels = balanced_labels(n, spec.num_classes, rng)
        feats = []
        for mod, mu in zip(spec.modalities, means):
            noise = rng.standard_normal((n, mod.dim)) * mod.noise_sigma
            feats.append(mu[labels] + noise)
        ds.splits[split] = Split(labels, feats)
    return ds


# --- CSV IO -----------------------------------------------------------------

def _fmt(x):
    return repr(float(x))


def _write_rows(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def write_matrix(path, matrix):
    matrix = np.asarray(matrix, dtype=np.float64)
    header = [f"f{j}" for j in range(matrix.shape[1])]
    _write_rows(path, header, ([_fmt(v) for v in row] for row in matrix))


def write_labels(path, labels):
    _write_rows(path, ["label"], ([str(int(v))] for v in labels))


def write_features(path, labels, features):
    """Write an embedding CSV (``label,f0,...``)."""
    features = np.asarray(features, dtype=np.float64)
    header = ["label"] + [f"f{j}" for j in range(features.shape[1])]
    rows = ([str(int(y))] + [_fmt(v) for v in row] for y, row in zip(labels, features))
    _write_rows(path, header, rows)


def _read_table(path, expected_prefix=()):
    """Read a header + numeric rows CSV. Returns (header, list of raw rows, first data line)."""
    path = Path(path)
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise ParseError(f"cannot open file: {exc.strerror}", path=path) from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("file is empty, expected a header", path=path, line=1) from None
        header = [h.strip() for h in header]
        rows = []
        for row in reader:
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            rows.append((reader.line_num, row))
    for i, name in enumerate(expected_prefix):
        if i >= len(header) or header[i] != name:
            raise ParseError(f"header must start with {','.join(expected_prefix)!r}", path=path, line=1)
    for line, row in rows:
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(row)}", path=path, line=line)
    return header, rows


def _parse_float(token, path, line, column):
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"non-numeric value {token.strip()!r}", path=path, line=line, column=column) from None
    if not np.isfinite(value):
        raise ParseError(f"non-finite value {token.strip()!r}", path=path, line=line, column=column)
    return value


def _parse_label(token, path, line, column):
    try:
        value = int(token)
    except ValueError:
        raise ParseError(f"label must be an integer, got {token.strip()!r}", path=path, line=line, column=column) from None
    if value < 0:
        raise ParseError(f"label must be non-negative, got {value}", path=path, line=line, column=column)
    return value


def _check_feature_header(header, start, path):
    expected = [f"f{j}" for j in range(len(header) - start)]
    if header[start:] != expected:
        raise ParseError(f"feature columns must be named f0..f{len(expected) - 1}", path=path, line=1)


def read_matrix(path):
    header, rows = _read_table(path)
    _check_feature_header(header, 0, path)
    out = np.empty((len(rows), len(header)))
    for i, (line, row) in enumerate(rows):
        for j, tok in enumerate(row):
            out[i, j] = _parse_float(tok, path, line, j + 1)
    return out


def read_labels(path):
    header, rows = _read_table(path, expected_prefix=("label",))
    if len(header) != 1:
        raise ParseError("labels file must have the single column 'label'", path=path, line=1)
    return np.array([_parse_label(row[0], path, line, 1) for line, row in rows], dtype=np.int64)


def load_features(path):
    """Read an embedding CSV; return ``(labels, features)``."""
    header, rows = _read_table(path, expected_prefix=("label",))
    if len(header) < 2:
        raise ParseError("embedding file needs at least one feature column", path=path, line=1)
    _check_feature_header(header, 1, path)
    if not rows:
        raise InputError(f"{path}: no samples in file")
    labels = np.empty(len(rows), dtype=np.int64)
    feats = np.empty((len(rows), len(header) - 1))
    for i, (line, row) in enumerate(rows):
        labels[i] = _parse_label(row[0], path, line, 1)
        for j, tok in enumerate(row[1:]):
            feats[i, j] = _parse_float(tok, path, line, j + 2)
    return labels, feats


def save_dataset(ds, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, split in ds.splits.items():
        p = directory / f"labels_{name}.csv"
        write_labels(p, split.labels)
        written.append(p)
        for k, feats in enumerate(split.features):
            p = directory / f"modality{k}_{name}.csv"
            write_matrix(p, feats)
            written.append(p)
    return written


def load_dataset(directory, num_classes=None):
    """Load a dataset directory. ``num_classes`` defaults to ``max(label) + 1``."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ParseError("dataset directory does not exist", path=directory)
    splits = {}
    for name in SPLITS:
        labels_path = directory / f"labels_{name}.csv"
        if not labels_path.exists():
            raise ParseError(f"missing labels file for split {name!r}", path=labels_path)
        labels = read_labels(labels_path)
        feats = []
        k = 0
        while (directory / f"modality{k}_{name}.csv").exists():
            p = directory / f"modality{k}_{name}.csv"
            m = read_matrix(p)
            if m.shape[0] != labels.shape[0]:
                raise ParseError(
                    f"{m.shape[0]} feature rows but {labels.shape[0]} labels in {labels_path.name}", path=p
                )
            feats.append(m)
            k += 1
        if len(feats) < 2:
            raise ParseError(f"split {name!r} needs at least 2 modality files", path=directory)
        splits[name] = Split(labels, feats)
    counts = {len(s.features) for s in splits.values()}
    if len(counts) != 1:
        raise ParseError("splits disagree on the number of modalities", path=directory)
    if num_classes is None:
        num_classes = int(max(s.labels.max() for s in splits.values() if len(s))) + 1
    for name, s in splits.items():
        if len(s) and s.labels.max() >= num_classes:
            raise ParseError(f"split {name!r} has label {s.labels.max()} >= num_classes {num_classes}",
                             path=directory / f"labels_{name}.csv")
    return MultimodalDataset(num_classes, splits)
