import hashlib

import numpy as np
import pytest

from mmbal.clustering import KMeansConfig, kmeans, purity
from mmbal.data import (DatasetSpec, ModalitySpec, generate, load_dataset, load_features,
                        save_dataset, write_features)
from mmbal.exceptions import ConfigError, InputError, ParseError
from mmbal.trainer import ProbeConfig, fit_linear, classification_metrics
from mmbal.nn import mlp_forward


def small_spec(seed=0, **mod_kw):
    a = ModalitySpec(4, **{"class_separation": 3.0, "noise_sigma": 0.5, **mod_kw})
    return DatasetSpec(3, (a, ModalitySpec(2, 1.0, 1.0)), 30, 12, 15, seed)


def test_generate_is_deterministic():
    a, b = generate(small_spec(5)), generate(small_spec(5))
    assert a.equals(b)
    assert not a.equals(generate(small_spec(6)))


def test_every_class_present_and_rows_aligned():
    ds = generate(small_spec())
    for split in ds.splits.values():
        assert set(split.labels.tolist()) == {0, 1, 2}
        assert all(f.shape[0] == len(split) for f in split.features)


def test_split_smaller_than_classes_rejected():
    with pytest.raises(ConfigError):
        DatasetSpec(4, (ModalitySpec(2), ModalitySpec(2)), 3, 10, 10)
    with pytest.raises(ConfigError):
        DatasetSpec(1, (ModalitySpec(2), ModalitySpec(2)), 10, 10, 10)
    with pytest.raises(ConfigError):
        ModalitySpec(0)


def test_noise_free_classes_are_points_with_purity_one():
    spec = DatasetSpec(4, (ModalitySpec(3, 2.0, 0.0), ModalitySpec(2, 1.0, 1.0)), 40, 8, 8, 1)
    train = generate(spec)["train"]
    x, y = train.features[0], train.labels
    for c in range(4):
        pts = x[y == c]
        assert np.all(pts == pts[0])
    res = kmeans(x, KMeansConfig(4, restarts=5, seed=0))
    assert purity(res.assignments, y, 4) == 1.0


@pytest.mark.parametrize("seed", range(5))
def test_uninformative_modality_probe_is_chance(seed):
    m = 4
    spec = DatasetSpec(m, (ModalitySpec(8, 3.0, 1.0, informative_fraction=0.0), ModalitySpec(2)),
                       400, 50, 400, seed)
    ds = generate(spec)
    tr, te = ds["train"], ds["test"]
    lin, params = fit_linear(tr.features[0], tr.labels, m, ProbeConfig(epochs=20, seed=seed))
    pred = np.argmax(mlp_forward(lin, params, te.features[0])[0], axis=1)
    acc, _ = classification_metrics(te.labels, pred, m)
    assert acc <= 1 / m + 0.1


def test_informative_dims_rounding():
    assert ModalitySpec(10, informative_fraction=0.25).informative_dims == 2
    assert ModalitySpec(4, informative_fraction=0.25).informative_dims == 1
    assert ModalitySpec(4, informative_fraction=0.0).informative_dims == 0
    ds = generate(DatasetSpec(2, (ModalitySpec(10, 5.0, 0.0, 0.25), ModalitySpec(1)), 10, 4, 4, 0))
    x = ds["train"].features[0]
    assert np.all(x[:, 2:] == 0.0)


def test_class_means_converge():
    sep, sigma, n = 2.0, 0.7, 3000
    spec = DatasetSpec(3, (ModalitySpec(5, sep, sigma), ModalitySpec(1)), n, 3, 3, 11)
    ds = generate(spec)
    x, y = ds["train"].features[0], ds["train"].labels
    # Class means are unknown to the test; estimate them from the noise-free twin.
    clean = generate(DatasetSpec(3, (ModalitySpec(5, sep, 0.0), ModalitySpec(1)), n, 3, 3, 11))
    for c in range(3):
        target = clean["train"].features[0][clean["train"].labels == c][0]
        emp = x[y == c].mean(axis=0)
        per_class = int((y == c).sum())
        assert np.all(np.abs(emp - target) <= 3 * sigma / np.sqrt(per_class))
        assert np.linalg.norm(target) == pytest.approx(sep)


def test_save_load_round_trip(tmp_path):
    ds = generate(small_spec(3))
    save_dataset(ds, tmp_path)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == sorted([f"labels_{s}.csv" for s in ("train", "val", "test")]
                           + [f"modality{k}_{s}.csv" for k in range(2) for s in ("train", "val", "test")])
    assert load_dataset(tmp_path, 3).equals(ds)


def test_identical_bytes_on_disk(tmp_path):
    def digest(d):
        return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(d.iterdir())}
    save_dataset(generate(small_spec(9)), tmp_path / "a")
    save_dataset(generate(small_spec(9)), tmp_path / "b")
    assert digest(tmp_path / "a") == digest(tmp_path / "b")


def test_row_count_mismatch_is_parse_error(tmp_path):
    save_dataset(generate(small_spec()), tmp_path)
    p = tmp_path / "labels_val.csv"
    p.write_text("\n".join(p.read_text().splitlines()[:-1]) + "\n")
    with pytest.raises(ParseError, match="labels"):
        load_dataset(tmp_path)


def test_non_numeric_token_names_row_and_column(tmp_path):
    save_dataset(generate(small_spec()), tmp_path)
    p = tmp_path / "modality1_train.csv"
    lines = p.read_text().splitlines()
    row = lines[3].split(",")
    row[1] = "abc"
    lines[3] = ",".join(row)
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(ParseError) as err:
        load_dataset(tmp_path)
    assert err.value.line == 4 and err.value.column == 2
    assert "line 4" in str(err.value) and "column 2" in str(err.value)


def test_load_features_direct(tmp_path):
    p = tmp_path / "emb.csv"
    p.write_text("label,f0,f1\n0,1.0,2.0\n1,3.0,4.0\n")
    labels, feats = load_features(p)
    np.testing.assert_array_equal(labels, [0, 1])
    np.testing.assert_array_equal(feats, [[1.0, 2.0], [3.0, 4.0]])


def test_load_features_empty_is_input_error(tmp_path):
    p = tmp_path / "emb.csv"
    p.write_text("label,f0,f1\n")
    with pytest.raises(InputError):
        load_features(p)


def test_load_features_single_column(tmp_path):
    p = tmp_path / "emb.csv"
    p.write_text("label,f0\n0,0.5\n1,-2\n")
    labels, feats = load_features(p)
    assert feats.shape == (2, 1)


@pytest.mark.parametrize("text", [
    "lbl,f0\n0,1.0\n",          # header mismatch
    "label,f1\n0,1.0\n",        # feature names
    "label,f0,f1\n0,1.0\n",     # ragged row
    "label,f0\nx,1.0\n",        # bad label
])
def test_load_features_malformed(tmp_path, text):
    p = tmp_path / "emb.csv"
    p.write_text(text)
    with pytest.raises(ParseError):
        load_features(p)


def test_write_features_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    feats, labels = rng.normal(size=(7, 3)), rng.integers(0, 3, 7)
    write_features(tmp_path / "e.csv", labels, feats)
    y, f = load_features(tmp_path / "e.csv")
    np.testing.assert_array_equal(y, labels)
    assert f.tobytes() == feats.tobytes()
