"""Run directories: dataset generation, training runs and sweeps on disk.

A training run directory holds::

    metrics.jsonl      one EpochRecord per line, written as training proceeds
    summary.json       config echo, mode, final metrics, per-modality probes
    params.npz         final parameters (keys ``group/name``)
    init_params.npz    parameters at initialization
    manifest.json      config hash, seed, timestamps, outputs, version
"""
import itertools
import json
import os
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, format_value, key_schema, parse_value
from .data import generate, load_dataset, save_dataset
from .exceptions import ConfigError
from .trainer import probe_all, train_run


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_manifest(out_dir, config, outputs, started):
    manifest = {
        "config_hash": config.hash,
        "seed": config.seed,
        "started": started,
        "finished": _now(),
        "outputs": sorted(str(Path(p).relative_to(out_dir)) for p in outputs),
        "version": __version__,
    }
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest


def save_params(path, params):
    flat = {f"{group}/{name}": v for group, g in params.items() for name, v in g.items()}
    np.savez(path, **flat)


def load_params(path):
    params = {}
    with np.load(path) as z:
        for key in z.files:
            group, name = key.split("/", 1)
            params.setdefault(group, {})[name] = z[key]
    # np.savez keeps insertion order; enforce W0, b0, W1, ... within each group.
    return {g: dict(sorted(p.items(), key=lambda kv: (int(kv[0][1:]), kv[0][0] != "W")))
            for g, p in params.items()}


def run_gen(config, out_dir):
    started = _now()
    out_dir = Path(out_dir)
    ds = generate(config.dataset_spec())
    written = save_dataset(ds, out_dir)
    write_manifest(out_dir, config, written, started)
    return out_dir


def load_experiment_data(config):
    d = config.data_dir()
    if d is not None:
        return load_dataset(d, config.get("data.num_classes"))
    return generate(config.dataset_spec())


def run_train(config, out_dir, balance=..., quiet=True):
    """Execute one training run into ``out_dir``; return the summary dict.

    ``balance`` overrides the balance section of ``config`` (pass ``None`` for
    the joint-training baseline or a custom BalanceConfig).
    """
    started = _now()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data = load_experiment_data(config)
    model = config.model_spec(data.dims, data.num_classes)
    cfg = config.train_config(balance)
    metrics_path = out_dir / "metrics.jsonl"
    with open(metrics_path, "w", encoding="utf-8", newline="\n") as fh:
        def on_record(rec):
            fh.write(rec.to_json() + "\n")
            fh.flush()
            if not quiet:
                print(f"epoch {rec.epoch:4d}  loss {rec.train_loss:.4f}  acc {rec.test_acc:.4f}"
                      + ("  [re-learn]" if rec.diagnoses else ""), flush=True)
        result = train_run(data, model, cfg, on_record=on_record)

    final = result.records[-1]
    summary = {
        "mode": "joint_training" if cfg.balance is None else "diagnosing_relearning",
        "config": config.to_text(),
        "config_hash": config.hash,
        "final": {"epoch": final.epoch, "test_acc": final.test_acc, "test_macro_f1": final.test_macro_f1,
                  "train_loss": final.train_loss},
        "probes": [],
    }
    if config.get("probe.enabled"):
        for k, (acc, f1) in enumerate(probe_all(model, result.params, data, config.probe_config())):
            summary["probes"].append({"modality": k, "test_acc": acc, "test_macro_f1": f1})
    summary_path = out_dir / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    save_params(out_dir / "params.npz", result.params)
    save_params(out_dir / "init_params.npz", result.init_params)
    outputs = [metrics_path, summary_path, out_dir / "params.npz", out_dir / "init_params.npz"]
    write_manifest(out_dir, config, outputs, started)
    return summary


def read_metrics(path):
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def parse_sweep(specs):
    """Turn ``["balance.lambda=1,3", "seed=0,1"]`` into ``[(key, [values...]), ...]``."""
    out = []
    for spec in specs:
        key, sep, values = spec.partition("=")
        key = key.strip()
        if not sep or not values.strip():
            raise ConfigError(f"sweep parameter must look like key=v1,v2,...: {spec!r}")
        key_schema(key)
        if key == "model.hidden_dims":
            parsed = [parse_value(key, v) for v in values.split(";")]
        else:
            parsed = [parse_value(key, v) for v in values.split(",")]
        out.append((key, parsed))
    return out


def _sweep_child(args):
    values, base_dir, run_dir = args
    run_train(ExperimentConfig(values, base_dir), run_dir)
    return str(run_dir)


def run_sweep(config, sweep, out_dir, jobs=1):
    """Run the Cartesian product of ``sweep`` values; write ``index.json``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    keys = [k for k, _ in sweep]
    combos = list(itertools.product(*[v for _, v in sweep]))
    tasks, index = [], []
    for i, combo in enumerate(combos):
        run_dir = out_dir / f"run_{i:03d}"
        child = config.override(dict(zip(keys, combo)))
        tasks.append((child.values, child.base_dir, run_dir))
        index.append({"dir": run_dir.name, "params": {k: format_value(v) for k, v in zip(keys, combo)},
                      "config_hash": child.hash})
    limit = os.environ.get("MMBAL_THREADS")
    if limit:
        jobs = min(jobs, max(1, int(limit)))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(_sweep_child, tasks))
    else:
        for t in tasks:
            _sweep_child(t)
    (out_dir / "index.json").write_text(json.dumps(index, indent=2) + "\n", encoding="utf-8")
    return index
