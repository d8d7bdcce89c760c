"""Command-line entry point: ``mmbal {gen,train,diagnose,probe,sweep}``."""
import argparse
import json
import os
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from .balance import BalanceConfig, diagnose_modality
from .clustering import KMeansConfig
from .config import load_config
from .data import load_features
from .exceptions import InputError, MMBalError
from .experiment import load_experiment_data, load_params, parse_sweep, run_gen, run_sweep, run_train
from .trainer import probe_all


def _common(p, out_required=True):
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", required=out_required, help="output directory")
    p.add_argument("--quiet", action="store_true", help="suppress progress output")


def build_parser():
    parser = argparse.ArgumentParser(prog="mmbal", description="Balanced multimodal training experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset directory")
    p.add_argument("config")
    _common(p)

    p = sub.add_parser("train", help="train one model and write metrics")
    p.add_argument("config")
    _common(p)

    p = sub.add_parser("diagnose", help="purity gap and re-init strength for two embedding files")
    p.add_argument("train_features")
    p.add_argument("val_features")
    p.add_argument("--num-classes", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=3.0)
    p.add_argument("--squash", choices=["tanh", "clipped_linear"], default="tanh")
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--standardize", action="store_true")
    _common(p, out_required=False)

    p = sub.add_parser("probe", help="linear-probe every encoder of a trained run")
    p.add_argument("config")
    p.add_argument("--params", required=True, help="params.npz written by 'train'")
    _common(p, out_required=False)

    p = sub.add_parser("sweep", help="run the Cartesian product of parameter values")
    p.add_argument("config")
    p.add_argument("--param", action="append", default=[], metavar="KEY=V1,V2",
                   help="swept key and its values (repeatable); separate hidden_dims values with ';'")
    p.add_argument("--jobs", type=int, default=1, help="parallel child processes")
    _common(p)
    return parser


def _config(args):
    config = load_config(args.config)
    if args.seed is not None:
        config = config.override({"seed": args.seed})
    return config


def cmd_gen(args):
    out = run_gen(_config(args), args.out)
    if not args.quiet:
        print(f"wrote dataset to {out}")


def cmd_train(args):
    summary = run_train(_config(args), args.out, quiet=args.quiet)
    if not args.quiet:
        print(json.dumps({"mode": summary["mode"], **summary["final"]}))


def cmd_diagnose(args):
    y_train, f_train = load_features(args.train_features)
    y_val, f_val = load_features(args.val_features)
    if f_train.shape[1] != f_val.shape[1]:
        raise InputError(f"feature dimension mismatch: {f_train.shape[1]} (train) vs {f_val.shape[1]} (val)")
    for y, name in ((y_train, "train"), (y_val, "val")):
        if y.max() >= args.num_classes:
            raise InputError(f"{name} file has label {y.max()} >= --num-classes {args.num_classes}")
    kcfg = KMeansConfig(args.num_classes, args.max_iters, args.restarts,
                        args.seed if args.seed is not None else 0, args.tol, args.standardize)
    diag = diagnose_modality(f_train, f_val, y_train, y_val, args.num_classes, kcfg,
                             BalanceConfig(lam=args.lam, squash=args.squash))
    report = {k: v for k, v in diag.to_dict().items() if k != "modality"}
    print(json.dumps(report))
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "diagnosis.json").write_text(json.dumps(report) + "\n", encoding="utf-8")


def cmd_probe(args):
    config = _config(args)
    data = load_experiment_data(config)
    model = config.model_spec(data.dims, data.num_classes)
    params = load_params(args.params)
    results = [{"modality": k, "test_acc": acc, "test_macro_f1": f1}
               for k, (acc, f1) in enumerate(probe_all(model, params, data, config.probe_config()))]
    print(json.dumps(results))
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "probes.json").write_text(json.dumps(results, indent=2) + "\n", encoding="utf-8")


def cmd_sweep(args):
    config = _config(args)
    sweep = parse_sweep(args.param)
    if not sweep:
        raise InputError("sweep needs at least one --param")
    index = run_sweep(config, sweep, args.out, jobs=args.jobs)
    if not args.quiet:
        print(f"ran {len(index)} combinations into {args.out}")


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "diagnose": cmd_diagnose, "probe": cmd_probe, "sweep": cmd_sweep}


def main(argv=None):
    args = build_parser().parse_args(argv)
    threads = os.environ.get("MMBAL_THREADS")
    try:
        limit = max(1, int(threads)) if threads else None
    except ValueError:
        print(f"error: MMBAL_THREADS must be an integer, got {threads!r}", file=sys.stderr)
        return 2
    try:
        with threadpool_limits(limits=limit):
            COMMANDS[args.command](args)
    except (MMBalError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
