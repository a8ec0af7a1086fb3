"""``regnet`` command line: generate, train, evaluate, export-functions, benchmark.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import bench, synthetic
from .data import SchemaConfig, apply_preprocessor, fit_preprocessor, load_csv, split
from .interpret import grid_1d, grid_2d, load_archive, save_model
from .model import ARCHITECTURES, Task, predict
from .nn import loss
from .training import TrainConfig, loss_kind

log = logging.getLogger("regnet")

DEFAULT_SEED = 42


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _add_train_flags(p):
    p.add_argument("--epochs", type=int, default=512, help="maximum epochs per phase (default: 512)")
    p.add_argument("--patience", type=int, default=32, help="early-stopping patience (default: 32)")
    p.add_argument("--min-delta", type=float, default=0.005,
                   help="absolute validation-loss improvement that resets patience (default: 0.005)")
    p.add_argument("--batch-size", type=int, default=256, help="mini-batch size (default: 256)")
    p.add_argument("--lr", type=float, default=1e-3, help="Adam learning rate (default: 0.001)")
    p.add_argument("--no-class-balancing", action="store_true",
                   help="disable balanced class weights for binary targets")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="regnet", description="Additive neural networks over feature subsets.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic dataset CSV and JSON sidecar")
    g.add_argument("--dataset", required=True, help=f"one of: {', '.join(synthetic.NAMES)}")
    g.add_argument("--rows", type=int, default=10000, help="number of rows (default: 10000)")
    g.add_argument("--seed", type=int, default=DEFAULT_SEED, help="random seed (default: 42)")
    g.add_argument("--out", default=".", help="output directory (default: current directory)")

    t = sub.add_parser("train", help="train a model on a CSV file and write an archive")
    t.add_argument("--data", required=True, help="input CSV")
    t.add_argument("--schema", required=True, help="schema config JSON (a generator sidecar also works)")
    t.add_argument("--arch", required=True, choices=ARCHITECTURES, help="architecture")
    t.add_argument("--mode", choices=("stepwise", "all-at-once"), default="stepwise",
                   help="training mode (default: stepwise)")
    t.add_argument("--out", required=True, help="model archive path (history goes to <out>.history.json)")
    t.add_argument("--seed", type=int, default=DEFAULT_SEED, help="initialization/shuffling seed (default: 42)")
    t.add_argument("--split-seed", type=int, default=0, help="holdout split seed (default: 0)")
    t.add_argument("--val-fraction", type=float, default=0.2, help="holdout fraction (default: 0.2)")
    _add_train_flags(t)

    e = sub.add_parser("evaluate", help="print the validation metric of a trained model")
    e.add_argument("--model", required=True, help="model archive")
    e.add_argument("--data", required=True, help="CSV with the training columns")
    e.add_argument("--all-rows", action="store_true",
                   help="score every row instead of the archived holdout split")

    x = sub.add_parser("export-functions", help="write shape and interaction grids")
    x.add_argument("--model", required=True, help="model archive")
    x.add_argument("--feature", action="append", default=[], help="level-1 feature to export (repeatable)")
    x.add_argument("--pair", action="append", default=[], help="level-2 pair 'f,g' to export (repeatable)")
    x.add_argument("--points", type=int, default=None,
                   help="grid points per continuous axis (default: 256 for 1D, 64 for 2D)")
    x.add_argument("--combined", action="store_true", help="add level-1 grids onto 2D grids")
    x.add_argument("--format", choices=("csv", "json", "both"), default="both",
                   help="output format (default: both)")
    x.add_argument("--out", required=True, help="output directory")

    b = sub.add_parser("benchmark", help="run an architecture comparison suite")
    b.add_argument("--suite", required=True, help="suite config JSON")
    b.add_argument("--out", required=True, help="report JSON path")
    b.add_argument("--jobs", type=int, default=1, help="worker processes (default: 1)")
    b.add_argument("--seed", type=int, default=None, help="override the suite's base seed")
    return parser


def _train_config(args) -> TrainConfig:
    return TrainConfig(max_epochs=args.epochs, patience=args.patience, min_delta=args.min_delta,
                       batch_size=args.batch_size, lr=args.lr, mode=args.mode,
                       class_balancing=not args.no_class_balancing, seed=args.seed)


def cmd_generate(args):
    try:
        name = synthetic.canonical_name(args.dataset)
    except ValueError as e:
        raise UsageError(str(e)) from None
    csv_path, meta_path = synthetic.write_dataset(name, args.out, args.rows, args.seed)
    print(f"wrote {csv_path} and {meta_path}")


def cmd_train(args):
    config = _train_config(args)
    schema = SchemaConfig.load(args.schema)
    raw = load_csv(args.data, schema)
    train_raw, val_raw = split(raw, args.val_fraction, args.split_seed)
    pre = fit_preprocessor(train_raw, schema)
    train_ds, val_ds = apply_preprocessor(pre, train_raw), apply_preprocessor(pre, val_raw)
    model, history = bench.fit_architecture(args.arch, train_ds, val_ds, config)
    data = {"schema": schema.to_dict(), "split_seed": args.split_seed,
            "val_fraction": args.val_fraction, "architecture": args.arch,
            "train_config": config.to_dict()}
    save_model(model, args.out, pre, history, data)
    hist_path = Path(str(args.out) + ".history.json")
    with open(hist_path, "w", encoding="utf-8") as fh:
        json.dump(history.to_dict(), fh, indent=1)
        fh.write("\n")
    metric = loss_kind(model.task).value
    print(f"val_{metric}={history.final_val_loss!r}")


def cmd_evaluate(args):
    archive = load_archive(args.model)
    if archive.preprocessor is None or not archive.data:
        raise RuntimeError("archive has no preprocessing metadata")
    schema = SchemaConfig.from_dict(archive.data["schema"])
    raw = load_csv(args.data, schema)
    if not args.all_rows:
        _, raw = split(raw, archive.data["val_fraction"], archive.data["split_seed"])
    ds = apply_preprocessor(archive.preprocessor, raw)
    model = archive.model
    kind = loss_kind(model.task)
    value = loss(predict(model, ds.X), ds.y, kind)
    print(f"{kind.value}={value!r}")
    if model.task is Task.REGRESSION and archive.preprocessor.target_scaling == "standardize":
        print(f"{kind.value}_raw_units={value * archive.preprocessor.mse_scale()!r}")


def cmd_export(args):
    archive = load_archive(args.model)
    if archive.preprocessor is None:
        raise RuntimeError("archive has no preprocessor; cannot map grid axes to raw units")
    model, pre = archive.model, archive.preprocessor
    if not args.feature and not args.pair:
        raise UsageError("export-functions: give at least one --feature or --pair")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grids = []
    for f in args.feature:
        grids.append((f, grid_1d(model, pre, f, args.points or 256)))
    for p in args.pair:
        names = [s.strip() for s in p.split(",")]
        if len(names) != 2:
            raise UsageError(f"--pair expects 'f,g', got {p!r}")
        grids.append(("__".join(names), grid_2d(model, pre, names, args.points or 64, args.combined)))
    for stem, grid in grids:
        if args.format in ("csv", "both"):
            grid.write_csv(out / f"{stem}.csv")
        if args.format in ("json", "both"):
            grid.write_json(out / f"{stem}.json")
        print(f"wrote {stem} grid {tuple(len(a) for a in grid.axes)}")


def cmd_benchmark(args):
    config = bench.SuiteConfig.load(args.suite)
    if args.seed is not None:
        config.base_seed = args.seed
    cells = bench.run_suite(config, jobs=args.jobs)
    bench.write_report(config, cells, args.out)
    print(bench.format_table(cells))


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "export-functions": cmd_export,
    "benchmark": cmd_benchmark,
}


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().strip())
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        COMMANDS[args.command](args)
    except UsageError as e:
        print(e, file=sys.stderr)
        return 1
    except SystemExit as e:  # --help
        return int(e.code or 0)
    except Exception as e:  # noqa: BLE001
        print(f"regnet: error: {e}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
