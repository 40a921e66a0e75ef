"""Command-line interface.

Subcommands:

    train       train one variant from a config file
    eval        k-fold cross-validated reconstruction + classification
    sweep       alpha sweep for a relational variant
    reproduce   built-in benchmark protocols (table1 | fig2)
    fetch-data  download benchmark datasets with pinned checksums

Exit codes: 0 success, 1 configuration error, 2 data error, 3 divergence.
Every artifact-producing command writes a manifest.json capturing the
config snapshot, seed, and dataset checksums before any training starts,
then a CSV plus a rendered PNG figure for each report.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import (
    DATA_DIR_ENV,
    ConfigError,
    RunManifest,
    RunSettings,
    load_dataset,
    parse_config,
    resolve_data_dir,
)
from .corruption import CorruptionSpec, fit_corruption
from .data import DataError, fetch_cifar10, fetch_mnist, mnist_paths
from .evaluation import (
    EvalReport,
    alpha_sweep,
    cross_validate,
    fit_autoencoder,
    reconstruction_mse,
    write_eval_csv,
    write_sweep_csv,
)
from .model import init_network, plan_layers, save_network
from .numeric import Rng
from .objectives import DENOISING_KINDS, RELATIONAL_KINDS, VARIATIONAL_KINDS
from .protocol import (
    MODEL_ORDER,
    SCALES,
    VARIANT_PAIRS,
    objective_for,
    reference_for,
)
from .trainer import TAG_INIT, DivergenceError, dataset_loss, train, train_layerwise

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_DIVERGED = 3


def _model_sizes(settings: RunSettings, input_dim: int) -> list[int]:
    if settings.model.layer_sizes:
        sizes = settings.model.layer_sizes
        if sizes[0] != input_dim:
            raise ConfigError(
                "model.layer_sizes",
                f"first size {sizes[0]} must equal the data dimension {input_dim}",
            )
        return sizes
    return plan_layers(input_dim, settings.model.bottleneck)


def _write_epoch_csv(path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("epoch,total,data,relation,regularizer,kl\n")
        for epoch, lv in rows:
            f.write(
                f"{epoch},{lv.total!r},{lv.data_term!r},{lv.relation_term!r},"
                f"{lv.regularizer_term!r},{lv.kl_term!r}\n"
            )


def cmd_train(args) -> int:
    settings = parse_config(args.config)
    if args.out:
        settings.output_dir = args.out
    ds, checksums = load_dataset(settings)
    sizes = _model_sizes(settings, ds.features.shape[1])

    out = Path(settings.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    ckpt, losses_csv, losses_png = out / "model.ckpt", out / "epochs.csv", out / "epochs.png"
    manifest = RunManifest.create(
        "train", settings, checksums, ds.name,
        [str(ckpt), str(losses_csv), str(losses_png)],
    )
    manifest.write(out / "manifest.json")

    rows = []
    cfg = settings.train

    def sink(epoch, lv):
        rows.append((epoch, lv))
        if not args.quiet and (epoch == 1 or epoch % 10 == 0):
            print(f"epoch {epoch}: total={lv.total:.6g}")

    if cfg.layerwise:
        net = train_layerwise(
            sizes, ds.features, settings.objective, cfg, settings.model.activation)
        rows.append((cfg.max_epochs, dataset_loss(
            net, ds.features, settings.objective, cfg.batch_size)))
    else:
        variational = settings.objective.kind in VARIATIONAL_KINDS
        net = init_network(sizes, Rng(cfg.seed).derive(TAG_INIT),
                           settings.model.activation, variational)
        corruption = None
        if settings.objective.kind in DENOISING_KINDS:
            corruption = fit_corruption(
                CorruptionSpec(delta_scale=settings.objective.noise_scale), ds.features)
        train(net, ds.features, settings.objective, cfg, sink=sink, corruption=corruption)

    save_network(net, ckpt)
    _write_epoch_csv(losses_csv, rows)
    from .report import plot_epoch_losses

    plot_epoch_losses(
        [e for e, _ in rows], [lv.total for _, lv in rows], losses_png,
        components={
            "data": [lv.data_term for _, lv in rows],
            "relation": [lv.relation_term for _, lv in rows],
            "kl": [lv.kl_term for _, lv in rows],
        },
        title=f"{settings.objective.kind} on {ds.name}",
    )
    if not args.quiet:
        mse = reconstruction_mse(net, ds.features)
        print(f"done: training MSE {mse:.6g}; wrote {ckpt}, {losses_csv}, {losses_png}")
    return EXIT_OK


def cmd_eval(args) -> int:
    settings = parse_config(args.config)
    if args.out:
        settings.output_dir = args.out
    ds, checksums = load_dataset(settings)
    sizes = _model_sizes(settings, ds.features.shape[1])

    out = Path(settings.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    eval_csv, eval_png = out / "eval.csv", out / "eval.png"
    manifest = RunManifest.create(
        "eval", settings, checksums, ds.name, [str(eval_csv), str(eval_png)])
    manifest.write(out / "manifest.json")

    report = cross_validate(
        ds, sizes, settings.objective, settings.train,
        k=settings.eval.folds, activation=settings.model.activation,
    )
    write_eval_csv([report], eval_csv)
    from .report import plot_model_bars

    plot_model_bars([report], eval_png, title=f"{settings.objective.kind} on {ds.name}")
    if not args.quiet:
        print(
            f"{report.model}: recon MSE {report.recon_mse:.6g} "
            f"(+/- {report.mse_std:.2g}), error {100 * report.error_rate:.2f}% "
            f"(+/- {100 * report.error_std:.2g}%)"
        )
    return EXIT_OK


def cmd_sweep(args) -> int:
    settings = parse_config(args.config)
    if args.out:
        settings.output_dir = args.out
    if settings.objective.kind not in RELATIONAL_KINDS:
        raise ConfigError(
            "objective.kind",
            f"{settings.objective.kind} has no alpha parameter; "
            f"sweep needs one of {', '.join(sorted(RELATIONAL_KINDS))}",
        )
    ds, checksums = load_dataset(settings)
    sizes = _model_sizes(settings, ds.features.shape[1])

    out = Path(settings.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    sweep_csv, sweep_png = out / "sweep.csv", out / "sweep.png"
    manifest = RunManifest.create(
        "sweep", settings, checksums, ds.name, [str(sweep_csv), str(sweep_png)])
    manifest.write(out / "manifest.json")

    progress = None
    if not args.quiet:
        def progress(label, i, total):
            print(f"[{i}/{total}] {label}", flush=True)

    result = alpha_sweep(
        ds, settings.objective.kind, sizes, settings.objective, settings.train,
        split=settings.eval.split, activation=settings.model.activation,
        progress=progress,
    )
    write_sweep_csv(result, sweep_csv)
    from .report import plot_sweep

    plot_sweep(result, sweep_png, title=f"{settings.objective.kind} on {ds.name}")
    if not args.quiet:
        best = min(range(len(result.alphas)), key=lambda i: result.mses[i])
        print(
            f"best alpha {result.alphas[best]:.2f} (MSE {result.mses[best]:.6g}); "
            f"baselines: " + ", ".join(
                f"{k} {v:.6g}" for k, v in sorted(result.baselines.items()))
        )
    return EXIT_OK


def _reproduce_dataset(args, proto):
    """Dataset for a reproduce run: requested source, or mnist with a
    synthetic stand-in when the archives are not on disk."""
    choice = args.dataset
    data_dir = Path(args.data_dir) if args.data_dir else resolve_data_dir(RunSettings())
    if choice == "auto":
        try:
            mnist_paths(data_dir)
            choice = "mnist"
        except DataError:
            choice = "synthetic"
            print(
                f"note: MNIST archives not found under {data_dir}; "
                "using the bundled synthetic digit generator "
                "(run `relae fetch-data --dataset mnist` for the real thing)"
            )
    settings = RunSettings()
    settings.data.dataset = choice
    settings.data.dir = str(data_dir)
    settings.data.subset = min(proto.subset, 200) if choice == "fixture" else proto.subset
    settings.data.synthetic_size = proto.subset
    settings.data.seed = 11
    settings.train = proto.train
    ds, checksums = load_dataset(settings)
    return ds, checksums, settings


def cmd_reproduce(args) -> int:
    targets = ("table1", "fig2")
    if args.target not in targets:
        raise ConfigError("target", f"unknown target {args.target!r}; valid: {', '.join(targets)}")
    proto = SCALES[args.scale]
    ds, checksums, settings = _reproduce_dataset(args, proto)
    sizes = plan_layers(ds.features.shape[1], proto.bottleneck)
    settings.model.bottleneck = proto.bottleneck
    if args.seed is not None:
        proto = replace(proto, train=replace(proto.train, seed=args.seed))
        settings.train = proto.train

    out = Path(args.out) if args.out else Path(f"runs/reproduce-{args.target}-{proto.name}")
    out.mkdir(parents=True, exist_ok=True)

    if args.target == "fig2":
        sweep_csv, sweep_png = out / "sweep.csv", out / "sweep.png"
        manifest = RunManifest.create(
            f"reproduce fig2 --scale {proto.name}", settings, checksums, ds.name,
            [str(sweep_csv), str(sweep_png)])
        manifest.write(out / "manifest.json")
        progress = None
        if not args.quiet:
            def progress(label, i, total):
                print(f"[{i}/{total}] {label}", flush=True)
        base = objective_for(proto.sweep_kind, proto)
        result = alpha_sweep(
            ds, proto.sweep_kind, sizes, base, proto.train,
            split="test", progress=progress,
        )
        write_sweep_csv(result, sweep_csv)
        from .report import plot_sweep

        plot_sweep(result, sweep_png,
                   title=f"{proto.sweep_kind} alpha sweep on {ds.name} ({proto.name} scale)")
        if not args.quiet:
            print(f"wrote {sweep_csv} and {sweep_png}")
        return EXIT_OK

    # table1
    table_csv, folds_csv, table_png = out / "table1.csv", out / "eval.csv", out / "table1.png"
    manifest = RunManifest.create(
        f"reproduce table1 --scale {proto.name}", settings, checksums, ds.name,
        [str(table_csv), str(folds_csv), str(table_png)])
    manifest.write(out / "manifest.json")

    reference = reference_for(ds.name)
    reports: list[EvalReport] = []
    for i, kind in enumerate(MODEL_ORDER):
        if not args.quiet:
            print(f"[{i + 1}/{len(MODEL_ORDER)}] {kind}", flush=True)
        reports.append(cross_validate(
            ds, sizes, objective_for(kind, proto), proto.train, k=proto.folds))

    with open(table_csv, "w", encoding="utf-8", newline="\n") as f:
        f.write("model,recon_mse,recon_std,error,error_std,reference_loss,reference_error\n")
        for rep in reports:
            ref_loss, ref_err = reference[rep.model]
            f.write(
                f"{rep.model},{rep.recon_mse!r},{rep.mse_std!r},"
                f"{rep.error_rate!r},{rep.error_std!r},{ref_loss},{ref_err}\n"
            )
    write_eval_csv(reports, folds_csv)
    from .report import plot_model_bars

    plot_model_bars(reports, table_png,
                    title=f"{proto.name}-scale results on {ds.name}")

    if not args.quiet:
        print(f"\n{proto.name}-scale results on {ds.name} "
              f"({proto.folds}-fold CV; reference columns are the published "
              "full-scale numbers, for orientation only, not targets)")
        print(f"{'model':6s} {'MSE':>10s} {'error':>8s}   {'ref loss':>8s} {'ref err':>8s}")
        for rep in reports:
            ref_loss, ref_err = reference[rep.model]
            print(
                f"{rep.model:6s} {rep.recon_mse:10.5f} {100 * rep.error_rate:7.2f}%   "
                f"{ref_loss:8.3f} {100 * ref_err:7.1f}%"
            )
        wins = sum(
            1 for rel, plain in VARIANT_PAIRS
            if next(r.recon_mse for r in reports if r.model == rel)
            < next(r.recon_mse for r in reports if r.model == plain)
        )
        print(f"relational variant beats its counterpart in {wins}/4 pairs")
        print(f"wrote {table_csv}, {folds_csv}, {table_png}")
    return EXIT_OK


def cmd_fetch(args) -> int:
    dest = Path(args.dest) if args.dest else resolve_data_dir(RunSettings())
    if args.dataset in ("mnist", "all"):
        for p in fetch_mnist(dest):
            print(f"ok {p}")
    if args.dataset in ("cifar10", "all"):
        for p in fetch_cifar10(dest):
            print(f"ok {p}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="relae",
        description="Train and benchmark relational autoencoder variants.",
    )
    ap.add_argument("--version", action="version", version=f"relae {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    for name, fn in (("train", cmd_train), ("eval", cmd_eval), ("sweep", cmd_sweep)):
        p = sub.add_parser(name, help=f"{name} from a config file")
        p.add_argument("-c", "--config", required=True, help="INI config path")
        p.add_argument("--out", help="output directory (overrides [output] dir)")
        p.add_argument("-q", "--quiet", action="store_true")
        p.set_defaults(fn=fn)

    p = sub.add_parser("reproduce", help="run a built-in benchmark protocol")
    p.add_argument("target", help="table1 | fig2")
    p.add_argument("--scale", choices=sorted(SCALES), default="desk")
    p.add_argument("--dataset", choices=("auto", "mnist", "cifar10", "fixture", "synthetic"),
                   default="auto")
    p.add_argument("--data-dir", help=f"dataset directory (default ./data or ${DATA_DIR_ENV})")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", help="output directory")
    p.add_argument("-q", "--quiet", action="store_true")
    p.set_defaults(fn=cmd_reproduce)

    p = sub.add_parser("fetch-data", help="download datasets with pinned checksums")
    p.add_argument("--dataset", choices=("mnist", "cifar10", "all"), default="all")
    p.add_argument("--dest", help=f"destination directory (default ./data or ${DATA_DIR_ENV})")
    p.set_defaults(fn=cmd_fetch)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
