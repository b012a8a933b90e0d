"""Command-line entry points: train, eval, bench, opcount.

Configuration precedence is CLI flags, then a ``key = value`` config file,
then built-in defaults.  The worker count can also come from the
QCONV_WORKERS environment variable when neither flag nor file sets it.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import (
    NUM_CLASSES,
    Dataset,
    derive_seed,
    load_dataset,
    stratified_subset,
)
from .filters import EstimatorMode
from .model import (
    CheckpointError,
    FilterKind,
    HybridModel,
    cross_entropy,
    dense_forward,
    extract_windows,
    init_model,
    load_checkpoint,
    op_count,
    predict,
    save_checkpoint,
)
from .optim import SgdConfig
from .parallel import default_workers
from .train import CSV_HEADER, _forward_features, train

logger = logging.getLogger(__name__)

ESTIMATORS = {
    "overlap": EstimatorMode.OVERLAP_SQUARED,
    "hadamard": EstimatorMode.HADAMARD_REAL,
    "classical": EstimatorMode.CLASSICAL_DOT,
}

FILTER_KINDS = {
    "variational": FilterKind.VARIATIONAL,
    "fixed": FilterKind.FIXED,
    "classical": FilterKind.CLASSICAL,
}


@dataclass
class RunConfig:
    train_images: str = ""
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""
    filter_kind: str = "variational"
    estimator: str = "overlap"
    size_n: int = 2
    num_filters: int = 4
    epochs: int = 30
    train_count: int = 50
    test_count: int = 30
    seed: int = 0
    # the 1/NUM_CLASSES factor in the loss shrinks gradients tenfold, so the
    # dense head needs a correspondingly larger step to train in 30 epochs
    sgd_lr: float = 2.0
    adadelta_rho: float = 0.95
    adadelta_epsilon: float = 1e-6
    adadelta_lr_scale: float = 1.0
    scale: float = 1.0
    batch_size: int = 0
    workers: int = 0  # 0 = take QCONV_WORKERS env var, else 1
    metrics_csv: str = "metrics.csv"
    checkpoint: str = "model.json"

    def validate(self) -> None:
        if self.filter_kind not in FILTER_KINDS:
            raise ValueError(f"unknown filter kind {self.filter_kind!r}")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.filter_kind == "classical" and self.estimator != "classical":
            raise ValueError("classical filters require the classical estimator")
        if self.filter_kind != "classical" and self.estimator == "classical":
            raise ValueError("the classical estimator requires classical filters")
        if self.size_n < 1:
            raise ValueError(f"filter size must be >= 1, got {self.size_n}")
        if self.size_n not in (2, 4):
            logger.warning(
                "filter size %d needs a 2**%d-amplitude state per window; "
                "sizes 2 and 4 are the supported defaults",
                self.size_n,
                self.size_n**2,
            )
        for name in ("num_filters", "train_count", "test_count"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.epochs < 0 or self.batch_size < 0 or self.workers < 0:
            raise ValueError("epochs, batch_size and workers must be >= 0")
        if self.sgd_lr <= 0 or self.scale <= 0:
            raise ValueError("sgd_lr and scale must be positive")
        if not 0.0 <= self.adadelta_rho < 1.0:
            raise ValueError(f"adadelta_rho must be in [0, 1), got {self.adadelta_rho}")
        if self.adadelta_epsilon <= 0 or self.adadelta_lr_scale <= 0:
            raise ValueError("adadelta_epsilon and adadelta_lr_scale must be positive")

    def resolved_workers(self) -> int:
        return self.workers if self.workers > 0 else default_workers()


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}
_COERCE = {"int": int, "float": float, "str": str}


def read_config_file(path: str | Path) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment, blanks are skipped."""
    values: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in _FIELD_TYPES:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            values[key] = _COERCE[_FIELD_TYPES[key]](value.strip())
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return values


def build_config(args: argparse.Namespace, base: dict | None = None) -> RunConfig:
    """Defaults, overlaid by ``base``, the config file, then explicit flags."""
    values = dataclasses.asdict(RunConfig())
    if base:
        values.update({k: v for k, v in base.items() if k in _FIELD_TYPES})
    config_path = getattr(args, "config", None)
    if config_path:
        values.update(read_config_file(config_path))
    for name in _FIELD_TYPES:
        flag_value = getattr(args, name, None)
        if flag_value is not None:
            values[name] = flag_value
    config = RunConfig(**values)
    config.validate()
    return config


def _load_subsets(config: RunConfig) -> tuple[Dataset, Dataset]:
    full_train = load_dataset(config.train_images, config.train_labels)
    full_test = load_dataset(config.test_images, config.test_labels)
    train_ds = stratified_subset(
        full_train, config.train_count, derive_seed(config.seed, 0)
    )
    test_ds = stratified_subset(
        full_test, config.test_count, derive_seed(config.seed, 1)
    )
    for name, ds in (("train", train_ds), ("test", test_ds)):
        if ds.subset_warning:
            logger.warning("%s subset: %s", name, ds.subset_warning)
    return train_ds, test_ds


def _build_model(config: RunConfig, image_shape: tuple[int, int]) -> HybridModel:
    return init_model(
        FILTER_KINDS[config.filter_kind],
        ESTIMATORS[config.estimator],
        config.size_n,
        config.num_filters,
        image_shape,
        config.scale,
        derive_seed(config.seed, 2),
    )


def cmd_train(args: argparse.Namespace) -> int:
    config = build_config(args)
    train_ds, test_ds = _load_subsets(config)
    image_shape = train_ds.images.shape[1:]
    model = _build_model(config, image_shape)
    workers = config.resolved_workers()

    csv_path = Path(config.metrics_csv)
    with csv_path.open("w") as csv_file:
        csv_file.write(CSV_HEADER + "\n")
        csv_file.flush()
        last = None
        for record in train(
            model,
            train_ds,
            test_ds,
            config.epochs,
            sgd=SgdConfig(config.sgd_lr),
            rho=config.adadelta_rho,
            epsilon=config.adadelta_epsilon,
            lr_scale=config.adadelta_lr_scale,
            workers=workers,
            batch_size=config.batch_size,
            seed=config.seed,
        ):
            csv_file.write(record.csv_row() + "\n")
            csv_file.flush()
            last = record
    metadata = {"config": dataclasses.asdict(config)}
    if last is not None:
        metadata["final"] = {
            "epoch": last.epoch,
            "train_acc": last.train_accuracy,
            "test_acc": last.test_accuracy,
        }
    save_checkpoint(model, config.checkpoint, metadata)
    if last is None:
        print(f"no epochs run; initial model saved to {config.checkpoint}")
    else:
        print(
            f"epoch {last.epoch}: train_acc {last.train_accuracy:.4f} "
            f"test_acc {last.test_accuracy:.4f}; "
            f"metrics in {config.metrics_csv}, checkpoint in {config.checkpoint}"
        )
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    model, metadata = load_checkpoint(args.checkpoint_path)
    config = build_config(args, base=metadata.get("config", {}))
    full = (
        load_dataset(config.train_images, config.train_labels)
        if args.use_train_subset
        else load_dataset(config.test_images, config.test_labels)
    )
    count = config.train_count if args.use_train_subset else config.test_count
    stream = 0 if args.use_train_subset else 1
    subset = stratified_subset(full, count, derive_seed(config.seed, stream))
    workers = config.resolved_workers()

    windows = [extract_windows(img, model.size_n) for img in subset.images]
    features = _forward_features(windows, model, workers)
    confusion = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    losses = []
    for feat, label in zip(features, subset.labels):
        probs = dense_forward(feat.reshape(-1), model)
        losses.append(cross_entropy(probs, int(label)))
        confusion[int(label), predict(probs)] += 1
    acc = float(confusion.trace()) / len(subset)
    which = "train" if args.use_train_subset else "test"
    print(f"{which} accuracy {acc!r} ({int(confusion.trace())}/{len(subset)})")
    print(f"{which} loss {float(np.mean(losses))!r}")
    print("confusion matrix (rows = true class, cols = predicted):")
    header = "     " + " ".join(f"p{c:<3d}" for c in range(NUM_CLASSES))
    print(header)
    for c in range(NUM_CLASSES):
        row = " ".join(f"{confusion[c, d]:<4d}" for d in range(NUM_CLASSES))
        print(f"t{c:<3d} {row}")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    config = build_config(args)
    sizes = [int(s) for s in args.sizes.split(",") if s]
    estimators = [s.strip() for s in args.estimators.split(",") if s.strip()]
    worker_counts = [int(s) for s in args.bench_workers.split(",") if s]
    num_images = args.images
    image_shape = (args.image_size, args.image_size)
    rng = np.random.default_rng(config.seed)
    images = rng.random((num_images,) + image_shape)

    print("n,estimator,workers,images,seconds_per_image")
    for size_n in sizes:
        for estimator in estimators:
            if estimator not in ESTIMATORS or estimator == "classical":
                raise ValueError(f"bench estimator must be overlap or hadamard, got {estimator!r}")
            bench_config = dataclasses.replace(
                config,
                size_n=size_n,
                estimator=estimator,
                filter_kind="variational",
            )
            model = _build_model(bench_config, image_shape)
            windows = [extract_windows(img, size_n) for img in images]
            for workers in worker_counts:
                started = time.perf_counter()
                _forward_features(windows, model, workers)
                elapsed = time.perf_counter() - started
                print(
                    f"{size_n},{estimator},{workers},{num_images},"
                    f"{elapsed / num_images!r}"
                )
    return 0


def cmd_opcount(args: argparse.Namespace) -> int:
    total = op_count(
        args.image_size, args.filter_size, args.num_filters, args.images, args.epochs
    )
    print(total)
    return 0


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--train-images", dest="train_images")
    parser.add_argument("--train-labels", dest="train_labels")
    parser.add_argument("--test-images", dest="test_images")
    parser.add_argument("--test-labels", dest="test_labels")
    parser.add_argument(
        "--filter-kind", dest="filter_kind", choices=sorted(FILTER_KINDS)
    )
    parser.add_argument("--estimator", choices=sorted(ESTIMATORS))
    parser.add_argument("--n", dest="size_n", type=int, help="filter edge length")
    parser.add_argument("--filters", dest="num_filters", type=int)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--train-count", dest="train_count", type=int)
    parser.add_argument("--test-count", dest="test_count", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--sgd-lr", dest="sgd_lr", type=float)
    parser.add_argument("--adadelta-rho", dest="adadelta_rho", type=float)
    parser.add_argument("--adadelta-epsilon", dest="adadelta_epsilon", type=float)
    parser.add_argument("--adadelta-lr-scale", dest="adadelta_lr_scale", type=float)
    parser.add_argument("--scale", type=float, help="embedding angle scale")
    parser.add_argument("--batch-size", dest="batch_size", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--metrics-csv", dest="metrics_csv")
    parser.add_argument("--checkpoint", dest="checkpoint")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qconv",
        description="Hybrid classifier with quantum-circuit convolution filters",
    )
    parser.add_argument(
        "--log-level",
        default="info",
        choices=["debug", "info", "warning", "error"],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model, writing metrics CSV + checkpoint")
    _add_config_flags(p_train)
    p_train.set_defaults(fn=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    p_eval.add_argument("checkpoint_path")
    p_eval.add_argument(
        "--use-train-subset",
        action="store_true",
        help="evaluate on the checkpoint's training subset instead of the test subset",
    )
    _add_config_flags(p_eval)
    p_eval.set_defaults(fn=cmd_eval)

    p_bench = sub.add_parser("bench", help="per-image forward timing table (CSV)")
    p_bench.add_argument("--sizes", default="2,4", help="comma-separated filter sizes")
    p_bench.add_argument(
        "--estimators", default="overlap,hadamard", help="comma-separated estimators"
    )
    p_bench.add_argument("--images", type=int, default=2)
    p_bench.add_argument("--image-size", dest="image_size", type=int, default=28)
    p_bench.add_argument(
        "--bench-workers",
        default="1",
        help="comma-separated worker counts for scaling rows",
    )
    _add_config_flags(p_bench)
    p_bench.set_defaults(fn=cmd_bench)

    p_op = sub.add_parser(
        "opcount", help="forward filter evaluations for a training run"
    )
    p_op.add_argument("image_size", type=int)
    p_op.add_argument("filter_size", type=int)
    p_op.add_argument("num_filters", type=int)
    p_op.add_argument("images", type=int)
    p_op.add_argument("epochs", type=int)
    p_op.set_defaults(fn=cmd_opcount)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper()),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.fn(args)
    except (OSError, ValueError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
