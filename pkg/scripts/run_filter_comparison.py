#!/usr/bin/env python3
"""Train the three filter kinds on identical subsets and compare accuracy.

For every seed the script trains a variational-circuit model, a frozen
random-circuit model, and a plain classical model on the same stratified
train/test subsets, writes one metrics CSV per run, and prints a summary
table plus per-kind mean/spread of the final test accuracy.

Example:
    python3 scripts/run_filter_comparison.py --data-dir data/digits \
        --epochs 30 --seeds 0,1,2 --out-dir runs/comparison
"""

from __future__ import annotations

import argparse
import logging
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

REPO_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO_ROOT / "src"))

from qconv.cli import ESTIMATORS, FILTER_KINDS, CSV_HEADER  # noqa: E402
from qconv.data import derive_seed, load_dataset, stratified_subset  # noqa: E402
from qconv.model import init_model  # noqa: E402
from qconv.optim import SgdConfig  # noqa: E402
from qconv.train import evaluate, train  # noqa: E402

logger = logging.getLogger("run_filter_comparison")

KINDS = ("variational", "fixed", "classical")


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--data-dir",
        type=Path,
        default=REPO_ROOT / "data" / "digits",
        help="directory with MNIST-format idx files (generated if missing)",
    )
    parser.add_argument("--epochs", type=int, default=30)
    parser.add_argument("--train-count", type=int, default=50)
    parser.add_argument("--test-count", type=int, default=30)
    parser.add_argument("--seeds", default="0,1,2", help="comma-separated list")
    parser.add_argument("--size-n", type=int, default=2, choices=(2, 4))
    parser.add_argument("--num-filters", type=int, default=4)
    parser.add_argument(
        "--estimator",
        default="overlap",
        choices=[e for e in ESTIMATORS if e != "classical"],
        help="circuit estimator for the variational and fixed kinds",
    )
    parser.add_argument("--sgd-lr", type=float, default=2.0)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out-dir", type=Path, default=REPO_ROOT / "runs" / "comparison")
    return parser.parse_args()


def ensure_data(data_dir: Path) -> None:
    if (data_dir / "train-images-idx3-ubyte").exists():
        return
    logger.info("generating digits idx files in %s", data_dir)
    subprocess.run(
        [sys.executable, str(REPO_ROOT / "scripts" / "make_digits_idx.py"), str(data_dir)],
        check=True,
    )


def run_one(args: argparse.Namespace, kind: str, seed: int) -> dict:
    estimator = "classical" if kind == "classical" else args.estimator
    full_train = load_dataset(
        args.data_dir / "train-images-idx3-ubyte",
        args.data_dir / "train-labels-idx1-ubyte",
    )
    full_test = load_dataset(
        args.data_dir / "t10k-images-idx3-ubyte",
        args.data_dir / "t10k-labels-idx1-ubyte",
    )
    train_ds = stratified_subset(full_train, args.train_count, derive_seed(seed, 0))
    test_ds = stratified_subset(full_test, args.test_count, derive_seed(seed, 1))
    model = init_model(
        FILTER_KINDS[kind],
        ESTIMATORS[estimator],
        args.size_n,
        args.num_filters,
        train_ds.images.shape[1:],
        1.0,
        derive_seed(seed, 2),
    )

    csv_path = args.out_dir / f"{kind}_seed{seed}.csv"
    started = time.perf_counter()
    best_test = 0.0
    last = None
    with csv_path.open("w") as csv_file:
        csv_file.write(CSV_HEADER + "\n")
        for record in train(
            model,
            train_ds,
            test_ds,
            args.epochs,
            sgd=SgdConfig(args.sgd_lr),
            workers=args.workers,
            seed=seed,
        ):
            csv_file.write(record.csv_row() + "\n")
            csv_file.flush()
            best_test = max(best_test, record.test_accuracy)
            last = record
    elapsed = time.perf_counter() - started

    if last is None:  # epochs == 0
        _, train_acc = evaluate(train_ds, model, args.workers)
        _, test_acc = evaluate(test_ds, model, args.workers)
    else:
        train_acc, test_acc = last.train_accuracy, last.test_accuracy
    return {
        "kind": kind,
        "seed": seed,
        "train_acc": train_acc,
        "test_acc": test_acc,
        "best_test": best_test,
        "seconds": elapsed,
        "csv": csv_path,
    }


def main() -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = parse_args()
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    if not seeds:
        raise SystemExit("error: --seeds must name at least one seed")
    args.out_dir.mkdir(parents=True, exist_ok=True)
    ensure_data(args.data_dir)

    rows = []
    for seed in seeds:
        for kind in KINDS:
            logger.info("training kind=%s seed=%d", kind, seed)
            rows.append(run_one(args, kind, seed))

    print()
    print(f"{'kind':<12} {'seed':>4} {'train_acc':>9} {'test_acc':>8} "
          f"{'best_test':>9} {'seconds':>8}")
    for row in rows:
        print(
            f"{row['kind']:<12} {row['seed']:>4} {row['train_acc']:>9.2f} "
            f"{row['test_acc']:>8.2f} {row['best_test']:>9.2f} {row['seconds']:>8.1f}"
        )
    print()
    for kind in KINDS:
        finals = np.array([r["test_acc"] for r in rows if r["kind"] == kind])
        print(
            f"{kind:<12} final test acc mean {finals.mean():.3f} "
            f"spread {finals.max() - finals.min():.3f} over seeds {seeds}"
        )
    print(f"\nper-epoch metrics saved under {args.out_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
