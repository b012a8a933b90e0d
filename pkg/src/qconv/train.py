"""Training loop: batched gradients, dual optimizers, per-epoch metrics.

Gradients for the dense head (and classical filters) go through plain SGD;
variational circuit angles go through Adadelta, whose adaptive step sizes
cope with the much smaller parameter-shift gradients.  All parallel phases
reduce results in a fixed order, so metrics are identical for any worker
count; only the timing column varies between runs.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .data import Dataset, derive_seed
from .model import (
    FilterKind,
    HybridModel,
    cross_entropy,
    dense_forward,
    extract_windows,
    model_backward,
    predict,
    window_responses,
)
from .optim import AdadeltaState, SgdConfig, adadelta_step, sgd_step
from .parallel import map_batch

logger = logging.getLogger(__name__)

CSV_HEADER = "epoch,train_loss,train_acc,test_acc,epoch_seconds"


@dataclass
class MetricsRecord:
    epoch: int
    train_loss: float
    train_accuracy: float
    test_accuracy: float
    epoch_seconds: float

    def csv_row(self) -> str:
        return (
            f"{self.epoch},{self.train_loss!r},{self.train_accuracy!r},"
            f"{self.test_accuracy!r},{self.epoch_seconds!r}"
        )


def _forward_features(
    windows_list: list[np.ndarray], model: HybridModel, workers: int
) -> list[np.ndarray]:
    """Feature matrix (num_filters, num_windows) per image, executor-mapped."""
    tasks = [
        (lambda w=w, f=f: window_responses(w, model, f))
        for w in windows_list
        for f in range(model.num_filters)
    ]
    flat = map_batch(tasks, workers)
    m = model.num_filters
    return [np.stack(flat[i * m : (i + 1) * m]) for i in range(len(windows_list))]


def evaluate(dataset: Dataset, model: HybridModel, workers: int = 1) -> tuple[float, float]:
    """Mean loss and accuracy of ``model`` over ``dataset``."""
    windows_list = [extract_windows(img, model.size_n) for img in dataset.images]
    features = _forward_features(windows_list, model, workers)
    losses = []
    hits = 0
    for feat, label in zip(features, dataset.labels):
        probs = dense_forward(feat.reshape(-1), model)
        losses.append(cross_entropy(probs, int(label)))
        hits += int(predict(probs) == int(label))
    return float(np.mean(losses)), hits / len(dataset)


def _gradient_step(
    images: np.ndarray,
    labels: np.ndarray,
    model: HybridModel,
    sgd: SgdConfig,
    ada_state: AdadeltaState | None,
    workers: int,
) -> AdadeltaState | None:
    """One optimizer step on a batch; mutates ``model``, returns new state.

    One executor task per image computes the full per-image backward pass
    (the windows inside it are evaluated as one batched circuit run); the
    per-image results are then reduced in image order, so the step is
    independent of the worker count.
    """
    batch = len(images)
    tasks = [
        (lambda i=i: model_backward(images[i], int(labels[i]), model))
        for i in range(batch)
    ]
    per_image = map_batch(tasks, workers)

    dense_w_grad = sum(g.dense_weights for g in per_image) / batch
    dense_b_grad = sum(g.dense_bias for g in per_image) / batch
    model.dense_weights = sgd_step(model.dense_weights, dense_w_grad, sgd)
    model.dense_bias = sgd_step(model.dense_bias, dense_b_grad, sgd)
    logger.info("dense grad norm %.6e", float(np.linalg.norm(dense_w_grad)))

    if model.filter_kind is FilterKind.FIXED:
        return ada_state

    filter_grads = [
        sum(g.filters[f] for g in per_image) / batch
        for f in range(model.num_filters)
    ]
    if model.filter_kind is FilterKind.CLASSICAL:
        for f in range(model.num_filters):
            model.filters[f] = sgd_step(model.filters[f], filter_grads[f], sgd)
        return ada_state

    qgrad = np.concatenate(filter_grads)
    logger.info("circuit grad norm %.6e", float(np.linalg.norm(qgrad)))
    theta, ada_state = adadelta_step(model.trainable_filter_vector(), qgrad, ada_state)
    model.set_filter_vector(theta)
    return ada_state


def _epoch_batches(
    count: int, batch_size: int, epoch: int, seed: int
) -> list[np.ndarray]:
    if batch_size <= 0 or batch_size >= count:
        return [np.arange(count)]
    rng = np.random.default_rng(derive_seed(seed, 1000 + epoch))
    order = rng.permutation(count)
    return [order[i : i + batch_size] for i in range(0, count, batch_size)]


def train(
    model: HybridModel,
    train_data: Dataset,
    test_data: Dataset,
    epochs: int,
    sgd: SgdConfig | None = None,
    rho: float = 0.95,
    epsilon: float = 1e-6,
    lr_scale: float = 1.0,
    workers: int = 1,
    batch_size: int = 0,
    seed: int = 0,
) -> Iterator[MetricsRecord]:
    """Train in place, yielding one metrics record per epoch.

    ``batch_size`` 0 means full batch (one optimizer step per epoch).  The
    train loss/accuracy in each record are measured after that epoch's
    update, so a saved final model reproduces the last row exactly.
    ``epochs`` 0 is allowed and yields nothing.
    """
    if epochs < 0:
        raise ValueError(f"epochs must be >= 0, got {epochs}")
    sgd = sgd or SgdConfig()
    ada_state = None
    if model.filter_kind is FilterKind.VARIATIONAL:
        total = model.num_filters * model.filters[0].num_params
        ada_state = AdadeltaState.zeros(total, rho, epsilon, lr_scale)

    for epoch in range(1, epochs + 1):
        started = time.perf_counter()
        for batch_idx in _epoch_batches(len(train_data), batch_size, epoch, seed):
            ada_state = _gradient_step(
                train_data.images[batch_idx],
                train_data.labels[batch_idx],
                model,
                sgd,
                ada_state,
                workers,
            )
        train_loss, train_acc = evaluate(train_data, model, workers)
        _, test_acc = evaluate(test_data, model, workers)
        elapsed = time.perf_counter() - started
        logger.info(
            "epoch %d: train_loss %.6f train_acc %.4f test_acc %.4f (%.2fs)",
            epoch,
            train_loss,
            train_acc,
            test_acc,
            elapsed,
        )
        yield MetricsRecord(epoch, train_loss, train_acc, test_acc, elapsed)
