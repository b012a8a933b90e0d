"""Hybrid convolution-plus-dense classifier over 10 classes.

An image is tiled into non-overlapping n*n windows.  Each of the m filters
maps every window to one scalar response, giving an m-channel feature map,
which a single dense softmax layer turns into class probabilities.  The
filters are either variational circuits (trainable), fixed random circuits
(frozen), or plain classical dot products (the baseline).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .data import NUM_CLASSES
from .filters import (
    EstimatorMode,
    FilterParams,
    eval_hadamard_real_batch,
    eval_overlap_sq_batch,
    init_fixed,
    init_variational,
    param_shift_derivs_batch,
)

CHECKPOINT_VERSION = 1

LOSS_CLAMP = 1e-12


class FilterKind(Enum):
    VARIATIONAL = "variational"
    FIXED = "fixed"
    CLASSICAL = "classical"


class CheckpointError(ValueError):
    pass


@dataclass
class HybridModel:
    filter_kind: FilterKind
    estimator: EstimatorMode
    size_n: int
    scale: float
    image_shape: tuple[int, int]
    # FilterParams per filter for circuit kinds, 1-d weight vectors for classical
    filters: list
    dense_weights: np.ndarray
    dense_bias: np.ndarray

    def __post_init__(self) -> None:
        if (self.filter_kind is FilterKind.CLASSICAL) != (
            self.estimator is EstimatorMode.CLASSICAL_DOT
        ):
            raise ValueError(
                f"filter kind {self.filter_kind.value} does not go with "
                f"estimator {self.estimator.value}"
            )
        if not self.filters:
            raise ValueError("model needs at least one filter")
        h, w = self.image_shape
        if self.size_n < 1 or self.size_n > min(h, w):
            raise ValueError(
                f"filter size {self.size_n} does not fit image {h}x{w}"
            )
        self.dense_weights = np.asarray(self.dense_weights, dtype=np.float64)
        self.dense_bias = np.asarray(self.dense_bias, dtype=np.float64)
        if self.dense_weights.shape != (self.num_features, NUM_CLASSES):
            raise ValueError(
                f"dense weights shape {self.dense_weights.shape}, "
                f"expected {(self.num_features, NUM_CLASSES)}"
            )
        if self.dense_bias.shape != (NUM_CLASSES,):
            raise ValueError(f"dense bias shape {self.dense_bias.shape}")

    @property
    def num_filters(self) -> int:
        return len(self.filters)

    @property
    def grid_shape(self) -> tuple[int, int]:
        h, w = self.image_shape
        return h // self.size_n, w // self.size_n

    @property
    def windows_per_image(self) -> int:
        gh, gw = self.grid_shape
        return gh * gw

    @property
    def num_features(self) -> int:
        return self.num_filters * self.windows_per_image

    def trainable_filter_vector(self) -> np.ndarray:
        """All variational angles concatenated filter by filter."""
        if self.filter_kind is not FilterKind.VARIATIONAL:
            raise ValueError("only variational filters are trainable circuits")
        return np.concatenate([p.to_vector() for p in self.filters])

    def set_filter_vector(self, vec: np.ndarray) -> None:
        """Write back angles produced by ``trainable_filter_vector`` order."""
        per = self.filters[0].num_params
        if vec.shape != (per * self.num_filters,):
            raise ValueError(f"expected {per * self.num_filters} angles")
        self.filters = [
            FilterParams.from_vector(self.size_n, vec[f * per : (f + 1) * per])
            for f in range(self.num_filters)
        ]


def init_model(
    filter_kind: FilterKind,
    estimator: EstimatorMode,
    size_n: int,
    num_filters: int,
    image_shape: tuple[int, int],
    scale: float,
    seed: int,
) -> HybridModel:
    """Seeded model construction; the same seed always gives the same model."""
    if num_filters < 1:
        raise ValueError(f"num_filters must be >= 1, got {num_filters}")
    if size_n < 1 or size_n > min(image_shape):
        raise ValueError(
            f"filter size {size_n} does not fit image "
            f"{image_shape[0]}x{image_shape[1]}"
        )
    rng = np.random.default_rng(seed)
    q = size_n**2
    if filter_kind is FilterKind.VARIATIONAL:
        filters: list = [init_variational(size_n, rng) for _ in range(num_filters)]
    elif filter_kind is FilterKind.FIXED:
        filters = [init_fixed(size_n, rng) for _ in range(num_filters)]
    else:
        bound = 1.0 / np.sqrt(q)
        filters = [rng.uniform(-bound, bound, q) for _ in range(num_filters)]
    h, w = image_shape
    num_features = num_filters * (h // size_n) * (w // size_n)
    bound = 1.0 / np.sqrt(num_features)
    dense_weights = rng.uniform(-bound, bound, (num_features, NUM_CLASSES))
    dense_bias = np.zeros(NUM_CLASSES)
    return HybridModel(
        filter_kind,
        estimator,
        size_n,
        scale,
        image_shape,
        filters,
        dense_weights,
        dense_bias,
    )


def extract_windows(image: np.ndarray, size_n: int) -> np.ndarray:
    """Non-overlapping n*n tiles in row-major order, shape (tiles, n*n).

    Trailing rows/columns that do not fill a tile are dropped.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError(f"image must be 2-d, got shape {image.shape}")
    h, w = image.shape
    if size_n < 1 or size_n > min(h, w):
        raise ValueError(f"window size {size_n} does not fit image {h}x{w}")
    gh, gw = h // size_n, w // size_n
    cropped = image[: gh * size_n, : gw * size_n]
    tiles = cropped.reshape(gh, size_n, gw, size_n).transpose(0, 2, 1, 3)
    return tiles.reshape(gh * gw, size_n * size_n)


def window_responses(
    windows: np.ndarray, model: HybridModel, filter_index: int
) -> np.ndarray:
    """One filter's response to every window, shape (num_windows,)."""
    f = model.filters[filter_index]
    if model.estimator is EstimatorMode.OVERLAP_SQUARED:
        return eval_overlap_sq_batch(windows, f, model.scale)
    if model.estimator is EstimatorMode.HADAMARD_REAL:
        return eval_hadamard_real_batch(windows, f, model.scale)
    return windows @ f


def conv_forward(image: np.ndarray, model: HybridModel) -> np.ndarray:
    """Feature map of shape (num_filters, grid_h, grid_w)."""
    windows = extract_windows(image, model.size_n)
    features = np.stack(
        [window_responses(windows, model, f) for f in range(model.num_filters)]
    )
    return features.reshape((model.num_filters,) + model.grid_shape)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def dense_forward(features_flat: np.ndarray, model: HybridModel) -> np.ndarray:
    features_flat = np.asarray(features_flat, dtype=np.float64)
    if features_flat.shape != (model.num_features,):
        raise ValueError(
            f"expected {model.num_features} features, got {features_flat.shape}"
        )
    return softmax(features_flat @ model.dense_weights + model.dense_bias)


def cross_entropy(probs: np.ndarray, label: int) -> float:
    """Scaled negative log-likelihood: -log(p_label) / NUM_CLASSES."""
    if not 0 <= label < NUM_CLASSES:
        raise ValueError(f"label {label} out of range 0..{NUM_CLASSES - 1}")
    p = max(float(probs[label]), LOSS_CLAMP)
    return -np.log(p) / NUM_CLASSES


def predict(probs: np.ndarray) -> int:
    """Most probable class; ties go to the lowest index."""
    return int(np.argmax(probs))


@dataclass
class ForwardResult:
    windows: np.ndarray  # (num_windows, n*n)
    features: np.ndarray  # (num_filters, num_windows)
    probs: np.ndarray  # (NUM_CLASSES,)


def model_forward(image: np.ndarray, model: HybridModel) -> ForwardResult:
    windows = extract_windows(image, model.size_n)
    features = np.stack(
        [window_responses(windows, model, f) for f in range(model.num_filters)]
    )
    probs = dense_forward(features.reshape(-1), model)
    return ForwardResult(windows, features, probs)


@dataclass
class DenseGrads:
    loss: float
    correct: bool
    dense_weights: np.ndarray
    dense_bias: np.ndarray
    dfeatures: np.ndarray  # (num_filters, num_windows)


def dense_backward(result: ForwardResult, label: int, model: HybridModel) -> DenseGrads:
    """Loss plus gradients through the softmax head, down to the features."""
    probs = result.probs
    loss = cross_entropy(probs, label)
    target = np.zeros(NUM_CLASSES)
    target[label] = 1.0
    # d loss / d logits for loss = -log(p_label) / NUM_CLASSES
    dlogits = (probs - target) / NUM_CLASSES
    feat_flat = result.features.reshape(-1)
    dense_w = np.outer(feat_flat, dlogits)
    dense_b = dlogits.copy()
    dfeat = (model.dense_weights @ dlogits).reshape(result.features.shape)
    return DenseGrads(loss, predict(probs) == label, dense_w, dense_b, dfeat)


def filter_gradient(
    windows: np.ndarray,
    dfeature_row: np.ndarray,
    model: HybridModel,
    filter_index: int,
) -> np.ndarray:
    """Chain rule through one filter: d loss / d (that filter's parameters)."""
    if model.filter_kind is FilterKind.CLASSICAL:
        return windows.T @ dfeature_row
    if model.filter_kind is FilterKind.FIXED:
        raise ValueError("fixed filters are frozen and take no gradient")
    derivs = param_shift_derivs_batch(
        windows, model.filters[filter_index], model.estimator, model.scale
    )
    return derivs @ dfeature_row


@dataclass
class ModelGrads:
    loss: float
    correct: bool
    dense_weights: np.ndarray
    dense_bias: np.ndarray
    # one gradient per filter; empty for the frozen (fixed) kind
    filters: list


def model_backward(image: np.ndarray, label: int, model: HybridModel) -> ModelGrads:
    """Loss and all trainable gradients for one image."""
    result = model_forward(image, model)
    dense = dense_backward(result, label, model)
    if model.filter_kind is FilterKind.FIXED:
        filter_grads: list = []
    else:
        filter_grads = [
            filter_gradient(result.windows, dense.dfeatures[f], model, f)
            for f in range(model.num_filters)
        ]
    return ModelGrads(
        dense.loss, dense.correct, dense.dense_weights, dense.dense_bias, filter_grads
    )


def op_count(
    image_size: int,
    filter_size: int,
    num_filters: int,
    num_images: int,
    num_epochs: int,
) -> int:
    """Total single-window filter evaluations in a forward-only training pass:
    (image_size // filter_size)**2 windows per image, per filter, per image,
    per epoch."""
    values = {
        "image_size": image_size,
        "filter_size": filter_size,
        "num_filters": num_filters,
        "num_images": num_images,
        "num_epochs": num_epochs,
    }
    for name, v in values.items():
        if v < 1:
            raise ValueError(f"{name} must be >= 1, got {v}")
    if filter_size > image_size:
        raise ValueError(
            f"filter_size {filter_size} exceeds image_size {image_size}"
        )
    return (image_size // filter_size) ** 2 * num_filters * num_images * num_epochs


def save_checkpoint(
    model: HybridModel, path: str | Path, metadata: dict | None = None
) -> None:
    """Write the full model as versioned JSON; floats keep full precision."""
    if model.filter_kind is FilterKind.CLASSICAL:
        filters = [np.asarray(f).tolist() for f in model.filters]
    else:
        filters = [
            {"theta_rx": p.theta_rx.tolist(), "theta_ry": p.theta_ry.tolist()}
            for p in model.filters
        ]
    payload = {
        "version": CHECKPOINT_VERSION,
        "filter_kind": model.filter_kind.value,
        "estimator": model.estimator.value,
        "size_n": model.size_n,
        "scale": model.scale,
        "image_shape": list(model.image_shape),
        "filters": filters,
        "dense_weights": model.dense_weights.tolist(),
        "dense_bias": model.dense_bias.tolist(),
        "metadata": metadata or {},
    }
    Path(path).write_text(json.dumps(payload))


def load_checkpoint(path: str | Path) -> tuple[HybridModel, dict]:
    """Read a checkpoint back; returns the model and its metadata dict."""
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: not valid JSON: {exc}") from exc
    try:
        version = payload["version"]
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(
                f"{path}: checkpoint version {version}, "
                f"expected {CHECKPOINT_VERSION}"
            )
        kind = FilterKind(payload["filter_kind"])
        estimator = EstimatorMode(payload["estimator"])
        size_n = int(payload["size_n"])
        if kind is FilterKind.CLASSICAL:
            filters: list = [np.asarray(f, dtype=np.float64) for f in payload["filters"]]
        else:
            filters = [
                FilterParams(
                    size_n,
                    np.asarray(f["theta_rx"], dtype=np.float64),
                    np.asarray(f["theta_ry"], dtype=np.float64),
                )
                for f in payload["filters"]
            ]
        model = HybridModel(
            kind,
            estimator,
            size_n,
            float(payload["scale"]),
            tuple(payload["image_shape"]),
            filters,
            np.asarray(payload["dense_weights"], dtype=np.float64),
            np.asarray(payload["dense_bias"], dtype=np.float64),
        )
        return model, payload.get("metadata", {})
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"{path}: malformed checkpoint: {exc}") from exc
