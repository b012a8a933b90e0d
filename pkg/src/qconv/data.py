"""IDX image/label files and deterministic dataset subsetting.

The IDX format is the classic big-endian binary layout: a magic number,
dimension sizes as unsigned 32-bit ints, then raw bytes.  Pixels are stored
as uint8 and mapped to floats in [0, 1] by dividing by 255.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049
NUM_CLASSES = 10


@dataclass
class Dataset:
    """Images (count, height, width) in [0, 1] with integer labels in 0..9."""

    images: np.ndarray
    labels: np.ndarray
    subset_warning: str | None = None

    def __post_init__(self) -> None:
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 3:
            raise ValueError(f"images must be 3-d, got shape {self.images.shape}")
        if len(self.images) != len(self.labels):
            raise ValueError(
                f"{len(self.images)} images but {len(self.labels)} labels"
            )
        if self.labels.size and (
            self.labels.min() < 0 or self.labels.max() >= NUM_CLASSES
        ):
            raise ValueError("labels must lie in 0..9")

    def __len__(self) -> int:
        return len(self.labels)


def load_idx_images(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 16:
        raise ValueError(f"{path}: truncated image header")
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IMAGE_MAGIC:
        raise ValueError(f"{path}: bad image magic {magic}, expected {IMAGE_MAGIC}")
    expected = 16 + count * rows * cols
    if len(raw) != expected:
        raise ValueError(
            f"{path}: expected {expected} bytes for {count} images, got {len(raw)}"
        )
    pixels = np.frombuffer(raw, dtype=np.uint8, offset=16)
    return pixels.reshape(count, rows, cols).astype(np.float64) / 255.0


def load_idx_labels(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise ValueError(f"{path}: truncated label header")
    magic, count = struct.unpack(">II", raw[:8])
    if magic != LABEL_MAGIC:
        raise ValueError(f"{path}: bad label magic {magic}, expected {LABEL_MAGIC}")
    if len(raw) != 8 + count:
        raise ValueError(
            f"{path}: expected {8 + count} bytes for {count} labels, got {len(raw)}"
        )
    labels = np.frombuffer(raw, dtype=np.uint8, offset=8).astype(np.int64)
    if labels.size and labels.max() >= NUM_CLASSES:
        raise ValueError(f"{path}: label {labels.max()} out of range 0..9")
    return labels


def save_idx_images(images: np.ndarray, path: str | Path) -> None:
    """Write float images in [0, 1] as uint8 IDX; round-trips with the loader."""
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 3:
        raise ValueError(f"images must be 3-d, got shape {images.shape}")
    if images.size and (images.min() < 0.0 or images.max() > 1.0):
        raise ValueError("pixel values must lie in [0, 1]")
    count, rows, cols = images.shape
    header = struct.pack(">IIII", IMAGE_MAGIC, count, rows, cols)
    body = np.rint(images * 255.0).astype(np.uint8).tobytes()
    Path(path).write_bytes(header + body)


def save_idx_labels(labels: np.ndarray, path: str | Path) -> None:
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValueError(f"labels must be 1-d, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= NUM_CLASSES):
        raise ValueError("labels must lie in 0..9")
    header = struct.pack(">II", LABEL_MAGIC, len(labels))
    Path(path).write_bytes(header + labels.astype(np.uint8).tobytes())


def load_dataset(images_path: str | Path, labels_path: str | Path) -> Dataset:
    images = load_idx_images(images_path)
    labels = load_idx_labels(labels_path)
    if len(images) != len(labels):
        raise ValueError(
            f"{images_path} has {len(images)} images but "
            f"{labels_path} has {len(labels)} labels"
        )
    return Dataset(images, labels)


def stratified_subset(dataset: Dataset, total: int, seed: int) -> Dataset:
    """Pick ``total`` items spread evenly over the 10 classes, seeded.

    Each class contributes at most ceil(total / 10) items.  If some class
    runs out, the remainder is filled from the other classes and
    ``subset_warning`` on the result says so.  The same seed always yields
    the same subset.
    """
    if not 0 < total <= len(dataset):
        raise ValueError(
            f"subset size {total} not in 1..{len(dataset)}"
        )
    cap = math.ceil(total / NUM_CLASSES)
    rng = np.random.default_rng(seed)
    pools = [
        list(rng.permutation(np.flatnonzero(dataset.labels == c)))
        for c in range(NUM_CLASSES)
    ]
    taken = [0] * NUM_CLASSES
    chosen: list[int] = []

    def round_robin(limit_fn) -> None:
        while len(chosen) < total:
            progressed = False
            for c in range(NUM_CLASSES):
                if len(chosen) >= total:
                    break
                if taken[c] < limit_fn(c):
                    chosen.append(int(pools[c][taken[c]]))
                    taken[c] += 1
                    progressed = True
            if not progressed:
                break

    round_robin(lambda c: min(cap, len(pools[c])))
    warning = None
    if len(chosen) < total:
        round_robin(lambda c: len(pools[c]))
        counts = {c: taken[c] for c in range(NUM_CLASSES) if taken[c]}
        warning = (
            f"class balance not achievable: per-class cap {cap} unmet, "
            f"filled to {total} with counts {counts}"
        )
    order = rng.permutation(len(chosen))
    index = np.asarray(chosen, dtype=np.int64)[order]
    return Dataset(dataset.images[index], dataset.labels[index], warning)


def random_subset(dataset: Dataset, total: int, seed: int) -> Dataset:
    """Pick ``total`` items uniformly without replacement, seeded."""
    if not 0 < total <= len(dataset):
        raise ValueError(f"subset size {total} not in 1..{len(dataset)}")
    rng = np.random.default_rng(seed)
    index = rng.permutation(len(dataset))[:total]
    return Dataset(dataset.images[index], dataset.labels[index])


def derive_seed(master: int, stream: int) -> int:
    """Stable child seed for a named stream of a master seed."""
    return int(np.random.SeedSequence(master, spawn_key=(stream,)).generate_state(1)[0])
