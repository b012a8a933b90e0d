#!/usr/bin/env python3
"""Build an IDX image/label dataset from scikit-learn's bundled digits.

The 1797 8x8 handwritten digits are upscaled to 28x28 (nearest neighbor)
and written in the same IDX layout and filenames that the classic MNIST
distribution uses, so anything that reads MNIST reads this too.  The first
1000 digits become the training files, the remaining 797 the test files.

Usage: python3 scripts/make_digits_idx.py [output_dir]
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
from sklearn.datasets import load_digits

from qconv.data import save_idx_images, save_idx_labels

TARGET_SIDE = 28
TRAIN_COUNT = 1000


def upscale_nearest(images: np.ndarray, side: int) -> np.ndarray:
    src_side = images.shape[1]
    index = (np.arange(side) * src_side) // side
    return images[:, index][:, :, index]


def main() -> int:
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("data/digits")
    out_dir.mkdir(parents=True, exist_ok=True)
    digits = load_digits()
    images = upscale_nearest(digits.images / 16.0, TARGET_SIDE)
    labels = digits.target
    save_idx_images(images[:TRAIN_COUNT], out_dir / "train-images-idx3-ubyte")
    save_idx_labels(labels[:TRAIN_COUNT], out_dir / "train-labels-idx1-ubyte")
    save_idx_images(images[TRAIN_COUNT:], out_dir / "t10k-images-idx3-ubyte")
    save_idx_labels(labels[TRAIN_COUNT:], out_dir / "t10k-labels-idx1-ubyte")
    print(
        f"wrote {TRAIN_COUNT} train and {len(labels) - TRAIN_COUNT} test "
        f"images ({TARGET_SIDE}x{TARGET_SIDE}) to {out_dir}"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
