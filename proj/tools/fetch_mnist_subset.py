#!/usr/bin/env python3
"""Fetch the 5000-image MNIST subset bundled with mlxtend and write IDX files.

The subset holds 500 images per digit. The first 400 of each class go to the
train split and the remaining 100 to the test split, preserving file order.

    python3 tools/fetch_mnist_subset.py data/mnist-5k
"""
import argparse
import gzip
import io
import pathlib
import struct
import subprocess
import sys
import tempfile
import zipfile

import numpy as np

TRAIN_PER_CLASS = 400


def fetch_csv() -> bytes:
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "mlxtend==0.24.0",
             "--no-deps", "-q", "-d", tmp],
            check=True)
        wheel = next(pathlib.Path(tmp).glob("mlxtend-*.whl"))
        with zipfile.ZipFile(wheel) as z:
            return gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz"))


def write_idx(prefix: pathlib.Path, images: np.ndarray, labels: np.ndarray) -> None:
    n = images.shape[0]
    with open(f"{prefix}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, 28, 28))
        f.write(images.astype(np.uint8).tobytes())
    with open(f"{prefix}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, n))
        f.write(labels.astype(np.uint8).tobytes())


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("out_dir", type=pathlib.Path)
    args = parser.parse_args()

    table = np.loadtxt(io.StringIO(fetch_csv().decode()), delimiter=",")
    images, labels = table[:, :-1], table[:, -1].astype(int)
    train_idx, test_idx = [], []
    seen = np.zeros(10, dtype=int)
    for i, y in enumerate(labels):
        (train_idx if seen[y] < TRAIN_PER_CLASS else test_idx).append(i)
        seen[y] += 1

    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_idx(args.out_dir / "train", images[train_idx], labels[train_idx])
    write_idx(args.out_dir / "test", images[test_idx], labels[test_idx])
    print(f"wrote {len(train_idx)} train / {len(test_idx)} test images to {args.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
