#!/usr/bin/env python3
"""Build MNIST-format IDX files from the digits bundled in the `mnist` npm package.

The npm package ships about 10,000 MNIST digits as JSON arrays of pixel
intensities in [0, 1]. This script splits each class 80/20 into train and
test sets and writes the four standard gzipped IDX files that the loader
expects:

    <out>/train-images-idx3-ubyte.gz  <out>/train-labels-idx1-ubyte.gz
    <out>/t10k-images-idx3-ubyte.gz   <out>/t10k-labels-idx1-ubyte.gz

Usage:
    npm pack mnist && tar xzf mnist-*.tgz
    python3 scripts/mnist_from_npm.py package data/mnist

If you have the original MNIST distribution, copy its four files into the
output directory instead.
"""

import gzip
import json
import struct
import sys
from pathlib import Path

SIDE = 28
TRAIN_FRACTION = 0.8


def write_images(path: Path, images: list[bytes]) -> None:
    with gzip.open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), SIDE, SIDE))
        for img in images:
            f.write(img)


def write_labels(path: Path, labels: list[int]) -> None:
    with gzip.open(path, "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(bytes(labels))


def main() -> int:
    if len(sys.argv) != 3:
        print(__doc__, file=sys.stderr)
        return 2
    package, out = Path(sys.argv[1]), Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    splits = {"train": ([], []), "t10k": ([], [])}
    for digit in range(10):
        flat = json.loads((package / "src" / "digits" / f"{digit}.json").read_text())["data"]
        n = len(flat) // (SIDE * SIDE)
        cut = int(n * TRAIN_FRACTION)
        for i in range(n):
            pixels = flat[i * SIDE * SIDE:(i + 1) * SIDE * SIDE]
            raw = bytes(min(255, max(0, round(p * 255))) for p in pixels)
            images, labels = splits["train" if i < cut else "t10k"]
            images.append(raw)
            labels.append(digit)
    for name, (images, labels) in splits.items():
        write_images(out / f"{name}-images-idx3-ubyte.gz", images)
        write_labels(out / f"{name}-labels-idx1-ubyte.gz", labels)
        print(f"{name}: {len(labels)} images")
    return 0


if __name__ == "__main__":
    sys.exit(main())
