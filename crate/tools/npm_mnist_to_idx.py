#!/usr/bin/env python3
"""Convert the digits bundled in the npm `mnist` package into IDX files.

The package stores 28x28 digits as pixel/255 rounded to three decimals, one
JSON file per class. This rebuilds the byte values and writes gzip'd IDX
files that `sqdr fetch-data` / `load_idx` understand.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/npm_mnist_to_idx.py package/src/digits data/mnist
"""
import gzip
import json
import os
import struct
import sys


def main(src, dst):
    images, labels = bytearray(), bytearray()
    count = 0
    for digit in range(10):
        with open(os.path.join(src, f"{digit}.json")) as fh:
            raw = json.load(fh)["data"]
        n = len(raw) // 784
        for i in range(n):
            px = raw[i * 784:(i + 1) * 784]
            images.extend(min(255, max(0, round(v * 255))) for v in px)
            labels.append(digit)
        count += n
    os.makedirs(dst, exist_ok=True)
    with gzip.open(os.path.join(dst, "train-images-idx3-ubyte.gz"), "wb") as fh:
        fh.write(struct.pack(">IIII", 0x803, count, 28, 28))
        fh.write(bytes(images))
    with gzip.open(os.path.join(dst, "train-labels-idx1-ubyte.gz"), "wb") as fh:
        fh.write(struct.pack(">II", 0x801, count))
        fh.write(bytes(labels))
    print(f"wrote {count} samples to {dst}")


if __name__ == "__main__":
    if len(sys.argv) != 3:
        sys.exit("usage: npm_mnist_to_idx.py <digits-dir> <out-dir>")
    main(sys.argv[1], sys.argv[2])
