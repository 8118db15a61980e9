#!/usr/bin/env python3
"""Build the 10,000-digit desk MNIST subset as IDX files.

Source: the `mnist` npm package (src/digits/<d>.json), which stores 784
floats per digit rounded to three decimals. Pixels are mapped back to bytes
with round(v * 255). Samples are interleaved round-robin over digits so the
file order is not class-sorted.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/mnist_desk_from_npm.py package/src/digits data/
"""
import gzip
import json
import os
import struct
import sys
import tarfile


def main(src, out_dir):
    per_digit = []
    for d in range(10):
        with open(os.path.join(src, f"{d}.json")) as f:
            flat = json.load(f)["data"]
        assert len(flat) % 784 == 0
        per_digit.append([flat[i:i + 784] for i in range(0, len(flat), 784)])

    images, labels = [], []
    cursor = [0] * 10
    while any(cursor[d] < len(per_digit[d]) for d in range(10)):
        for d in range(10):
            if cursor[d] < len(per_digit[d]):
                images.append(per_digit[d][cursor[d]])
                labels.append(d)
                cursor[d] += 1

    n = len(labels)
    img = bytearray(struct.pack(">IIII", 0x00000803, n, 28, 28))
    for px in images:
        img.extend(min(255, max(0, int(round(v * 255)))) for v in px)
    lab = bytearray(struct.pack(">II", 0x00000801, n))
    lab.extend(labels)

    os.makedirs(out_dir, exist_ok=True)
    tmp = os.path.join(out_dir, "mnist-desk")
    os.makedirs(tmp, exist_ok=True)
    with open(os.path.join(tmp, "images-idx3-ubyte"), "wb") as f:
        f.write(img)
    with open(os.path.join(tmp, "labels-idx1-ubyte"), "wb") as f:
        f.write(lab)
    with tarfile.open(os.path.join(out_dir, "mnist-desk.tar.gz"), "w:gz") as tar:
        tar.add(tmp, arcname="mnist-desk")
    print(f"wrote {n} samples")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
