#!/usr/bin/env python3
"""Convert the digit JSON files of the npm `mnist` package to IDX files.

Usage: mnist_from_npm.py <node_modules/mnist/src/digits> <out_dir>

Digits are interleaved round robin (0, 1, ..., 9, 0, 1, ...) so any prefix
is class-balanced. Writes digits-images-idx3-ubyte and digits-labels-idx1-ubyte.
"""
import json
import struct
import sys
from pathlib import Path

SIZE = 28 * 28


def main() -> None:
    src, out = Path(sys.argv[1]), Path(sys.argv[2])
    per_digit = []
    for d in range(10):
        raw = json.loads((src / f"{d}.json").read_text())["data"]
        per_digit.append([raw[i * SIZE:(i + 1) * SIZE] for i in range(len(raw) // SIZE)])
    n = min(len(p) for p in per_digit)
    images, labels = bytearray(), bytearray()
    for j in range(n):
        for d in range(10):
            images.extend(min(255, max(0, round(v * 255))) for v in per_digit[d][j])
            labels.append(d)
    out.mkdir(parents=True, exist_ok=True)
    count = n * 10
    (out / "digits-images-idx3-ubyte").write_bytes(struct.pack(">IIII", 0x0803, count, 28, 28) + images)
    (out / "digits-labels-idx1-ubyte").write_bytes(struct.pack(">II", 0x0801, count) + labels)
    print(f"wrote {count} images to {out}")


if __name__ == "__main__":
    main()
