#!/usr/bin/env python3
# Copyright 2026 The AEP Authors
# SPDX-License-Identifier: Apache-2.0
"""Convert the PNG sprite sheets shipped by the `tfjs-cifar10` npm package into
the standard CIFAR-10 binary layout (data_batch_{1..5}.bin, test_batch.bin).

Each sprite sheet is a 1024 x 10000 RGB image: one row per sample, pixels in
row-major HWC order. Binary records are <1 x label><1024 x R><1024 x G><1024 x B>.

Usage: convert_tfjs_cifar10.py <package-dir> <out-dir>
"""
import json
import pathlib
import sys

import numpy as np
from PIL import Image


def convert(sheet: pathlib.Path, labels: np.ndarray, out: pathlib.Path) -> None:
    pixels = np.asarray(Image.open(sheet).convert("RGB"))
    n = pixels.shape[0]
    assert pixels.shape == (n, 1024, 3) and labels.shape == (n,)
    planes = pixels.reshape(n, 32, 32, 3).transpose(0, 3, 1, 2).reshape(n, 3072)
    records = np.concatenate([labels.astype(np.uint8)[:, None], planes], axis=1)
    out.write_bytes(records.tobytes())


def main() -> int:
    if len(sys.argv) != 3:
        print(__doc__, file=sys.stderr)
        return 2
    src, dst = pathlib.Path(sys.argv[1]), pathlib.Path(sys.argv[2])
    dst.mkdir(parents=True, exist_ok=True)
    train = np.array(json.loads((src / "train_lables.json").read_text()))
    test = np.array(json.loads((src / "test_lables.json").read_text()))
    for i in range(5):
        convert(src / f"data_batch_{i + 1}.png", train[i * 10000:(i + 1) * 10000],
                dst / f"data_batch_{i + 1}.bin")
    convert(src / "test_batch.png", test, dst / "test_batch.bin")
    (dst / "batches.meta.txt").write_text(
        "airplane\nautomobile\nbird\ncat\ndeer\ndog\nfrog\nhorse\nship\ntruck\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
