#!/usr/bin/env python3
"""Build data/mnist5k.tar.gz from the 5,000-image MNIST sample bundled with mlxtend.

The sample holds 500 training digits per class, sorted by label. It is written
as a pair of big-endian IDX files (magics 2051 and 2049) so the C++ reader can
ingest it directly.

    pip download mlxtend --no-deps -d /tmp/mlx
    python3 tools/make_mnist_subset.py /tmp/mlx/mlxtend-*.whl data/mnist5k.tar.gz
"""
import gzip
import io
import struct
import sys
import tarfile
import zipfile

import numpy as np


def main(wheel_path: str, out_path: str) -> None:
    with zipfile.ZipFile(wheel_path) as wheel:
        raw = gzip.decompress(wheel.read("mlxtend/data/data/mnist_5k.csv.gz"))
    table = np.loadtxt(io.BytesIO(raw), delimiter=",").astype(np.int64)
    images = table[:, :-1].astype(np.uint8)
    labels = table[:, -1].astype(np.uint8)
    n = images.shape[0]

    image_bytes = struct.pack(">IIII", 2051, n, 28, 28) + images.tobytes()
    label_bytes = struct.pack(">II", 2049, n) + labels.tobytes()

    with tarfile.open(out_path, "w:gz") as tar:
        for name, payload in (("mnist5k-images-idx3-ubyte", image_bytes),
                              ("mnist5k-labels-idx1-ubyte", label_bytes)):
            info = tarfile.TarInfo(name)
            info.size = len(payload)
            info.mtime = 0
            tar.addfile(info, io.BytesIO(payload))


if __name__ == "__main__":
    if len(sys.argv) != 3:
        sys.exit(f"usage: {sys.argv[0]} <mlxtend wheel> <output .tar.gz>")
    main(sys.argv[1], sys.argv[2])
