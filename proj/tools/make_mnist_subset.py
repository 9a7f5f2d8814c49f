#!/usr/bin/env python3
# Copyright 2026 The nlent Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

# Converts the 10,000 MNIST digits bundled in the npm `mnist` package
# (github.com/cazala/mnist, MIT) into IDX files and packs them as
# data/mnist-10k.tar.gz.
#
#   npm pack mnist && tar xzf mnist-*.tgz
#   python3 tools/make_mnist_subset.py package/src/digits data/mnist-10k.tar.gz
import io
import json
import struct
import sys
import tarfile
from pathlib import Path


def main():
    digits_dir = Path(sys.argv[1])
    out = Path(sys.argv[2])
    images = bytearray()
    labels = bytearray()
    blocks = []
    for digit in range(10):
        raw = json.loads((digits_dir / f"{digit}.json").read_text())["data"]
        assert len(raw) % 784 == 0
        blocks.append([raw[i:i + 784] for i in range(0, len(raw), 784)])
    # Round-robin over classes so any prefix is roughly class balanced.
    cursor = [0] * 10
    count = 0
    while any(cursor[d] < len(blocks[d]) for d in range(10)):
        for d in range(10):
            if cursor[d] < len(blocks[d]):
                pix = blocks[d][cursor[d]]
                cursor[d] += 1
                images.extend(max(0, min(255, round(v * 255))) for v in pix)
                labels.append(d)
                count += 1
    image_file = struct.pack(">IIII", 2051, count, 28, 28) + bytes(images)
    label_file = struct.pack(">II", 2049, count) + bytes(labels)
    with tarfile.open(out, "w:gz") as tar:
        for name, payload in (("mnist-10k-images-idx3-ubyte", image_file),
                              ("mnist-10k-labels-idx1-ubyte", label_file)):
            info = tarfile.TarInfo(name)
            info.size = len(payload)
            info.mtime = 0
            tar.addfile(info, io.BytesIO(payload))
    print(f"wrote {count} samples to {out}")


if __name__ == "__main__":
    main()
