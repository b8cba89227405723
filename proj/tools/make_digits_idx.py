#!/usr/bin/env python3
"""Convert the digit samples shipped with the npm `mnist` package into IDX files.

The npm package stores 10,000 28x28 digits as pixel/255 floats grouped by
class. This script restores 8-bit pixels, shuffles with a fixed seed and writes
gzipped IDX train/test splits that `load_digits` reads directly.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/make_digits_idx.py package/src/digits data/digits
"""
import argparse
import gzip
import json
import pathlib
import random
import struct


def write_idx(path, magic, dims, payload):
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">I", magic))
        for d in dims:
            f.write(struct.pack(">I", d))
        f.write(bytes(payload))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("src")
    ap.add_argument("dst")
    ap.add_argument("--n-test", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=20200101)
    args = ap.parse_args()

    samples = []
    for label in range(10):
        data = json.load(open(pathlib.Path(args.src) / f"{label}.json"))["data"]
        for k in range(len(data) // 784):
            px = [max(0, min(255, round(v * 255))) for v in data[k * 784:(k + 1) * 784]]
            samples.append((px, label))
    random.Random(args.seed).shuffle(samples)

    test, train = samples[:args.n_test], samples[args.n_test:]
    out = pathlib.Path(args.dst)
    out.mkdir(parents=True, exist_ok=True)
    for name, split in (("train", train), ("t10k", test)):
        write_idx(out / f"{name}-images-idx3-ubyte.gz", 0x803, (len(split), 28, 28),
                  [p for s in split for p in s[0]])
        write_idx(out / f"{name}-labels-idx1-ubyte.gz", 0x801, (len(split),),
                  [s[1] for s in split])
        print(f"{name}: {len(split)} samples")


if __name__ == "__main__":
    main()
