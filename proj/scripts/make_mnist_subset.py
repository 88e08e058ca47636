#!/usr/bin/env python3
"""Build an 8000/2000 MNIST subset in gzip'd IDX format.

Source: the npm package `mnist` (github.com/cazala/mnist), which ships 10,000
MNIST digits as 784-float JSON arrays in src/digits/<d>.json.  Pass the
unpacked package directory, or let the script fetch it with `npm pack`.

Output (in --out, default data/mnist-subset):
  train-images-idx3-ubyte.gz  train-labels-idx1-ubyte.gz   (8000)
  t10k-images-idx3-ubyte.gz   t10k-labels-idx1-ubyte.gz    (2000)
"""
import argparse
import gzip
import json
import pathlib
import random
import struct
import subprocess
import tarfile
import tempfile


def fetch_package(workdir: pathlib.Path) -> pathlib.Path:
    subprocess.run(["npm", "pack", "mnist@1.1.0"], cwd=workdir, check=True,
                   stdout=subprocess.DEVNULL)
    tgz = next(workdir.glob("mnist-*.tgz"))
    with tarfile.open(tgz) as tar:
        tar.extractall(workdir)
    return workdir / "package"


def load_digits(package: pathlib.Path):
    samples = []
    for digit in range(10):
        flat = json.loads((package / "src" / "digits" / f"{digit}.json").read_text())["data"]
        assert len(flat) % 784 == 0
        for i in range(0, len(flat), 784):
            pixels = bytes(min(255, max(0, round(v * 255))) for v in flat[i:i + 784])
            samples.append((pixels, digit))
    return samples


def write_idx(path: pathlib.Path, samples):
    with gzip.GzipFile(path.with_name(path.name + "-images-idx3-ubyte.gz"), "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, len(samples), 28, 28))
        for pixels, _ in samples:
            f.write(pixels)
    with gzip.GzipFile(path.with_name(path.name + "-labels-idx1-ubyte.gz"), "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, len(samples)))
        f.write(bytes(label for _, label in samples))


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--package", type=pathlib.Path)
    parser.add_argument("--out", type=pathlib.Path, default=pathlib.Path("data/mnist-subset"))
    parser.add_argument("--train", type=int, default=8000)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        package = args.package or fetch_package(pathlib.Path(tmp))
        samples = load_digits(package)

    random.Random(args.seed).shuffle(samples)
    args.out.mkdir(parents=True, exist_ok=True)
    write_idx(args.out / "train", samples[:args.train])
    write_idx(args.out / "t10k", samples[args.train:])
    print(f"wrote {args.train} train / {len(samples) - args.train} test digits to {args.out}")


if __name__ == "__main__":
    main()
