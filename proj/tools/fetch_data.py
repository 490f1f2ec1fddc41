#!/usr/bin/env python3
"""Populate the dataset cache with MNIST and CIFAR-10 in their standard
distribution formats.

Layout (override the root with ADVLAB_DATA_DIR):
  <root>/mnist/train/{train-images-idx3-ubyte,train-labels-idx1-ubyte}
  <root>/mnist/test/{t10k-images-idx3-ubyte,t10k-labels-idx1-ubyte}
  <root>/cifar10/train/data_batch_{1..5}.bin
  <root>/cifar10/test/test_batch.bin

Set ADVLAB_MNIST_URL / ADVLAB_CIFAR10_URL to point at a mirror if the default
hosts are unreachable.
"""

import gzip
import hashlib
import os
import shutil
import sys
import tarfile
import tempfile
import urllib.request
from pathlib import Path

MNIST_BASE = os.environ.get(
    "ADVLAB_MNIST_URL", "https://ossci-datasets.s3.amazonaws.com/mnist"
)
CIFAR_URL = os.environ.get(
    "ADVLAB_CIFAR10_URL",
    "https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz",
)

MNIST_FILES = {
    "train": ["train-images-idx3-ubyte", "train-labels-idx1-ubyte"],
    "test": ["t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"],
}


def data_root() -> Path:
    env = os.environ.get("ADVLAB_DATA_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "advlab"


def fetch(url: str, dest: Path) -> None:
    print(f"  {url}")
    with urllib.request.urlopen(url) as r, open(dest, "wb") as f:
        shutil.copyfileobj(r, f)


def install_mnist(root: Path) -> None:
    for split, names in MNIST_FILES.items():
        out_dir = root / "mnist" / split
        out_dir.mkdir(parents=True, exist_ok=True)
        for name in names:
            out = out_dir / name
            if out.exists():
                print(f"  have {out}")
                continue
            with tempfile.NamedTemporaryFile(suffix=".gz", delete=False) as tmp:
                fetch(f"{MNIST_BASE}/{name}.gz", Path(tmp.name))
                with gzip.open(tmp.name, "rb") as src, open(out, "wb") as dst:
                    shutil.copyfileobj(src, dst)
                os.unlink(tmp.name)
            print(f"  wrote {out}")


def install_cifar10(root: Path) -> None:
    train_dir = root / "cifar10" / "train"
    test_dir = root / "cifar10" / "test"
    wanted = [f"data_batch_{i}.bin" for i in range(1, 6)] + ["test_batch.bin"]
    if all(
        ((train_dir if n.startswith("data") else test_dir) / n).exists()
        for n in wanted
    ):
        print("  have cifar10")
        return
    train_dir.mkdir(parents=True, exist_ok=True)
    test_dir.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile(suffix=".tar.gz", delete=False) as tmp:
        fetch(CIFAR_URL, Path(tmp.name))
        with tarfile.open(tmp.name, "r:gz") as tar:
            for member in tar.getmembers():
                base = os.path.basename(member.name)
                if base not in wanted:
                    continue
                src = tar.extractfile(member)
                out = (train_dir if base.startswith("data") else test_dir) / base
                with open(out, "wb") as dst:
                    shutil.copyfileobj(src, dst)
                print(f"  wrote {out}")
        os.unlink(tmp.name)


def checksum(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()[:16]


def main() -> int:
    root = data_root()
    print(f"cache root: {root}")
    datasets = sys.argv[1:] or ["mnist", "cifar10"]
    if "mnist" in datasets:
        install_mnist(root)
    if "cifar10" in datasets:
        install_cifar10(root)
    for sub in datasets:
        for f in sorted((root / sub).rglob("*")):
            if f.is_file():
                print(f"  {f.relative_to(root)}  sha256:{checksum(f)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
