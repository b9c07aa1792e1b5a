#!/usr/bin/env python3
"""Download the (Fashion) MNIST IDX files into a data directory.

Usage:
    python scripts/fetch_mnist.py [--dataset mnist|fmnist] [--out DIR]

The library itself never touches the network; point MCFRCL_DATA_DIR (or the
config's data_dir) at the output directory afterwards.
"""

import argparse
import gzip
import urllib.request
from pathlib import Path

MIRRORS = {
    "mnist": "https://ossci-datasets.s3.amazonaws.com/mnist/",
    "fmnist": "http://fashion-mnist.s3-website.eu-central-1.amazonaws.com/",
}

FILES = [
    "train-images-idx3-ubyte.gz",
    "train-labels-idx1-ubyte.gz",
    "t10k-images-idx3-ubyte.gz",
    "t10k-labels-idx1-ubyte.gz",
]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dataset", choices=sorted(MIRRORS), default="mnist")
    parser.add_argument("--out", type=Path, default=Path("data"))
    args = parser.parse_args()
    out = args.out / args.dataset
    out.mkdir(parents=True, exist_ok=True)
    for name in FILES:
        target = out / name[:-3]
        if target.exists():
            print(f"have {target}")
            continue
        url = MIRRORS[args.dataset] + name
        print(f"fetching {url}")
        with urllib.request.urlopen(url) as resp:
            target.write_bytes(gzip.decompress(resp.read()))
        print(f"wrote {target}")


if __name__ == "__main__":
    main()
