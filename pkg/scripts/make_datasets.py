#!/usr/bin/env python3
"""Materialize the benchmark CSVs under data/.

No dataset downloading happens here: `vehicle.csv` is a seeded synthetic
stand-in with the classic vehicle-silhouette shape (946 rows, 18 numeric
features, 4 classes), and `optdigits.csv` is the 8x8 digits snapshot bundled
with scikit-learn (64 features, 10 classes).
"""

import csv
import pathlib
import sys

import numpy as np

OUT_DIR = pathlib.Path(__file__).resolve().parent.parent / "data"


def write_csv(path, contexts, labels):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{i}" for i in range(contexts.shape[1])] + ["label"])
        for row, lab in zip(contexts, labels):
            writer.writerow([f"{v:.6g}" for v in row] + [int(lab)])
    print(f"wrote {path} ({contexts.shape[0]} rows, {contexts.shape[1]} "
          f"features, {len(set(labels.tolist()))} classes)")


def make_vehicle(seed=20260823):
    n, d, k = 946, 18, 4
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, 1.6, size=(k, d))
    labels = rng.integers(0, k, size=n)
    # correlated features with class-dependent scale, roughly UCI-ish texture
    mix = rng.normal(0.0, 0.3, size=(d, d)) + np.eye(d)
    noise = rng.standard_normal((n, d)) @ mix
    contexts = centers[labels] + noise
    write_csv(OUT_DIR / "vehicle.csv", contexts, labels)


def make_optdigits():
    try:
        from sklearn.datasets import load_digits
    except ImportError:
        print("scikit-learn not installed; skipping optdigits.csv",
              file=sys.stderr)
        return
    digits = load_digits()
    write_csv(OUT_DIR / "optdigits.csv", digits.data.astype(float),
              digits.target)


def main():
    OUT_DIR.mkdir(exist_ok=True)
    make_vehicle()
    make_optdigits()


if __name__ == "__main__":
    main()
