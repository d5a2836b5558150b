#!/usr/bin/env python3
"""Benchmark the compiled split-scan kernel against the pure-numpy fallback.

Trains identical boosted-tree models through both kernels on synthetic
feature matrices and reports wall time plus the speedup. Models must come
out byte-identical; the benchmark aborts loudly if they ever diverge.

Usage: python benchmarks/bench_gbt_backends.py [--quick]
"""

import argparse
import json
import time

import numpy as np

from cellshapes.contour_io import FeatureMatrix
from cellshapes import gbt
from cellshapes.gbt import model as gbt_model
from cellshapes.gbt import _scan_py


def make_dataset(n, p, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    logits = np.stack([
        X[:, 0] + 0.5 * X[:, 1 % p],
        X[:, 1 % p] - X[:, 2 % p],
        0.8 * X[:, 2 % p] + 0.3 * X[:, 3 % p],
        -X[:, 0] + 0.4 * X[:, 4 % p],
        0.6 * X[:, 3 % p] - 0.6 * X[:, 1 % p],
    ], axis=1) + rng.normal(scale=0.3, size=(n, 5))
    y = np.argmax(logits, axis=1)
    return FeatureMatrix(names=[f"f{i}" for i in range(p)], values=X,
                         ids=list(range(n)), labels=[int(v) for v in y])


def run(kernel, fm, hp):
    gbt_model.scan_level = kernel
    t0 = time.perf_counter()
    model = gbt.train(fm, hp)
    elapsed = time.perf_counter() - t0
    return elapsed, json.dumps(gbt.to_dict(model))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true",
                    help="smaller workloads for a fast sanity run")
    args = ap.parse_args()

    try:
        from cellshapes.gbt import _scan_cy
    except ImportError:
        raise SystemExit("compiled kernel not built; run pip install -e . "
                         "with Cython and a C compiler available")

    if args.quick:
        workloads = [(1000, 20, 30), (2000, 50, 20)]
    else:
        workloads = [(2000, 20, 60), (5000, 50, 40), (5000, 200, 20)]

    original = gbt_model.scan_level
    print(f"{'rows':>6} {'features':>9} {'rounds':>7} "
          f"{'compiled':>10} {'numpy':>10} {'speedup':>8}")
    try:
        for n, p, rounds in workloads:
            fm = make_dataset(n, p, seed=n + p)
            hp = gbt.HyperParams(n_rounds=rounds, learning_rate=0.1,
                                 max_depth=6, subsample=0.8, colsample=0.8,
                                 seed=7)
            t_cy, doc_cy = run(_scan_cy.scan_level, fm, hp)
            t_py, doc_py = run(_scan_py.scan_level, fm, hp)
            if doc_cy != doc_py:
                raise SystemExit("BACKEND MISMATCH: models differ!")
            print(f"{n:>6} {p:>9} {rounds:>7} {t_cy:>9.2f}s {t_py:>9.2f}s "
                  f"{t_py / t_cy:>7.1f}x")
    finally:
        gbt_model.scan_level = original
    print("models byte-identical across backends for every workload")


if __name__ == "__main__":
    main()
