"""Command-line interface.

Subcommands: trace, generate, preprocess, extract, train, eval, classify,
importance. Exit codes: 0 success, 2 input error, 3 degenerate-data error.
Artifact files carry no timestamps, so identical seeds give identical bytes.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import contour_io, descriptors, evalharness, synthgen
from .errors import DegenerateDataError, InputError
from .preprocess import procrustes_align, normalize, RegisteredContour

logger = logging.getLogger("cellshapes")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--jobs", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="cellshapes",
        description="Cell-shape classification from noisy contours")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("trace", help="trace instance boundaries in a label map")
    p.add_argument("--in", dest="inp", required=True, help="PGM or CSV grid")
    p.add_argument("--out", required=True, help="output contour JSONL")

    p = sub.add_parser("generate", help="generate the synthetic dataset")
    p.add_argument("--n-per-class", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--noise-amplitude", type=float, default=0.06)
    p.add_argument("--noise-harmonics", type=int, default=8)
    p.add_argument("--jitter", type=float, default=0.01)
    p.add_argument("--min-points", type=int, default=150)
    p.add_argument("--max-points", type=int, default=250)
    _add_common(p)

    p = sub.add_parser("preprocess", help="normalize and register contours")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True, help="registered contour JSONL")
    p.add_argument("--mean", required=True, help="mean-shape JSON")
    p.add_argument("--threshold", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=100)

    p = sub.add_parser("extract", help="extract one descriptor family")
    p.add_argument("--family", required=True, choices=descriptors.FAMILIES)
    p.add_argument("--in", dest="inp", required=True,
                   help="registered contour JSONL (preprocess output)")
    p.add_argument("--out", required=True, help="feature CSV")

    p = sub.add_parser("train", help="train a classification bundle")
    p.add_argument("--family", required=True, choices=evalharness.ALL_FAMILIES)
    p.add_argument("--in", dest="inp", required=True, help="labeled JSONL")
    p.add_argument("--out", required=True, help="model bundle JSON")
    p.add_argument("--trials", type=int, default=20)
    _add_common(p)

    p = sub.add_parser("eval", help="cross-validated family comparison")
    p.add_argument("--families", required=True,
                   help="comma-separated family names")
    p.add_argument("--in", dest="inp", required=True, help="labeled JSONL")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--trials", type=int, default=20)
    _add_common(p)

    p = sub.add_parser("classify", help="classify contours with a bundle")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True, help="predictions JSONL")

    p = sub.add_parser("importance", help="print gain importances of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--top", type=int, default=0, help="0 = all features")
    p.add_argument("--out", default=None, help="CSV path (default: stdout)")
    return ap


def _cmd_trace(args) -> int:
    lm = contour_io.read_label_map(args.inp)
    contours = contour_io.trace_contours(lm)
    contour_io.write_contours(contours, args.out)
    logger.info("traced %d contours -> %s", len(contours), args.out)
    return 0


def _cmd_generate(args) -> int:
    cfg = synthgen.GenConfig(
        n_per_class=args.n_per_class, seed=args.seed,
        noise_amplitude=args.noise_amplitude,
        noise_harmonics=args.noise_harmonics, jitter=args.jitter,
        min_points=args.min_points, max_points=args.max_points)
    contours = synthgen.generate(cfg)
    contour_io.write_contours(contours, args.out)
    echo_path = Path(args.out).with_suffix(".config.json")
    with open(echo_path, "w", encoding="ascii") as fh:
        json.dump(cfg.to_dict(), fh, indent=1)
    logger.info("wrote %d contours -> %s (config echo: %s)",
                len(contours), args.out, echo_path)
    return 0


def _cmd_preprocess(args) -> int:
    contours = contour_io.read_contours(args.inp)
    registered = evalharness.register_all(contours)
    if not registered:
        raise DegenerateDataError("no contour survived normalization")
    aligned, mean = procrustes_align(registered, threshold=args.threshold,
                                     max_iter=args.max_iter)
    contour_io.write_contours(
        [contour_io.Contour(id=rc.id, points=rc.points,
                            class_label=rc.class_label) for rc in aligned],
        args.out)
    with open(args.mean, "w", encoding="ascii") as fh:
        json.dump({"points": mean.points.tolist(),
                   "iterations_used": mean.iterations_used,
                   "final_delta": mean.final_delta}, fh)
    logger.info("registered %d contours in %d iterations (delta %.3g)",
                len(aligned), mean.iterations_used, mean.final_delta)
    return 0


def _cmd_extract(args) -> int:
    contours = contour_io.read_contours(args.inp)
    batch = [RegisteredContour(id=c.id, points=c.points,
                               class_label=c.class_label) for c in contours]
    result = descriptors.extract(batch, args.family)
    contour_io.write_features(result.matrix, args.out)
    for cid, msg in result.failures:
        logger.warning("contour %s skipped: %s", cid, msg)
    logger.info("extracted %s for %d contours (%d failed) -> %s",
                args.family, result.matrix.n_rows, len(result.failures),
                args.out)
    return 0


def _cmd_train(args) -> int:
    contours = contour_io.read_contours(args.inp)
    cfg = evalharness.EvalConfig(seed=args.seed, n_trials=args.trials,
                                 jobs=args.jobs)
    bundle, info = evalharness.train_bundle(contours, args.family, cfg)
    bundle.save(args.out)
    logger.info("trained %s bundle (best validation accuracy %.4f) -> %s",
                args.family, info["best_val_accuracy"], args.out)
    return 0


def _cmd_eval(args) -> int:
    families = [f.strip() for f in args.families.split(",") if f.strip()]
    if not families:
        raise InputError("no families given")
    contours = contour_io.read_contours(args.inp)
    cfg = evalharness.EvalConfig(seed=args.seed, n_trials=args.trials,
                                 jobs=args.jobs)
    reports, bundles = evalharness.compare_families(contours, families, cfg)
    evalharness.write_outputs(args.out_dir, reports, bundles)
    for row in evalharness.ranked_rows(reports):
        print(f"{row['family']}: mean accuracy {row['mean_acc']:.4f} "
              f"(std {row['std_acc']:.4f}, {row['n_features']} features)")
    logger.info("reports written to %s", args.out_dir)
    return 0


def _cmd_classify(args) -> int:
    stats = evalharness.classify_file(args.model, args.inp, args.out)
    logger.info("classified %d contours (%d failed) -> %s",
                stats["classified"], stats["failed"], args.out)
    return 0


def _cmd_importance(args) -> int:
    bundle = evalharness.TrainedBundle.load(args.model)
    from .gbt import feature_importance
    fv = feature_importance(bundle.gbt_model)
    order = np.argsort(-fv.values)
    if args.top > 0:
        order = order[:args.top]
    lines = ["rank,feature,gain_share"]
    lines += [f"{r},{fv.names[i]},{contour_io._fmt(fv.values[i])}"
              for r, i in enumerate(order, 1)]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


_COMMANDS = {
    "trace": _cmd_trace,
    "generate": _cmd_generate,
    "preprocess": _cmd_preprocess,
    "extract": _cmd_extract,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "classify": _cmd_classify,
    "importance": _cmd_importance,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    except DegenerateDataError as exc:
        print(f"degenerate data: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
