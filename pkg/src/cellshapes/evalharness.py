"""Experimental protocol: stratified 5-fold cross-validation with 60/20/20
train/validation/test splits, random hyperparameter search, per-family
evaluation, and trained-model bundles for inference.

Test-set isolation is structural: the Procrustes mean, the PCA basis, and
every model parameter are fitted on the training split alone; the
validation split only ranks hyperparameter trials; each report records the
split digest so runs can be audited for identical fold assignment.

All randomness derives from named PCG64 streams keyed by
(seed, family, fold, trial), so results are byte-reproducible and
independent of execution order or parallelism.
"""

from __future__ import annotations

import hashlib
import json
import logging
import zlib
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import pca as pca_mod
from .contour_io import Contour, FeatureMatrix, _fmt, iter_contours
from .descriptors import FAMILIES, _family_vector, family_names
from .errors import (
    CellshapesError,
    DegenerateDataError,
    InputError,
    ModelFamilyMismatch,
    SchemaError,
    TooFewSamples,
)
from .gbt import model as gbt
from .preprocess import (
    RegisteredContour,
    normalize,
    procrustes_align,
    rotate_to_reference,
)

logger = logging.getLogger("cellshapes")

N_CLASSES = 5
FOLD_COUNT = 5
PCA_FAMILIES = {"pca95": 0.95, "pca99": 0.99}
ALL_FAMILIES = list(FAMILIES) + list(PCA_FAMILIES)
BUNDLE_VERSION = "cellshapes-bundle-1"

DEFAULT_SEARCH_SPACE: dict[str, list] = {
    "n_rounds": [100, 200, 300],
    "learning_rate": [0.05, 0.1, 0.3],
    "max_depth": [3, 4, 5, 6, 7, 8],
    "min_child_weight": [1.0, 5.0],
    "reg_lambda": [0.5, 1.0, 2.0],
    "gamma": [0.0, 0.1],
    "subsample": [0.8, 1.0],
    "colsample": [0.8, 1.0],
}


@dataclass
class EvalConfig:
    seed: int = 42
    n_trials: int = 20
    procrustes_threshold: float = 1e-6
    procrustes_max_iter: int = 100
    retrain_with_validation: bool = False
    top_k: int = 5
    jobs: int = 1
    space: dict = field(default_factory=lambda: dict(DEFAULT_SEARCH_SPACE))


@dataclass
class SplitPlan:
    seed: int
    folds: list[tuple[np.ndarray, np.ndarray, np.ndarray]]  # train, val, test

    @property
    def fold_count(self) -> int:
        return len(self.folds)

    def digest(self) -> str:
        h = hashlib.sha256()
        for train, val, test in self.folds:
            for part in (train, val, test):
                h.update(np.asarray(part, dtype=np.int64).tobytes())
                h.update(b"|")
        return h.hexdigest()


@dataclass
class EvalReport:
    family: str
    fold_accuracies: list[float]
    mean_accuracy: float
    std_accuracy: float
    confusion: np.ndarray                    # (5, 5) int, summed over folds
    best_params: list[dict]
    top_features: list[tuple[str, float]]
    n_features: int
    trials: list[list[dict]]                 # per fold
    split_digest: str

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "fold_accuracies": self.fold_accuracies,
            "mean_accuracy": self.mean_accuracy,
            "std_accuracy": self.std_accuracy,
            "confusion": self.confusion.tolist(),
            "best_params": self.best_params,
            "top_features": [[n, v] for n, v in self.top_features],
            "n_features": self.n_features,
            "trials": self.trials,
            "split_digest": self.split_digest,
        }


def _stream(*entropy) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _family_tag(family: str) -> int:
    return zlib.crc32(family.encode("ascii"))


# --------------------------------------------------------------------------
# splits
# --------------------------------------------------------------------------

def make_splits(labels: Sequence[int], seed: int) -> SplitPlan:
    """Stratified 5-fold plan with 60/20/20 train/validation/test per fold.

    One global shuffled 5-chunking per class: fold f tests on chunk f and
    validates on chunk f+1 (mod 5), so test sets (and validation sets)
    partition the dataset exactly.
    """
    y = np.asarray(labels)
    if len(y) < 25:
        raise TooFewSamples(f"need >= 25 samples, got {len(y)}")
    classes = np.unique(y)
    chunks_per_class = {}
    for c in classes:
        idx = np.nonzero(y == c)[0]
        if len(idx) < FOLD_COUNT:
            raise TooFewSamples(
                f"class {c} has {len(idx)} samples; needs >= {FOLD_COUNT}")
        perm = _stream(seed, 1, int(c)).permutation(idx)
        chunks_per_class[int(c)] = np.array_split(perm, FOLD_COUNT)
    folds = []
    for f in range(FOLD_COUNT):
        test, val, train = [], [], []
        for c in classes:
            chunks = chunks_per_class[int(c)]
            test.append(chunks[f])
            val.append(chunks[(f + 1) % FOLD_COUNT])
            train += [chunks[j] for j in range(FOLD_COUNT)
                      if j not in (f, (f + 1) % FOLD_COUNT)]
        folds.append((np.sort(np.concatenate(train)),
                      np.sort(np.concatenate(val)),
                      np.sort(np.concatenate(test))))
    return SplitPlan(seed=seed, folds=folds)


# --------------------------------------------------------------------------
# hyperparameter search
# --------------------------------------------------------------------------

def _sample_params(space: dict, rng: np.random.Generator, seed: int) -> gbt.HyperParams:
    doc = {}
    for key in sorted(space):
        options = space[key]
        doc[key] = options[int(rng.integers(len(options)))]
    doc["seed"] = seed
    return gbt.HyperParams(**doc)


def _accuracy(model: gbt.GbtModel, fm: FeatureMatrix) -> float:
    pred = gbt.predict(model, fm.values)
    return float(np.mean(pred == fm.label_array()))


def random_search(
    train_fm: FeatureMatrix,
    val_fm: FeatureMatrix,
    space: Optional[dict] = None,
    n_trials: int = 20,
    seed: int = 0,
    entropy: tuple = (),
) -> tuple[gbt.HyperParams, list[dict]]:
    """Sample n_trials configurations, train on train, rank by validation
    accuracy; ties go to the earlier trial. Failed trials are logged, not
    fatal (unless every trial fails)."""
    if n_trials < 1:
        raise InputError("n_trials must be >= 1")
    space = space or DEFAULT_SEARCH_SPACE
    trials: list[dict] = []
    best: Optional[gbt.HyperParams] = None
    best_acc = -1.0
    for t in range(n_trials):
        rng = _stream(seed, 2, *entropy, t)
        hp_seed = int(rng.integers(np.iinfo(np.int64).max))
        hp = _sample_params(space, rng, hp_seed)
        try:
            model = gbt.train(train_fm, hp)
            acc = _accuracy(model, val_fm)
        except CellshapesError as exc:
            logger.warning("trial %d failed: %s", t, exc)
            trials.append({"trial": t, "params": hp.to_dict(),
                           "val_accuracy": None, "status": f"failed: {exc}"})
            continue
        trials.append({"trial": t, "params": hp.to_dict(),
                       "val_accuracy": acc, "status": "ok"})
        if acc > best_acc:
            best_acc = acc
            best = hp
    if best is None:
        raise InputError("all hyperparameter trials failed")
    return best, trials


# --------------------------------------------------------------------------
# family evaluation
# --------------------------------------------------------------------------

def register_all(contours: Sequence[Contour]) -> list[RegisteredContour]:
    """Normalize every contour; degenerate ones are dropped with a log line."""
    out = []
    for c in contours:
        try:
            out.append(normalize(c))
        except DegenerateDataError as exc:
            logger.warning("contour %s dropped: %s", c.id, exc)
    return out


def _descriptor_matrix(batch: Sequence[RegisteredContour], family: str) -> FeatureMatrix:
    names = family_names(family)
    rows, ids, labels = [], [], []
    for rc in batch:
        rows.append(_family_vector(rc, family).values)
        ids.append(rc.id)
        labels.append(rc.class_label)
    values = np.asarray(rows).reshape(len(ids), len(names))
    return FeatureMatrix(names=names, values=values, ids=ids, labels=labels)


def _pca_matrix(model: pca_mod.PcaModel, batch: Sequence[RegisteredContour]) -> FeatureMatrix:
    values = pca_mod.project_batch(model, batch)
    return FeatureMatrix(names=model.feature_names(), values=values,
                         ids=[rc.id for rc in batch],
                         labels=[rc.class_label for rc in batch])


def _fold_features(family, aligned_train, aligned_val, aligned_test):
    if family in PCA_FAMILIES:
        basis = pca_mod.fit(aligned_train, PCA_FAMILIES[family])
        return (basis, _pca_matrix(basis, aligned_train),
                _pca_matrix(basis, aligned_val), _pca_matrix(basis, aligned_test))
    if family not in FAMILIES:
        raise InputError(f"unknown family {family!r}; choose from {ALL_FAMILIES}")
    return (None, _descriptor_matrix(aligned_train, family),
            _descriptor_matrix(aligned_val, family),
            _descriptor_matrix(aligned_test, family))


def _confusion(y_true: np.ndarray, y_pred: np.ndarray) -> np.ndarray:
    cm = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


@dataclass
class TrainedBundle:
    """Everything inference needs: family, training mean shape, optional PCA
    basis, and the boosted-tree model."""

    family: str
    mean_shape: np.ndarray
    gbt_model: gbt.GbtModel
    pca_model: Optional[pca_mod.PcaModel] = None

    def to_dict(self) -> dict:
        return {
            "version": BUNDLE_VERSION,
            "family": self.family,
            "mean_shape": self.mean_shape.tolist(),
            "pca": None if self.pca_model is None else pca_mod.to_dict(self.pca_model),
            "gbt": gbt.to_dict(self.gbt_model),
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainedBundle":
        if not isinstance(doc, dict) or doc.get("version") != BUNDLE_VERSION:
            raise SchemaError(
                f"bundle version {doc.get('version')!r} != {BUNDLE_VERSION!r}")
        family = doc.get("family")
        if family not in ALL_FAMILIES:
            raise ModelFamilyMismatch(f"unknown family {family!r} in bundle")
        pca_model = None if doc.get("pca") is None else pca_mod.from_dict(doc["pca"])
        if family in PCA_FAMILIES and pca_model is None:
            raise ModelFamilyMismatch(f"family {family!r} requires a PCA basis")
        return cls(family=family,
                   mean_shape=np.asarray(doc["mean_shape"], dtype=np.float64),
                   gbt_model=gbt.from_dict(doc["gbt"]),
                   pca_model=pca_model)

    @classmethod
    def load(cls, path) -> "TrainedBundle":
        with open(path, "r", encoding="ascii") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    def features_for(self, rc: RegisteredContour) -> np.ndarray:
        fitted = rotate_to_reference(rc, self.mean_shape)
        if self.family in PCA_FAMILIES:
            return pca_mod.project(self.pca_model, fitted)
        return _family_vector(fitted, self.family).values


def evaluate_family(
    dataset: Sequence[Contour],
    family: str,
    cfg: Optional[EvalConfig] = None,
    plan: Optional[SplitPlan] = None,
    registered: Optional[Sequence[RegisteredContour]] = None,
) -> tuple[EvalReport, TrainedBundle]:
    """Full 5-fold protocol for one feature family.

    Returns the aggregated report and the fold-0 trained bundle (mean shape,
    PCA basis when applicable, final model) for downstream classification.
    """
    cfg = cfg or EvalConfig()
    if registered is None:
        registered = register_all(dataset)
    labels = [rc.class_label for rc in registered]
    if any(l is None for l in labels):
        raise InputError("evaluation dataset must be fully labeled")
    if plan is None:
        plan = make_splits(labels, cfg.seed)

    tag = _family_tag(family)
    fold_accs: list[float] = []
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    best_params: list[dict] = []
    all_trials: list[list[dict]] = []
    # PCA component counts can differ per fold, so aggregate gains by name
    importance_by_name: dict[str, float] = {}
    n_features = 0
    bundle: Optional[TrainedBundle] = None

    for fold, (train_idx, val_idx, test_idx) in enumerate(plan.folds):
        train_rcs = [registered[i] for i in train_idx]
        val_rcs = [registered[i] for i in val_idx]
        test_rcs = [registered[i] for i in test_idx]

        aligned_train, mean = procrustes_align(
            train_rcs, threshold=cfg.procrustes_threshold,
            max_iter=cfg.procrustes_max_iter)
        aligned_val = [rotate_to_reference(rc, mean.points) for rc in val_rcs]
        aligned_test = [rotate_to_reference(rc, mean.points) for rc in test_rcs]

        basis, train_fm, val_fm, test_fm = _fold_features(
            family, aligned_train, aligned_val, aligned_test)

        hp, trials = random_search(train_fm, val_fm, space=cfg.space,
                                   n_trials=cfg.n_trials, seed=cfg.seed,
                                   entropy=(tag, fold))
        if cfg.retrain_with_validation:
            fit_fm = FeatureMatrix(
                names=train_fm.names,
                values=np.vstack([train_fm.values, val_fm.values]),
                ids=train_fm.ids + val_fm.ids,
                labels=train_fm.labels + val_fm.labels)
        else:
            fit_fm = train_fm
        model = gbt.train(fit_fm, hp)

        y_true = test_fm.label_array()
        y_pred = gbt.predict(model, test_fm.values)
        cm = _confusion(y_true, y_pred)
        confusion += cm
        fold_accs.append(float(np.trace(cm) / cm.sum()))
        best_params.append(hp.to_dict())
        all_trials.append(trials)
        imp = gbt.feature_importance(model)
        for name, share in zip(imp.names, imp.values):
            importance_by_name[name] = importance_by_name.get(name, 0.0) + share
        if fold == 0:
            n_features = len(train_fm.names)
            bundle = TrainedBundle(family=family, mean_shape=mean.points,
                                   gbt_model=model, pca_model=basis)

    n_folds = len(plan.folds)
    top = sorted(((name, total / n_folds)
                  for name, total in importance_by_name.items()),
                 key=lambda kv: (-kv[1], kv[0]))[:cfg.top_k]
    report = EvalReport(
        family=family,
        fold_accuracies=fold_accs,
        mean_accuracy=float(np.mean(fold_accs)),
        std_accuracy=float(np.std(fold_accs)),
        confusion=confusion,
        best_params=best_params,
        top_features=[(n, float(v)) for n, v in top],
        n_features=n_features,
        trials=all_trials,
        split_digest=plan.digest(),
    )
    return report, bundle


def compare_families(
    dataset: Sequence[Contour],
    families: Sequence[str],
    cfg: Optional[EvalConfig] = None,
) -> tuple[dict[str, EvalReport], dict[str, TrainedBundle]]:
    """Evaluate several families on one shared SplitPlan so accuracies are
    comparable fold for fold."""
    cfg = cfg or EvalConfig()
    for family in families:
        if family not in ALL_FAMILIES:
            raise InputError(
                f"unknown family {family!r}; choose from {ALL_FAMILIES}")
    registered = register_all(dataset)
    labels = [rc.class_label for rc in registered]
    if any(l is None for l in labels):
        raise InputError("evaluation dataset must be fully labeled")
    plan = make_splits(labels, cfg.seed)

    def run(family: str):
        return evaluate_family(dataset, family, cfg=cfg, plan=plan,
                               registered=registered)

    reports: dict[str, EvalReport] = {}
    bundles: dict[str, TrainedBundle] = {}
    if cfg.jobs > 1 and len(families) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            futures = {family: pool.submit(run, family) for family in families}
            for family in families:
                reports[family], bundles[family] = futures[family].result()
    else:
        for family in families:
            reports[family], bundles[family] = run(family)
    digests = {r.split_digest for r in reports.values()}
    assert len(digests) == 1, "families must share one split plan"
    return reports, bundles


def train_bundle(
    dataset: Sequence[Contour],
    family: str,
    cfg: Optional[EvalConfig] = None,
) -> tuple[TrainedBundle, dict]:
    """Train one deployable bundle: hyperparameters searched on the fold-0
    train/validation split of the standard plan, final model fitted on the
    fold-0 training split."""
    cfg = cfg or EvalConfig()
    if family not in ALL_FAMILIES:
        raise InputError(f"unknown family {family!r}; choose from {ALL_FAMILIES}")
    registered = register_all(dataset)
    labels = [rc.class_label for rc in registered]
    if any(l is None for l in labels):
        raise InputError("training dataset must be fully labeled")
    plan = make_splits(labels, cfg.seed)
    train_idx, val_idx, _ = plan.folds[0]
    train_rcs = [registered[i] for i in train_idx]
    val_rcs = [registered[i] for i in val_idx]
    aligned_train, mean = procrustes_align(
        train_rcs, threshold=cfg.procrustes_threshold,
        max_iter=cfg.procrustes_max_iter)
    aligned_val = [rotate_to_reference(rc, mean.points) for rc in val_rcs]
    basis, train_fm, val_fm, _ = _fold_features(
        family, aligned_train, aligned_val, [])
    hp, trials = random_search(train_fm, val_fm, space=cfg.space,
                               n_trials=cfg.n_trials, seed=cfg.seed,
                               entropy=(_family_tag(family), 0))
    model = gbt.train(train_fm, hp)
    bundle = TrainedBundle(family=family, mean_shape=mean.points,
                           gbt_model=model, pca_model=basis)
    best = max((t for t in trials if t["val_accuracy"] is not None),
               key=lambda t: t["val_accuracy"])
    info = {"family": family, "n_train": len(train_rcs),
            "n_validation": len(val_rcs),
            "best_val_accuracy": best["val_accuracy"],
            "best_params": hp.to_dict(), "trials": trials}
    return bundle, info


# --------------------------------------------------------------------------
# inference
# --------------------------------------------------------------------------

def classify_file(model_path, contours_path, out_path) -> dict:
    """Classify a contour file with a trained bundle; one JSONL record per
    input contour. Degenerate contours yield class null plus a reason."""
    bundle = TrainedBundle.load(model_path)
    n_done = 0
    n_failed = 0
    with open(out_path, "w", encoding="ascii") as out:
        for c in iter_contours(contours_path):
            try:
                rc = normalize(c)
                feats = bundle.features_for(rc)
                proba = gbt.predict_proba(bundle.gbt_model, feats[None, :])[0]
            except DegenerateDataError as exc:
                logger.warning("contour %s not classified: %s", c.id, exc)
                out.write(json.dumps({"id": c.id, "class": None,
                                      "proba": None, "error": str(exc)}) + "\n")
                n_failed += 1
                continue
            cls = int(np.argmax(proba))
            rec = (f'{{"id":{int(c.id)},"class":{cls},"proba":['
                   + ",".join(_fmt(p) for p in proba) + "]}")
            out.write(rec + "\n")
            n_done += 1
    return {"classified": n_done, "failed": n_failed}


# --------------------------------------------------------------------------
# report artifacts
# --------------------------------------------------------------------------

def ranked_rows(reports: dict[str, EvalReport]) -> list[dict]:
    rows = [{"family": r.family, "mean_acc": r.mean_accuracy,
             "std_acc": r.std_accuracy, "n_features": r.n_features}
            for r in reports.values()]
    rows.sort(key=lambda row: (-row["mean_acc"], row["family"]))
    return rows


def _svg_bar_chart(rows: list[dict]) -> str:
    width, bar_h, gap, left, top = 640, 22, 8, 150, 30
    height = top * 2 + len(rows) * (bar_h + gap)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        '<style>text{font:12px sans-serif}</style>',
        f'<text x="{left}" y="{top - 12}">mean 5-fold test accuracy</text>',
    ]
    span = width - left - 80
    for i, row in enumerate(rows):
        y = top + i * (bar_h + gap)
        w = max(1.0, row["mean_acc"] * span)
        parts.append(f'<text x="4" y="{y + 15}">{row["family"]}</text>')
        parts.append(f'<rect x="{left}" y="{y}" width="{w:.1f}" '
                     f'height="{bar_h}" fill="#4878a8"/>')
        parts.append(f'<text x="{left + w + 6:.1f}" y="{y + 15}">'
                     f'{row["mean_acc"]:.4f}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_outputs(out_dir, reports: dict[str, EvalReport],
                  bundles: Optional[dict[str, TrainedBundle]] = None) -> None:
    """Write report.json, confusion.csv, importance.csv,
    accuracy_by_family.csv, accuracy_by_family.svg, trials.csv, and one
    model_<family>.json bundle per family."""
    from pathlib import Path
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    doc = {"families": [reports[f].to_dict() for f in sorted(reports)]}
    with open(out / "report.json", "w", encoding="ascii") as fh:
        json.dump(doc, fh, indent=1)

    with open(out / "confusion.csv", "w", encoding="ascii") as fh:
        fh.write("family,true_class,pred_class,count\n")
        for fam in sorted(reports):
            cm = reports[fam].confusion
            for t in range(N_CLASSES):
                for p in range(N_CLASSES):
                    fh.write(f"{fam},{t},{p},{int(cm[t, p])}\n")

    with open(out / "importance.csv", "w", encoding="ascii") as fh:
        fh.write("family,rank,feature,gain_share\n")
        for fam in sorted(reports):
            for rank, (name, share) in enumerate(reports[fam].top_features, 1):
                fh.write(f"{fam},{rank},{name},{_fmt(share)}\n")

    rows = ranked_rows(reports)
    with open(out / "accuracy_by_family.csv", "w", encoding="ascii") as fh:
        fh.write("family,mean_acc,std_acc,n_features\n")
        for row in rows:
            fh.write(f"{row['family']},{_fmt(row['mean_acc'])},"
                     f"{_fmt(row['std_acc'])},{row['n_features']}\n")

    with open(out / "accuracy_by_family.svg", "w", encoding="ascii") as fh:
        fh.write(_svg_bar_chart(rows))

    with open(out / "trials.csv", "w", encoding="ascii") as fh:
        fh.write("family,fold,trial,val_accuracy,status,params\n")
        for fam in sorted(reports):
            for fold, trials in enumerate(reports[fam].trials):
                for tr in trials:
                    acc = "" if tr["val_accuracy"] is None else _fmt(tr["val_accuracy"])
                    params = json.dumps(tr["params"], sort_keys=True).replace('"', "'")
                    fh.write(f'{fam},{fold},{tr["trial"]},{acc},'
                             f'{tr["status"]},"{params}"\n')

    if bundles:
        for fam in sorted(bundles):
            bundles[fam].save(out / f"model_{fam}.json")
