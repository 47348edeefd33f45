"""Experiment protocols: cross-validation, ablations, sweeps, metrics.

Reported figures are weighted averages: each per-class metric is
weighted by the class's share of test instances.  AUC is support-weighted
one-vs-rest rank AUC with tied scores averaged; classes without both a
positive and a negative example are skipped and excluded from the
weighting.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from . import classifiers, features
from .binfmt import sample_fragment
from .errors import DegenerateClass, EmptyMatrix, FragmentTooLarge, InsufficientClassSupport

log = logging.getLogger(__name__)


@dataclass
class ConfusionMatrix:
    class_names: list[str]
    counts: np.ndarray  # rows = true class, columns = predicted class

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        k = len(self.class_names)
        if self.counts.shape != (k, k):
            raise ValueError(f"confusion matrix shape {self.counts.shape} != ({k}, {k})")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_text(self) -> str:
        width = max(len(c) for c in self.class_names) + 1
        lines = [" " * width + " ".join(f"{c:>{width}}" for c in self.class_names)]
        for name, row in zip(self.class_names, self.counts):
            lines.append(f"{name:>{width}}" + " ".join(f"{v:>{width}d}" for v in row))
        return "\n".join(lines)


@dataclass
class EvaluationReport:
    per_class: dict          # class -> {"precision","recall","f1","auc"}
    weighted: dict           # same keys, support-weighted
    accuracy: float
    confusion: ConfusionMatrix
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "per_class": self.per_class,
            "weighted": self.weighted,
            "accuracy": self.accuracy,
            "confusion": {
                "class_names": self.confusion.class_names,
                "counts": self.confusion.counts.tolist(),
            },
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluationReport":
        return cls(
            per_class=d["per_class"],
            weighted=d["weighted"],
            accuracy=d["accuracy"],
            confusion=ConfusionMatrix(
                class_names=list(d["confusion"]["class_names"]),
                counts=np.array(d["confusion"]["counts"], dtype=np.int64),
            ),
            config=d.get("config", {}),
        )

    @classmethod
    def from_json(cls, text: str) -> "EvaluationReport":
        return cls.from_dict(json.loads(text))

    def to_text(self) -> str:
        lines = [
            f"{'class':>14} {'precision':>9} {'recall':>9} {'f1':>9} {'auc':>9} {'support':>8}"
        ]
        supports = self.confusion.counts.sum(axis=1)
        for name, sup in zip(self.confusion.class_names, supports):
            m = self.per_class[name]
            auc = "-" if m.get("auc") is None else f"{m['auc']:.4f}"
            lines.append(
                f"{name:>14} {m['precision']:>9.4f} {m['recall']:>9.4f} "
                f"{m['f1']:>9.4f} {auc:>9} {sup:>8d}"
            )
        w = self.weighted
        wauc = "-" if w.get("auc") is None else f"{w['auc']:.4f}"
        lines.append(
            f"{'weighted':>14} {w['precision']:>9.4f} {w['recall']:>9.4f} "
            f"{w['f1']:>9.4f} {wauc:>9} {self.confusion.total:>8d}"
        )
        lines.append(f"accuracy: {self.accuracy:.4f}")
        return "\n".join(lines)


def metrics_from_confusion(cm: ConfusionMatrix, config=None) -> EvaluationReport:
    """Precision/recall/F1/accuracy from a confusion matrix alone.

    Zero denominators yield 0, matching the convention for classes never
    predicted or never present.  AUC needs scores and is left unset here.
    """
    counts = cm.counts
    total = counts.sum()
    if total == 0:
        raise EmptyMatrix("confusion matrix has no observations")
    tp = np.diag(counts).astype(np.float64)
    predicted = counts.sum(axis=0).astype(np.float64)
    actual = counts.sum(axis=1).astype(np.float64)

    per_class = {}
    for i, name in enumerate(cm.class_names):
        precision = tp[i] / predicted[i] if predicted[i] > 0 else 0.0
        recall = tp[i] / actual[i] if actual[i] > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        per_class[name] = {"precision": precision, "recall": recall, "f1": f1, "auc": None}

    support = actual / total
    weighted = {
        metric: float(sum(per_class[c][metric] * support[i] for i, c in enumerate(cm.class_names)))
        for metric in ("precision", "recall", "f1")
    }
    weighted["auc"] = None
    return EvaluationReport(
        per_class=per_class,
        weighted=weighted,
        accuracy=float(tp.sum() / total),
        confusion=cm,
        config=config or {},
    )


def auc_weighted(scores: np.ndarray, truths: np.ndarray, class_names: list[str]):
    """Support-weighted one-vs-rest rank AUC.

    Returns (weighted value, per-class dict).  Classes lacking positives
    or negatives are skipped; if nothing is scoreable, DegenerateClass.
    """
    scores = np.asarray(scores, dtype=np.float64)
    truths = np.asarray(truths)
    per_class = {}
    weight_total = 0.0
    acc = 0.0
    for ci, name in enumerate(class_names):
        pos = truths == ci
        n_pos = int(pos.sum())
        n_neg = len(truths) - n_pos
        if n_pos == 0 or n_neg == 0:
            per_class[name] = None
            continue
        ranks = rankdata(scores[:, ci])  # ties averaged
        auc = (ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
        per_class[name] = float(auc)
        acc += auc * n_pos
        weight_total += n_pos
    if weight_total == 0:
        raise DegenerateClass("no class has both positive and negative examples")
    return float(acc / weight_total), per_class


def _report_from_predictions(y_true, y_pred, probs, class_names, config) -> EvaluationReport:
    k = len(class_names)
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    cm = ConfusionMatrix(class_names=list(class_names), counts=counts)
    report = metrics_from_confusion(cm, config=config)
    try:
        weighted_auc, per_class_auc = auc_weighted(probs, y_true, class_names)
        report.weighted["auc"] = weighted_auc
        for name in class_names:
            report.per_class[name]["auc"] = per_class_auc[name]
    except DegenerateClass:
        pass
    return report


def stratified_folds(y: np.ndarray, folds: int, seed: int) -> np.ndarray:
    """Fold id per sample; per-class counts across folds differ by at most 1."""
    if folds < 2:
        raise ValueError("folds must be >= 2")
    assignment = np.empty(len(y), dtype=np.int64)
    rng = np.random.default_rng(seed)
    for ci in np.unique(y):
        rows = np.nonzero(y == ci)[0]
        if len(rows) < folds:
            raise InsufficientClassSupport(
                f"class index {ci} has {len(rows)} samples, fewer than {folds} folds"
            )
        rng.shuffle(rows)
        assignment[rows] = np.arange(len(rows)) % folds
    return assignment


def cross_validate(
    samples,
    family: str,
    hyperparams=None,
    folds: int = 10,
    feature_set: str = "all",
    seed: int = 42,
) -> EvaluationReport:
    """Stratified k-fold CV pooling every fold's test predictions."""
    X, y, class_names = features.samples_to_matrix(samples)
    schema = features.get_schema()
    col_idx = schema.indices_for(feature_set)
    assignment = stratified_folds(y, folds, seed)

    y_pred = np.empty(len(y), dtype=np.int64)
    probs = np.empty((len(y), len(class_names)))
    for fold in range(folds):
        test_mask = assignment == fold
        train = [s for s, m in zip(samples, test_mask) if not m]
        model = classifiers.train_family(family, train, hyperparams, feature_indices=col_idx)
        # Per-fold training may not see every class; remap its outputs.
        remap = np.array([class_names.index(c) for c in model.class_names])
        fold_pred, fold_probs = classifiers.predict_batch(model, X[test_mask])
        y_pred[test_mask] = remap[fold_pred]
        full = np.zeros((int(test_mask.sum()), len(class_names)))
        full[:, remap] = fold_probs
        probs[test_mask] = full

    modes = {s.mode for s in samples}
    config = {
        "protocol": "cross_validation",
        "family": family,
        "hyperparams": _jsonable(hyperparams or {}),
        "feature_set": feature_set,
        "train_mode": modes.pop() if len(modes) == 1 else "mixed",
        "test_mode": "same",
        "folds": folds,
        "seed": seed,
    }
    return _report_from_predictions(y, y_pred, probs, class_names, config)


def cross_regime_eval(
    train_samples,
    test_samples,
    family: str,
    hyperparams=None,
    feature_set: str = "all",
) -> EvaluationReport:
    """Train once on one regime, test once on another (e.g. code vs whole file)."""
    if not test_samples:
        raise EmptyMatrix("no test samples")
    schema = features.get_schema()
    col_idx = schema.indices_for(feature_set)
    model = classifiers.train_family(family, train_samples, hyperparams, feature_indices=col_idx)
    class_names = list(model.class_names)
    for s in test_samples:
        if s.label not in class_names:
            class_names.append(s.label)
    class_names = sorted(class_names)
    remap = np.array([class_names.index(c) for c in model.class_names])

    X_test = np.stack([s.features.values for s in test_samples])
    y_true = np.array([class_names.index(s.label) for s in test_samples])
    pred, model_probs = classifiers.predict_batch(model, X_test)
    y_pred = remap[pred]
    probs = np.zeros((len(test_samples), len(class_names)))
    probs[:, remap] = model_probs

    config = {
        "protocol": "cross_regime",
        "family": family,
        "hyperparams": _jsonable(hyperparams or {}),
        "feature_set": feature_set,
        "train_mode": train_samples[0].mode if train_samples else "unknown",
        "test_mode": test_samples[0].mode,
        "folds": 1,
        "seed": None,
    }
    return _report_from_predictions(y_true, y_pred, probs, class_names, config)


def _fragment_seed(seed: int, binary_index: int, size: int, draw: int) -> int:
    # Plain integer mixing keeps draws independent of skipped binaries.
    return (((seed * 1000003 + binary_index) * 1000003 + size) * 1000003 + draw) & 0x7FFFFFFFFFFFFFFF


def fragment_sweep(
    train_samples,
    test_binaries,
    family: str,
    hyperparams=None,
    sizes=(8, 16, 32, 64, 128, 256, 512, 1024, 2048, 4000),
    per_size_draws: int = 10,
    seed: int = 42,
) -> dict:
    """Accuracy as a function of test fragment size.

    The model is trained once on full feature vectors; for each size,
    per_size_draws random fragments are cut from every test binary's
    bytes, featurized and classified.  Binaries shorter than a size are
    skipped for it (with a warning), not fatal.
    """
    if not sizes:
        raise ValueError("sizes must be non-empty")
    model = classifiers.train_family(family, train_samples, hyperparams)
    class_index = {c: i for i, c in enumerate(model.class_names)}

    results = {}
    for size in sizes:
        vectors = []
        labels = []
        for b_idx, sample in enumerate(test_binaries):
            if len(sample.data) < size:
                log.warning("skipping %s for size %d: only %d bytes",
                            sample.source, size, len(sample.data))
                continue
            for draw in range(per_size_draws):
                frag = sample_fragment(sample.data, size, _fragment_seed(seed, b_idx, size, draw))
                vectors.append(features.extract_features(frag).values)
                labels.append(sample.label)
        if not vectors:
            raise FragmentTooLarge(f"no test binary holds {size} bytes")
        pred, _ = classifiers.predict_batch(model, np.stack(vectors))
        truth = np.array([class_index.get(l, -1) for l in labels])
        results[int(size)] = float(np.mean(pred == truth))
    return results


def sweep_to_text(results: dict) -> str:
    lines = [f"{'size':>8} {'accuracy':>9}"]
    for size in sorted(results):
        lines.append(f"{size:>8d} {results[size]:>9.4f}")
    return "\n".join(lines)


def _jsonable(d: dict) -> dict:
    out = {}
    for k, v in d.items():
        if isinstance(v, (np.integer,)):
            v = int(v)
        elif isinstance(v, (np.floating,)):
            v = float(v)
        out[k] = v
    return out
