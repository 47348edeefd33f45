#!/usr/bin/env python3
"""Classifier comparison on the synthetic desk corpus.

Reproduces the cross-validated accuracy table shape of the full-scale
experiments at desk scale: one row per classifier family, one accuracy
column per feature set (histogram only, histogram+endianness markers,
all 293 features), plus weighted precision/recall/F1/AUC on the full
feature set.
"""
import argparse
import time

from archid import evaluation, features, synth

FAMILIES = (
    ("knn", {"k": 1}, "1-NN"),
    ("knn", {"k": 3}, "3-NN"),
    ("decision_tree", {}, "decision tree"),
    ("random_forest", {"n_trees": 100}, "random forest"),
    ("naive_bayes", {}, "naive Bayes"),
    ("logistic_regression", {"c": 1000.0, "penalty": "l1"}, "logistic (C=1000, L1)"),
)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--classes", type=int, default=10)
    parser.add_argument("--per-class", type=int, default=200)
    parser.add_argument("--length", type=int, default=4000)
    parser.add_argument("--folds", type=int, default=10)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()

    specs = synth.separable_specs(n_classes=args.classes, seed=args.seed)
    raw = synth.generate_dataset(specs, per_class=args.per_class,
                                 length=args.length, seed=args.seed)
    samples = features.featurize_raw_samples(raw)
    print(f"{len(samples)} samples, {args.classes} classes, {args.folds}-fold CV\n")

    header = (f"{'classifier':>22} {'precision':>9} {'recall':>9} {'f1':>9} "
              f"{'auc':>9} {'acc(all)':>9} {'acc(bfd+e)':>10} {'acc(bfd)':>9}")
    print(header)
    for family, hyper, label in FAMILIES:
        started = time.time()
        accs = {}
        full_report = None
        for feature_set in ("all", "bfd_endian", "bfd"):
            report = evaluation.cross_validate(samples, family, hyper,
                                               folds=args.folds,
                                               feature_set=feature_set,
                                               seed=args.seed)
            accs[feature_set] = report.accuracy
            if feature_set == "all":
                full_report = report
        w = full_report.weighted
        auc = "-" if w["auc"] is None else f"{w['auc']:9.3f}"
        print(f"{label:>22} {w['precision']:9.3f} {w['recall']:9.3f} {w['f1']:9.3f} "
              f"{auc} {accs['all']:9.3f} {accs['bfd_endian']:10.3f} {accs['bfd']:9.3f}"
              f"   ({time.time() - started:.0f}s)")


if __name__ == "__main__":
    main()
