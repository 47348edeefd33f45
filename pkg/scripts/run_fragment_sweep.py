#!/usr/bin/env python3
"""Accuracy vs test-fragment size on the synthetic desk corpus.

Prints the two-column size/accuracy table for each requested family;
suitable for plotting the classic fragment-size curve.
"""
import argparse

from archid import evaluation, features, synth


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--classes", type=int, default=10)
    parser.add_argument("--per-class", type=int, default=200)
    parser.add_argument("--length", type=int, default=4000)
    parser.add_argument("--sizes", default="8,16,32,64,128,256,512,1024,2048,4000")
    parser.add_argument("--draws", type=int, default=10)
    parser.add_argument("--families", default="knn,logistic_regression,naive_bayes")
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()

    specs = synth.separable_specs(n_classes=args.classes, seed=args.seed)
    raw = synth.generate_dataset(specs, per_class=args.per_class,
                                 length=args.length, seed=args.seed)
    samples = features.featurize_raw_samples(raw)
    train = [s for i, s in enumerate(samples) if i % 10 != 0]
    test_raw = [r for i, r in enumerate(raw) if i % 10 == 0]
    sizes = [int(s) for s in args.sizes.split(",")]

    for family in args.families.split(","):
        hyper = {"k": 3} if family == "knn" else {}
        results = evaluation.fragment_sweep(train, test_raw, family, hyper,
                                            sizes=sizes, per_size_draws=args.draws,
                                            seed=args.seed)
        print(f"\n{family} ({args.draws} draws per binary per size)")
        print(evaluation.sweep_to_text(results))


if __name__ == "__main__":
    main()
