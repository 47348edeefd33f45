#!/usr/bin/env python3
"""Materialize a synthetic corpus tree for end-to-end CLI runs.

Example:
    python scripts/make_synthetic_corpus.py --out /tmp/corpus --classes 10 \
        --per-class 50 --length 4200
    archid extract --corpus /tmp/corpus --out /tmp/features.csv
"""
import argparse

from archid import synth


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True)
    parser.add_argument("--classes", type=int, default=10)
    parser.add_argument("--per-class", type=int, default=50)
    parser.add_argument("--length", type=int, default=4200)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--container", choices=["elf", "raw"], default="elf")
    parser.add_argument("--complete", action="store_true",
                        help="wrap code in synthetic header/data noise")
    parser.add_argument("--distinct-weight", type=float, default=0.3,
                        help="how far apart the class byte distributions sit")
    args = parser.parse_args()

    specs = synth.separable_specs(n_classes=args.classes, seed=args.seed,
                                  distinct_weight=args.distinct_weight)
    written = synth.write_corpus(args.out, specs, per_class=args.per_class,
                                 length=args.length, seed=args.seed,
                                 container=args.container, complete=args.complete)
    print(f"wrote {written} files under {args.out}")


if __name__ == "__main__":
    main()
