"""Command-line entry point: extract, train, evaluate, predict, serve.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
Every command is deterministic for fixed flags, inputs and seeds
(default seed 42).  A --config file with key=value lines supplies flag
defaults; explicit flags win.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import classifiers, evaluation, features, modelstore, service
from .binfmt import ARCHITECTURES, concat_code, ingest_corpus, load_image, scan_corpus
from .errors import ArchidError, DataError, EmptyInput, UsageError

log = logging.getLogger(__name__)

DEFAULT_SEED = 42
API_KEY_ENV = "ARCHID_API_KEY"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _add_hyper_flags(p):
    p.add_argument("--k", type=int, default=3, help="neighbors for knn")
    p.add_argument("--c", type=float, default=1000.0, help="inverse regularization strength")
    p.add_argument("--penalty", choices=["l1", "l2", "none"], default="l1")
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--learning-rate", type=float, default=1.0)
    p.add_argument("--var-smoothing", type=float, default=1e-9)
    p.add_argument("--trees", type=int, default=100, help="tree count for random_forest")
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--min-leaf", type=int, default=1)


def _hyperparams(args) -> dict:
    family = args.family
    if family == "knn":
        return {"k": args.k}
    if family == "logistic_regression":
        return {"c": args.c, "penalty": args.penalty, "max_iter": args.max_iter,
                "tol": args.tol, "learning_rate": args.learning_rate}
    if family == "naive_bayes":
        return {"var_smoothing": args.var_smoothing}
    if family == "decision_tree":
        return {"max_depth": args.max_depth, "min_leaf": args.min_leaf, "rng_seed": args.seed}
    if family == "random_forest":
        return {"n_trees": args.trees, "max_depth": args.max_depth,
                "min_leaf": args.min_leaf, "rng_seed": args.seed}
    raise UsageError(f"unknown family {family}")


def build_parser() -> _Parser:
    parser = _Parser(prog="archid",
                     description="identify CPU architecture and endianness of binary code")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="featurize a corpus tree into a CSV")
    p.add_argument("--corpus", required=True, help="root with one subdirectory per architecture")
    p.add_argument("--mode", choices=["code_only", "complete_binary"], default="code_only")
    p.add_argument("--min-code-bytes", type=int, default=4000)
    p.add_argument("--per-class-cap", type=int, default=3000)
    p.add_argument("--cap-seed", type=int, default=None,
                   help="select capped samples randomly with this seed instead of lexicographically")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--config", help="key=value file with flag defaults")

    p = sub.add_parser("train", help="train a classifier from a feature CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--family", required=True, choices=list(classifiers.FAMILIES))
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True, help="model file path")
    p.add_argument("--config", help="key=value file with flag defaults")
    _add_hyper_flags(p)

    p = sub.add_parser("evaluate", help="run an evaluation protocol")
    p.add_argument("--protocol", choices=["cv", "sweep", "cross-regime"], required=True)
    p.add_argument("--data", required=True, help="feature CSV or corpus dir (training data)")
    p.add_argument("--test-data", help="corpus dir with test binaries (sweep, cross-regime)")
    p.add_argument("--family", required=True, choices=list(classifiers.FAMILIES))
    p.add_argument("--feature-set", choices=["bfd", "bfd_endian", "all"], default="all")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--train-mode", choices=["code_only", "complete_binary"], default="code_only")
    p.add_argument("--test-mode", choices=["code_only", "complete_binary"],
                   default="complete_binary")
    p.add_argument("--sizes", default="8,16,32,64,128,256,512,1024,2048,4000")
    p.add_argument("--draws", type=int, default=10, help="fragments per binary per size")
    p.add_argument("--min-code-bytes", type=int, default=4000)
    p.add_argument("--per-class-cap", type=int, default=3000)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--report", help="write the machine-readable report (JSON) here")
    p.add_argument("--config", help="key=value file with flag defaults")
    _add_hyper_flags(p)

    p = sub.add_parser("predict", help="classify one file")
    p.add_argument("--model", required=True)
    p.add_argument("--mode", choices=["code_only", "complete_binary"], default="complete_binary")
    p.add_argument("--json", action="store_true", help="emit the service JSON schema")
    p.add_argument("input", help="binary file to classify")
    p.add_argument("--config", help="key=value file with flag defaults")

    p = sub.add_parser("serve", help="serve predictions over HTTP")
    p.add_argument("--model", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=5000)
    p.add_argument("--api-key", default=None,
                   help=f"defaults to the {API_KEY_ENV} environment variable")
    p.add_argument("--max-upload", type=int, default=service.DEFAULT_MAX_UPLOAD)
    p.add_argument("--mode", choices=["code_only", "complete_binary"], default="complete_binary")
    p.add_argument("--config", help="key=value file with flag defaults")
    return parser


def _expand_config(argv: list[str]) -> list[str]:
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise UsageError("--config needs a path")
    path = argv[i + 1]
    tokens = []
    try:
        for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            tokens += [f"--{key.strip().replace('_', '-')}", value.strip()]
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}")
    rest = argv[:i] + argv[i + 2:]
    # Config-derived flags come first so explicit flags override them.
    return tokens + rest


def cmd_extract(args) -> int:
    print(f"scanning {args.corpus} ({args.mode})", file=sys.stderr)
    samples = ingest_corpus(
        args.corpus, mode=args.mode, min_code_bytes=args.min_code_bytes,
        per_class_cap=args.per_class_cap, jobs=args.jobs, cap_seed=args.cap_seed,
    )
    rows = features.save_features_csv(samples, args.out)
    print(f"wrote {rows} rows to {args.out}", file=sys.stderr)
    return 0


def cmd_train(args) -> int:
    samples = features.load_features_csv(args.csv)
    unknown = sorted({s.label for s in samples} - set(ARCHITECTURES))
    if unknown:
        raise DataError(f"{args.csv}: unknown class labels {unknown}")
    started = time.monotonic()
    model = classifiers.train_family(args.family, samples, _hyperparams(args))
    elapsed = time.monotonic() - started
    digest = hashlib.sha256(Path(args.csv).read_bytes()).hexdigest()
    written = modelstore.save_model(model, args.out, training_digest=digest)
    print(f"family:  {args.family}")
    print(f"classes: {len(model.class_names)} ({', '.join(model.class_names)})")
    print(f"samples: {len(samples)}")
    print(f"time:    {elapsed:.2f}s")
    print(f"model:   {args.out} ({written} bytes)")
    return 0


def _load_train_samples(args):
    data = Path(args.data)
    if data.is_dir():
        return ingest_corpus(data, mode=args.train_mode, min_code_bytes=args.min_code_bytes,
                             per_class_cap=args.per_class_cap, jobs=args.jobs)
    return features.load_features_csv(data)


def cmd_evaluate(args) -> int:
    hyper = _hyperparams(args)
    if args.protocol == "cv":
        samples = _load_train_samples(args)
        report = evaluation.cross_validate(
            samples, args.family, hyper, folds=args.folds,
            feature_set=args.feature_set, seed=args.seed,
        )
    elif args.protocol == "cross-regime":
        if not args.test_data:
            raise UsageError("--test-data is required for cross-regime")
        train = _load_train_samples(args)
        test = ingest_corpus(args.test_data, mode=args.test_mode,
                             min_code_bytes=args.min_code_bytes,
                             per_class_cap=args.per_class_cap, jobs=args.jobs)
        report = evaluation.cross_regime_eval(train, test, args.family, hyper,
                                              feature_set=args.feature_set)
    else:  # sweep
        if not args.test_data:
            raise UsageError("--test-data is required for sweep")
        train = _load_train_samples(args)
        test = scan_corpus(args.test_data, mode=args.test_mode,
                           min_code_bytes=args.min_code_bytes,
                           per_class_cap=args.per_class_cap)
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
        results = evaluation.fragment_sweep(train, test, args.family, hyper,
                                            sizes=sizes, per_size_draws=args.draws,
                                            seed=args.seed)
        print(evaluation.sweep_to_text(results))
        if args.report:
            Path(args.report).write_text(json.dumps(results, indent=2, sort_keys=True))
        return 0

    print(report.to_text())
    if args.report:
        Path(args.report).write_text(report.to_json())
    return 0


def cmd_predict(args) -> int:
    model = modelstore.load_model(args.model)
    image = load_image(args.input)
    if not image.raw_bytes:
        raise EmptyInput(f"{args.input} is empty")
    data = concat_code(image) if args.mode == "code_only" else image.raw_bytes
    vector = features.extract_features(data)
    prediction = classifiers.predict(model, vector)
    name = prediction.label
    if name not in ARCHITECTURES:
        raise ArchidError(f"model produced unknown architecture label {name!r}")
    endianness, wordsize = ARCHITECTURES[name]
    probability = prediction.probabilities[name]
    if args.json:
        print(json.dumps({
            "prediction": {
                "architecture": name,
                "endianness": endianness,
                "wordsize": wordsize,
            },
            "prediction_probability": probability,
        }))
    else:
        print(f"architecture: {name}")
        print(f"endianness:   {endianness}")
        print(f"wordsize:     {wordsize}")
        print(f"probability:  {probability:.4f}")
    return 0


def cmd_serve(args) -> int:
    api_key = args.api_key or os.environ.get(API_KEY_ENV)
    if not api_key:
        raise UsageError(f"supply --api-key or set {API_KEY_ENV}")
    service.serve(args.model, host=args.host, port=args.port, api_key=api_key,
                  max_upload_bytes=args.max_upload, default_mode=args.mode)
    return 0


_COMMANDS = {
    "extract": cmd_extract,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "predict": cmd_predict,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        # Config expansion operates on the tokens after the subcommand.
        if len(argv) >= 1 and "--config" in argv:
            argv = argv[:1] + _expand_config(argv[1:])
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ArchidError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # keep internal failures distinguishable
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
