#!/usr/bin/env python3
"""Regenerate the committed model fixtures under tests/fixtures/.

The fixture pins the on-disk model format: tests load these files and
require bit-identical predictions, so regenerating them is only
appropriate alongside a deliberate format-version bump.
"""
import json
from pathlib import Path

import numpy as np

from archid import classifiers, features, modelstore, synth

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def main():
    FIXTURES.mkdir(parents=True, exist_ok=True)
    specs = synth.separable_specs(n_classes=5, seed=97)
    raw = synth.generate_dataset(specs, per_class=30, length=1500, seed=97)
    samples = features.featurize_raw_samples(raw)

    rng = np.random.default_rng(4242)
    inputs = rng.random((25, 293))

    expected = {"inputs": inputs.tolist(), "models": {}}
    for name, family, hyper in (
        ("model_knn", "knn", {"k": 3}),
        ("model_forest", "random_forest", {"n_trees": 5, "rng_seed": 9}),
        ("model_logistic", "logistic_regression", {"max_iter": 150}),
    ):
        model = classifiers.train_family(family, samples, hyper)
        modelstore.save_model(model, FIXTURES / f"{name}.archid")
        labels, probs = classifiers.predict_batch(model, inputs)
        expected["models"][name] = {
            "labels": [model.class_names[i] for i in labels],
            "probabilities": probs.tolist(),
        }
    (FIXTURES / "model_fixture_expected.json").write_text(
        json.dumps(expected, indent=1, sort_keys=True))
    print(f"wrote fixtures to {FIXTURES}")


if __name__ == "__main__":
    main()
