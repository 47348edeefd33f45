import pytest

from archid import features, synth


@pytest.fixture(scope="session")
def desk_specs():
    return synth.separable_specs(n_classes=10, seed=42)


@pytest.fixture(scope="session")
def desk_raw(desk_specs):
    return synth.generate_dataset(desk_specs, per_class=200, length=4000, seed=42)


@pytest.fixture(scope="session")
def desk_samples(desk_raw):
    return features.featurize_raw_samples(desk_raw)


@pytest.fixture(scope="session")
def ablation_samples():
    specs = synth.ablation_specs(seed=7)
    raw = synth.generate_dataset(specs, per_class=60, length=4000, seed=7)
    return features.featurize_raw_samples(raw)


@pytest.fixture(scope="session")
def regime_datasets():
    """Aligned code-only / complete-binary samples over the same code."""
    specs = synth.separable_specs(n_classes=8, seed=11, distinct_weight=0.3)
    code_raw, complete_raw = synth.paired_regime_dataset(specs, per_class=80, length=4000, seed=11)
    return (
        features.featurize_raw_samples(code_raw),
        features.featurize_raw_samples(complete_raw),
        code_raw,
        complete_raw,
    )
