import io
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from archid import features
from archid.errors import EmptyInput, SchemaMismatch

nonempty_bytes = st.binary(min_size=1, max_size=512)


def test_schema_shape():
    schema = features.get_schema()
    assert schema.size == 293
    assert schema.names[:256] == tuple(f"bfd_{i}" for i in range(256))
    sig_names = schema.names[256:]
    assert len(sig_names) == 37
    assert list(sig_names) == sorted(sig_names)


def test_schema_feature_subsets():
    schema = features.get_schema()
    assert len(schema.indices_for("bfd")) == 256
    assert len(schema.indices_for("bfd_endian")) == 260
    assert len(schema.indices_for("all")) == 293
    with pytest.raises(ValueError):
        schema.indices_for("nope")


def test_micro_example_00_01():
    schema = features.get_schema()
    fv = features.extract_features(bytes([0x00, 0x01]))
    assert fv.values[0] == 0.5
    assert fv.values[1] == 0.5
    assert fv.values[2:256].sum() == 0.0
    assert fv.values[schema.names.index("be_one")] == 0.5
    assert fv.values[schema.names.index("le_one")] == 0.0


def test_micro_example_amd64_prolog():
    schema = features.get_schema()
    fv = features.extract_features(b"\x55\x48\x89\xe5")
    assert fv.values[schema.names.index("amd64_prolog_1")] == 0.25
    assert fv.values[0x55] == 0.25


def test_single_byte_repeated():
    fv = features.extract_features(b"\x41" * 100)
    assert fv.values[0x41] == 1.0
    assert fv.values[256:].sum() == 0.0


def test_empty_input_raises():
    with pytest.raises(EmptyInput):
        features.extract_features(b"")


@settings(max_examples=150, deadline=None)
@given(nonempty_bytes)
def test_bfd_sums_to_one(data):
    fv = features.extract_features(data)
    assert abs(fv.values[:256].sum() - 1.0) <= 1e-9
    assert fv.values.min() >= 0.0
    assert fv.values.max() <= 1.0


@settings(max_examples=100, deadline=None)
@given(nonempty_bytes, st.integers(0, 2**32 - 1))
def test_bfd_permutation_invariant(data, seed):
    shuffled = bytearray(data)
    random.Random(seed).shuffle(shuffled)
    a = features.extract_features(data)
    b = features.extract_features(bytes(shuffled))
    assert np.array_equal(a.values[:256], b.values[:256])


@settings(max_examples=100, deadline=None)
@given(nonempty_bytes)
def test_signature_densities_at_most_half(data):
    fv = features.extract_features(data)
    assert fv.values[256:].max() <= 0.5


@settings(max_examples=50, deadline=None)
@given(nonempty_bytes)
def test_extraction_deterministic(data):
    a = features.extract_features(data)
    b = features.extract_features(data)
    assert np.array_equal(a.values, b.values)


def test_self_concatenation_keeps_bfd():
    rng = random.Random(5)
    for _ in range(20):
        data = rng.randbytes(rng.randint(1, 200))
        a = features.extract_features(data)
        b = features.extract_features(data + data)
        assert np.allclose(a.values[:256], b.values[:256], atol=1e-12)


def _make_samples(n, seed=0):
    rng = random.Random(seed)
    labels = ["amd64", "armel", "mips"]
    return [
        features.LabeledSample(
            features=features.extract_features(rng.randbytes(rng.randint(16, 300))),
            label=labels[i % len(labels)],
            source=f"mem{i}",
        )
        for i in range(n)
    ]


def test_csv_header_only_for_no_samples():
    buf = io.StringIO()
    assert features.features_to_csv([], buf) == 0
    lines = buf.getvalue().splitlines()
    assert len(lines) == 1
    assert lines[0].split(",")[-1] == "architecture"
    assert len(lines[0].split(",")) == 294


def test_csv_line_count():
    buf = io.StringIO()
    assert features.features_to_csv(_make_samples(2), buf) == 2
    assert len(buf.getvalue().splitlines()) == 3


def test_csv_roundtrip_bit_exact(tmp_path):
    samples = _make_samples(7, seed=3)
    path = tmp_path / "features.csv"
    features.save_features_csv(samples, path)
    loaded = features.load_features_csv(path)
    assert len(loaded) == len(samples)
    for orig, back in zip(samples, loaded):
        assert back.label == orig.label
        assert np.array_equal(back.features.values, orig.features.values)


def test_csv_rejects_wrong_column_count(tmp_path):
    samples = _make_samples(1)
    path = tmp_path / "bad.csv"
    features.save_features_csv(samples, path)
    lines = path.read_text().splitlines()
    # Drop one feature column from header and row.
    broken = "\n".join(",".join(l.split(",")[1:]) for l in lines)
    path.write_text(broken + "\n")
    with pytest.raises(SchemaMismatch):
        features.load_features_csv(path)


def test_csv_rejects_mixed_schema_versions():
    sample = _make_samples(1)[0]
    wrong = features.LabeledSample(
        features=features.FeatureVector(values=sample.features.values, schema_version=99),
        label="amd64",
    )
    with pytest.raises(SchemaMismatch):
        features.features_to_csv([wrong], io.StringIO())


def test_extra_patterns_extend_schema_and_extraction():
    from archid import patterns as pat_mod

    extra = [pat_mod.parse_pattern("zz_custom_sig", "de ad be ef")]
    schema = features.build_schema(extra)
    assert schema.size == 294
    assert schema.version != features.SCHEMA_VERSION
    assert "zz_custom_sig" in schema.names

    data = b"\xde\xad\xbe\xef" * 4
    fv = features.extract_features(data, extra_patterns=extra)
    assert fv.schema_version == schema.version
    assert len(fv.values) == schema.size
    assert fv.values[schema.names.index("zz_custom_sig")] == 4 / 16
    # builtin columns keep their meaning in the extended layout
    base = features.extract_features(data)
    for name in features.get_schema().names:
        assert fv.values[schema.names.index(name)] == base.values[
            features.get_schema().names.index(name)]


def test_parallel_featurize_matches_serial(desk_raw):
    subset = desk_raw[:12]
    serial = features.featurize_raw_samples(subset, jobs=1)
    parallel = features.featurize_raw_samples(subset, jobs=2)
    assert [s.label for s in serial] == [p.label for p in parallel]
    for s, p in zip(serial, parallel):
        assert np.array_equal(s.features.values, p.features.values)
