"""The 293-dimensional feature vector and its CSV serialization.

Layout: indices 0..255 are the byte frequency distribution (count of
each byte value divided by total length), indices 256..292 are signature
match densities (non-overlapping match count divided by total length),
ordered by ascending signature key.  All values live in [0, 1] and the
BFD block sums to 1 for non-empty input.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import patterns
from .errors import EmptyInput, IoFailure, SchemaMismatch

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
N_BFD = 256

ENDIANNESS_KEYS = ("be_one", "be_stack", "le_one", "le_stack")
POWERPCSPE_KEYS = (
    "powerpcspe_spe_instruction_evl",
    "powerpcspe_spe_instruction_isel",
)


@dataclass(frozen=True)
class FeatureSchema:
    version: int
    names: tuple[str, ...]

    @property
    def size(self) -> int:
        return len(self.names)

    def indices_for(self, feature_set: str) -> np.ndarray:
        """Column indices for a named feature subset.

        bfd: the 256 histogram bins; bfd_endian: those plus the four
        endianness markers; all: every column.
        """
        if feature_set == "all":
            return np.arange(self.size)
        if feature_set == "bfd":
            return np.arange(N_BFD)
        if feature_set == "bfd_endian":
            extra = [self.names.index(k) for k in ENDIANNESS_KEYS]
            return np.array(list(range(N_BFD)) + sorted(extra))
        raise ValueError(f"unknown feature set {feature_set!r}")


def build_schema(extra_patterns=None) -> FeatureSchema:
    sigs = patterns.compile_builtin_patterns()
    version = SCHEMA_VERSION
    if extra_patterns:
        sigs = sigs + list(extra_patterns)
        version = SCHEMA_VERSION + 1  # custom schemas never collide with the builtin one
    keys = sorted(p.key for p in sigs)
    names = tuple(f"bfd_{i}" for i in range(N_BFD)) + tuple(keys)
    return FeatureSchema(version=version, names=names)


_schema_cache: FeatureSchema | None = None


def get_schema() -> FeatureSchema:
    global _schema_cache
    if _schema_cache is None:
        _schema_cache = build_schema()
    return _schema_cache


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray  # float64, shape (schema size,)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))


@dataclass(frozen=True)
class LabeledSample:
    features: FeatureVector
    label: str
    source: str = "<memory>"
    mode: str = "code_only"
    byte_start: int = 0
    byte_len: int = 0


_sorted_builtins: list[patterns.BytePattern] | None = None


def _signature_patterns() -> list[patterns.BytePattern]:
    global _sorted_builtins
    if _sorted_builtins is None:
        _sorted_builtins = sorted(patterns.compile_builtin_patterns(), key=lambda p: p.key)
    return _sorted_builtins


def extract_features(data: bytes, extra_patterns=None) -> FeatureVector:
    """Featurize one byte sequence.

    extra_patterns extends the builtin signature set (matching
    build_schema); vectors carry the extended schema version so models
    trained on a different layout refuse them.
    """
    if not data:
        raise EmptyInput("cannot featurize an empty byte sequence")
    if not extra_patterns:
        sig_patterns = _signature_patterns()
        version = SCHEMA_VERSION
    else:
        sig_patterns = sorted(
            patterns.compile_builtin_patterns() + list(extra_patterns),
            key=lambda p: p.key,
        )
        version = SCHEMA_VERSION + 1

    n = len(data)
    counts = np.bincount(np.frombuffer(data, dtype=np.uint8), minlength=N_BFD)
    values = np.empty(N_BFD + len(sig_patterns), dtype=np.float64)
    values[:N_BFD] = counts / n
    for j, pat in enumerate(sig_patterns):
        values[N_BFD + j] = patterns.count_matches(pat, data) / n
    return FeatureVector(values=values, schema_version=version)


def featurize_raw_samples(raws, jobs: int = 1) -> list[LabeledSample]:
    """Featurize binfmt.RawSample objects, optionally in a process pool.

    Output order always follows the input order, independent of jobs.
    """
    if jobs <= 1 or len(raws) < 2:
        vectors = [extract_features(r.data) for r in raws]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            vectors = list(pool.map(extract_features, [r.data for r in raws], chunksize=8))
    return [
        LabeledSample(
            features=vec,
            label=r.label,
            source=r.source,
            mode=r.mode,
            byte_start=0,
            byte_len=len(r.data),
        )
        for r, vec in zip(raws, vectors)
    ]


LABEL_COLUMN = "architecture"


def features_to_csv(samples, out) -> int:
    """Write samples as CSV to a text file object; returns data row count.

    Floats are rendered with repr so parsing them back is bit-exact.
    """
    schema = get_schema()
    for s in samples:
        if s.features.schema_version != schema.version:
            raise SchemaMismatch(
                f"sample from {s.source} has schema v{s.features.schema_version}, "
                f"writer expects v{schema.version}"
            )
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(list(schema.names) + [LABEL_COLUMN])
        count = 0
        for s in samples:
            writer.writerow([repr(float(v)) for v in s.features.values] + [s.label])
            count += 1
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return count


def save_features_csv(samples, path) -> int:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            return features_to_csv(samples, fh)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def load_features_csv(path) -> list[LabeledSample]:
    """Parse a feature CSV produced by features_to_csv."""
    schema = get_schema()
    expected = list(schema.names) + [LABEL_COLUMN]
    samples = []
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != expected:
                got = len(header) - 1 if header else 0
                raise SchemaMismatch(
                    f"{path}: header does not match feature schema v{schema.version} "
                    f"({got} feature columns, expected {schema.size})"
                )
            for lineno, row in enumerate(reader, start=2):
                if len(row) != len(expected):
                    raise SchemaMismatch(f"{path}:{lineno}: expected {len(expected)} columns")
                values = np.array([float(v) for v in row[:-1]], dtype=np.float64)
                samples.append(
                    LabeledSample(
                        features=FeatureVector(values=values, schema_version=schema.version),
                        label=row[-1],
                        source=f"{path}:{lineno}",
                    )
                )
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return samples


def samples_to_matrix(samples):
    """Stack sample features into (X, y, class_names) for training."""
    if not samples:
        raise EmptyInput("no samples")
    versions = {s.features.schema_version for s in samples}
    if len(versions) != 1:
        raise SchemaMismatch(f"mixed schema versions in sample set: {sorted(versions)}")
    class_names = sorted({s.label for s in samples})
    index = {c: i for i, c in enumerate(class_names)}
    X = np.stack([s.features.values for s in samples])
    y = np.array([index[s.label] for s in samples], dtype=np.int64)
    return X, y, class_names
