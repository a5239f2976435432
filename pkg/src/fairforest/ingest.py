"""CSV loading, encoding and train/test splitting.

Encoding follows the usual tabular recipe: rows with missing values are
dropped, categorical columns are one-hot expanded (one indicator per
observed category, first-seen order), the label and the sensitive
attribute are mapped to {0, 1}. The 0/1 sensitive indicator is itself an
ordinary feature, available to splits. Numeric features are used raw;
tree splits are scale-invariant.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import ConfigError, InputError, ParseError

NUMERIC = "numeric"
CATEGORICAL = "categorical"
LABEL = "label"
SENSITIVE = "sensitive"

_KINDS = (NUMERIC, CATEGORICAL, LABEL, SENSITIVE)

BUILTIN_SCHEMAS = ("adult", "compas", "bank")


@dataclass
class FeatureSchema:
    """Declares each column's role and the binary encodings.

    The sensitive column maps to 1 ("privileged") either by value equality
    (``sensitive_privileged_value``), by everything-except-one-value
    (``sensitive_unprivileged_value``), or by thresholding a numeric column
    (``sensitive_threshold``: privileged iff value >= threshold). Exactly
    one of the three must be set.
    """

    columns: list[tuple[str, str]]
    favorable_label_value: str = "1"
    sensitive_privileged_value: str | None = None
    sensitive_unprivileged_value: str | None = None
    sensitive_threshold: float | None = None
    missing_tokens: list[str] = field(default_factory=lambda: ["", "?"])
    label_domain: list[str] | None = None
    sensitive_domain: list[str] | None = None
    delimiter: str = ","

    def __post_init__(self):
        kinds = [k for _, k in self.columns]
        for _, kind in self.columns:
            if kind not in _KINDS:
                raise ConfigError(f"unknown column kind {kind!r}")
        if kinds.count(LABEL) != 1 or kinds.count(SENSITIVE) != 1:
            raise ConfigError(
                "schema needs exactly one label column and one sensitive column")
        modes = sum(v is not None for v in (
            self.sensitive_privileged_value, self.sensitive_unprivileged_value,
            self.sensitive_threshold))
        if modes != 1:
            raise ConfigError(
                "set exactly one of sensitive_privileged_value, "
                "sensitive_unprivileged_value, sensitive_threshold")

    @property
    def label_column(self) -> str:
        return next(n for n, k in self.columns if k == LABEL)

    @property
    def sensitive_column(self) -> str:
        return next(n for n, k in self.columns if k == SENSITIVE)

    def to_json(self) -> dict:
        doc = {
            "columns": [[n, k] for n, k in self.columns],
            "favorable_label_value": self.favorable_label_value,
            "missing_tokens": self.missing_tokens,
            "delimiter": self.delimiter,
        }
        for key in ("sensitive_privileged_value", "sensitive_unprivileged_value",
                    "sensitive_threshold", "label_domain", "sensitive_domain"):
            value = getattr(self, key)
            if value is not None:
                doc[key] = value
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> FeatureSchema:
        try:
            columns = [(str(n), str(k)) for n, k in doc["columns"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad schema document: {exc}") from exc
        kwargs = {k: doc[k] for k in (
            "favorable_label_value", "sensitive_privileged_value",
            "sensitive_unprivileged_value", "sensitive_threshold",
            "missing_tokens", "label_domain", "sensitive_domain", "delimiter")
            if k in doc}
        return cls(columns=columns, **kwargs)

    @classmethod
    def from_file(cls, path) -> FeatureSchema:
        try:
            with open(path, "r", encoding="utf-8") as f:
                return cls.from_json(json.load(f))
        except OSError as exc:
            raise InputError(f"cannot read schema file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"schema file {path} is not valid JSON: {exc}") from exc


class Dataset:
    """Encoded instances: feature matrix ``X``, labels ``y``, groups ``s``."""

    def __init__(self, X, y, s, feature_names, sensitive_name: str = ""):
        self.X = np.ascontiguousarray(X, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.uint8)
        self.s = np.asarray(s, dtype=np.uint8)
        self.feature_names = list(feature_names)
        self.sensitive_name = sensitive_name
        n = self.X.shape[0] if self.X.ndim == 2 else 0
        if self.X.ndim != 2 or len(self.y) != n or len(self.s) != n:
            raise InputError("X, y, s must have one row per instance")
        if self.X.shape[1] != len(self.feature_names):
            raise InputError(
                f"{len(self.feature_names)} feature names for "
                f"{self.X.shape[1]} feature columns")

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def n_s1(self) -> int:
        return int(np.count_nonzero(self.s == 1))

    @property
    def n_s0(self) -> int:
        return int(np.count_nonzero(self.s == 0))

    @property
    def instances(self):
        """Iterate (features, y, s) tuples."""
        for i in range(len(self)):
            yield self.X[i], int(self.y[i]), int(self.s[i])

    def subset(self, indices) -> Dataset:
        idx = np.asarray(indices)
        return Dataset(self.X[idx], self.y[idx], self.s[idx], self.feature_names,
                       self.sensitive_name)


def _parse_float(token, column, row_no):
    try:
        return float(token)
    except ValueError:
        raise ParseError(
            f"row {row_no}: non-numeric value {token!r} in numeric column "
            f"{column!r}") from None


def load_csv(path, schema: FeatureSchema) -> Dataset:
    """Load and encode a CSV file according to ``schema``.

    The header must contain every schema column (extra file columns are
    ignored; with duplicate headers the first occurrence wins). Rows
    containing a missing token in any schema column are dropped. Row
    numbers in errors are 1-based file lines (header is line 1).
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            reader = csv.reader(f, delimiter=schema.delimiter)
            rows = list(reader)
    except OSError as exc:
        raise InputError(f"cannot read data file {path}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path}: empty file, expected a header row")

    header = [h.strip() for h in rows[0]]
    positions = {}
    for i, name in enumerate(header):
        positions.setdefault(name, i)
    for name, _ in schema.columns:
        if name not in positions:
            raise ParseError(f"unknown column {name!r}: not in header {header}")

    missing = set(schema.missing_tokens)
    label_col = schema.label_column
    sensitive_col = schema.sensitive_column

    kept = []
    for row_no, raw in enumerate(rows[1:], start=2):
        if not raw or all(not cell.strip() for cell in raw):
            continue
        if len(raw) < len(header):
            raise ParseError(
                f"row {row_no}: {len(raw)} fields, header has {len(header)}")
        cells = {}
        drop = False
        for name, _ in schema.columns:
            token = raw[positions[name]].strip()
            if token in missing:
                drop = True
                break
            cells[name] = token
        if not drop:
            kept.append((row_no, cells))

    # category universe in first-seen order over kept rows
    categories: dict[str, list[str]] = {
        name: [] for name, kind in schema.columns if kind == CATEGORICAL}
    for _, cells in kept:
        for name in categories:
            token = cells[name]
            if token not in categories[name]:
                categories[name].append(token)

    feature_names: list[str] = []
    for name, kind in schema.columns:
        if kind == NUMERIC:
            feature_names.append(name)
        elif kind == CATEGORICAL:
            feature_names.extend(f"{name}={cat}" for cat in categories[name])
        elif kind == SENSITIVE:
            feature_names.append(name)

    n, width = len(kept), len(feature_names)
    X = np.zeros((n, width), dtype=np.float64)
    y = np.zeros(n, dtype=np.uint8)
    s = np.zeros(n, dtype=np.uint8)

    for i, (row_no, cells) in enumerate(kept):
        j = 0
        for name, kind in schema.columns:
            token = cells[name]
            if kind == NUMERIC:
                X[i, j] = _parse_float(token, name, row_no)
                j += 1
            elif kind == CATEGORICAL:
                cats = categories[name]
                X[i, j + cats.index(token)] = 1.0
                j += len(cats)
            elif kind == SENSITIVE:
                if schema.sensitive_domain is not None and token not in schema.sensitive_domain:
                    raise ParseError(
                        f"row {row_no}: sensitive value {token!r} outside "
                        f"declared domain {schema.sensitive_domain}")
                if schema.sensitive_threshold is not None:
                    value = _parse_float(token, name, row_no)
                    s[i] = 1 if value >= schema.sensitive_threshold else 0
                elif schema.sensitive_privileged_value is not None:
                    s[i] = 1 if token == schema.sensitive_privileged_value else 0
                else:
                    s[i] = 0 if token == schema.sensitive_unprivileged_value else 1
                X[i, j] = float(s[i])
                j += 1
            else:  # label
                if schema.label_domain is not None and token not in schema.label_domain:
                    raise ParseError(
                        f"row {row_no}: label value {token!r} outside "
                        f"declared domain {schema.label_domain}")
                y[i] = 1 if token == schema.favorable_label_value else 0

    return Dataset(X, y, s, feature_names, sensitive_name=sensitive_col)


def split(dataset: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Deterministic shuffled train/test partition.

    The test size is ``round(n * test_fraction)`` with halves rounded up;
    the test part takes the first positions of the seeded permutation.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError(f"test fraction {test_fraction} not in (0, 1)")
    n = len(dataset)
    n_test = int(np.floor(n * test_fraction + 0.5))
    order = np.random.default_rng(seed).permutation(n)
    return dataset.subset(order[n_test:]), dataset.subset(order[:n_test])


def builtin_schema(name: str) -> FeatureSchema:
    """Schema shipped with the package: 'adult', 'compas' or 'bank'."""
    if name not in BUILTIN_SCHEMAS:
        raise ConfigError(f"unknown builtin schema {name!r}, have {BUILTIN_SCHEMAS}")
    text = resources.files("fairforest").joinpath(f"schemas/{name}.json").read_text()
    return FeatureSchema.from_json(json.loads(text))


def resolve_schema(spec: str) -> FeatureSchema:
    """Accept a builtin schema name or a path to a schema JSON file."""
    if spec in BUILTIN_SCHEMAS:
        return builtin_schema(spec)
    return FeatureSchema.from_file(spec)
