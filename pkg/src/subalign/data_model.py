"""Labels, feature schemas and CSV ingestion for frame-level and featurized data."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

GROUP_MODALITY = {
    "MFCC": "audio",
    "eGeMAPs": "audio",
    "FAU": "visual",
    "gaze": "visual",
    "pose": "visual",
}
GROUPS = tuple(GROUP_MODALITY)
AUDIO_GROUPS = frozenset(g for g, m in GROUP_MODALITY.items() if m == "audio")
VISUAL_GROUPS = frozenset(g for g, m in GROUP_MODALITY.items() if m == "visual")

COLUMN_SEP = "__"
UNLABELED = "unlabeled"


class DataError(ValueError):
    """Malformed or inconsistent input data."""


class Label(enum.Enum):
    TRUTHFUL = "truthful"
    DECEPTIVE = "deceptive"

    @classmethod
    def parse(cls, token: str) -> Label:
        try:
            return cls(token.strip())
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise DataError(f"invalid label {token!r}; valid labels: {valid}") from None

    @property
    def positive(self) -> bool:
        return self is Label.DECEPTIVE


def labels_to_array(labels: Iterable[Label]) -> np.ndarray:
    """Encode labels as int8 with deceptive = 1."""
    return np.array([lab is Label.DECEPTIVE for lab in labels], dtype=np.int8)


def array_to_labels(y: Iterable[int]) -> tuple[Label, ...]:
    return tuple(Label.DECEPTIVE if v else Label.TRUTHFUL for v in y)


@dataclass(frozen=True)
class Feature:
    name: str
    modality: str
    group: str


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[Feature, ...]

    def __post_init__(self):
        seen = set()
        for f in self.features:
            if f.name in seen:
                raise DataError(f"duplicate feature name {f.name}")
            seen.add(f.name)
            if COLUMN_SEP in f.name:
                raise DataError(f"feature name {f.name!r} may not contain {COLUMN_SEP!r}")
            if GROUP_MODALITY.get(f.group) != f.modality:
                raise DataError(
                    f"feature {f.name}: group {f.group!r} does not belong to modality {f.modality!r}"
                )

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    @property
    def groups(self) -> frozenset[str]:
        return frozenset(f.group for f in self.features)

    def group_of(self, name: str) -> str:
        for f in self.features:
            if f.name == name:
                return f.group
        raise DataError(f"feature {name} not in schema")

    def __len__(self) -> int:
        return len(self.features)


def load_schema(path: str | Path) -> FeatureSchema:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["name", "modality", "group"]:
            raise DataError(f"{path}: schema header must be name,modality,group")
        feats = [Feature(r["name"], r["modality"], r["group"]) for r in reader]
    return FeatureSchema(tuple(feats))


def reference_schema() -> FeatureSchema:
    """The 89-feature audio-visual schema (58 audio, 31 visual)."""
    ref = resources.files("subalign") / "data" / "reference_schema.csv"
    with resources.as_file(ref) as p:
        return load_schema(p)


def write_schema(schema: FeatureSchema, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "modality", "group"])
        for f in schema.features:
            w.writerow([f.name, f.modality, f.group])


@dataclass(frozen=True)
class FrameSeries:
    video_id: str
    feature_name: str
    values: np.ndarray

    def __post_init__(self):
        if len(self.values) < 1:
            raise DataError(f"{self.video_id}/{self.feature_name}: empty series")
        if not np.all(np.isfinite(self.values)):
            raise DataError(f"{self.video_id}/{self.feature_name}: non-finite values")


@dataclass(frozen=True)
class ManifestEntry:
    video_id: str
    label: Label | None
    path: Path


@dataclass(frozen=True)
class Manifest:
    entries: tuple[ManifestEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)


def load_manifest(path: str | Path) -> Manifest:
    """Parse a `video_id,label,path` manifest; relative paths resolve against its directory."""
    path = Path(path)
    base = path.parent
    entries = []
    seen = set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["video_id", "label", "path"]:
            raise DataError(f"{path}: manifest header must be video_id,label,path")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3 or not row[0].strip() or not row[2].strip():
                raise DataError(f"{path}: malformed row {lineno}: {row!r}")
            vid, tok, p = (c.strip() for c in row)
            if vid in seen:
                raise DataError(f"duplicate video_id {vid}")
            seen.add(vid)
            try:
                label = None if tok == UNLABELED else Label.parse(tok)
            except DataError as e:
                raise DataError(f"{path}: row {lineno}: {e}; or {UNLABELED}") from None
            entries.append(ManifestEntry(vid, label, base / p))
    return Manifest(tuple(entries))


def load_frame_csv(path: str | Path, schema: FeatureSchema, video_id: str = "") -> list[FrameSeries]:
    """Read one video's frame-level CSV into one series per schema feature."""
    path = Path(path)
    video_id = video_id or path.stem
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "frame":
            raise DataError(f"{path}: first column must be 'frame'")
        index = {name: i for i, name in enumerate(header)}
        for name in schema.names:
            if name not in index:
                raise DataError(f"{path}: missing feature {name}")
        cols = [index[name] for name in schema.names]
        rows = []
        for rowno, row in enumerate(reader, start=1):
            vals = []
            for c, name in zip(cols, schema.names):
                try:
                    v = float(row[c])
                except (ValueError, IndexError):
                    raise DataError(f"{path}: row {rowno}, column {name}: not a number") from None
                if not math.isfinite(v):
                    raise DataError(f"{path}: row {rowno}, column {name}: non-finite value {row[c]!r}")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no frames")
    data = np.array(rows, dtype=float)
    return [FrameSeries(video_id, name, data[:, j]) for j, name in enumerate(schema.names)]


def write_frame_csv(path: str | Path, names: Sequence[str], values: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", *names])
        for i, row in enumerate(values):
            w.writerow([i, *map(repr, map(float, row))])


def split_column(column: str) -> tuple[str, str]:
    feature, sep, attr = column.rpartition(COLUMN_SEP)
    if not sep or not feature or not attr:
        raise DataError(f"column {column!r} is not formatted <feature>{COLUMN_SEP}<attribute>")
    return feature, attr


@dataclass(frozen=True)
class FeatureMatrix:
    video_ids: tuple[str, ...]
    column_names: tuple[str, ...]
    X: np.ndarray
    labels: tuple[Label, ...] | None = None
    domain_tag: str = "source"
    _y: np.ndarray | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2:
            raise DataError("X must be two-dimensional")
        if X.shape != (len(self.video_ids), len(self.column_names)):
            raise DataError(
                f"X has shape {X.shape}, expected ({len(self.video_ids)}, {len(self.column_names)})"
            )
        if len(set(self.video_ids)) != len(self.video_ids):
            raise DataError("video_ids must be unique")
        if len(set(self.column_names)) != len(self.column_names):
            raise DataError("column names must be unique")
        for c in self.column_names:
            split_column(c)
        if not np.all(np.isfinite(X)):
            raise DataError("feature matrix contains non-finite entries")
        if self.labels is not None and len(self.labels) != len(self.video_ids):
            raise DataError("labels do not align with rows")
        if self.domain_tag not in ("source", "target"):
            raise DataError(f"domain_tag must be source or target, got {self.domain_tag!r}")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "video_ids", tuple(self.video_ids))
        object.__setattr__(self, "column_names", tuple(self.column_names))
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
            y = labels_to_array(self.labels)
            y.setflags(write=False)
            object.__setattr__(self, "_y", y)

    @property
    def y(self) -> np.ndarray:
        """Labels as a 0/1 array (1 = deceptive)."""
        if self._y is None:
            raise DataError(f"{self.domain_tag} matrix has no labels")
        return self._y

    @property
    def n_rows(self) -> int:
        return len(self.video_ids)

    @property
    def features(self) -> tuple[str, ...]:
        """Source feature of each column, in column order."""
        return tuple(split_column(c)[0] for c in self.column_names)

    def without_labels(self) -> FeatureMatrix:
        return FeatureMatrix(self.video_ids, self.column_names, self.X, None, self.domain_tag)

    def take_columns(self, idx: Sequence[int]) -> FeatureMatrix:
        idx = list(idx)
        return FeatureMatrix(
            self.video_ids,
            tuple(self.column_names[i] for i in idx),
            self.X[:, idx],
            self.labels,
            self.domain_tag,
        )

    def __eq__(self, other):
        if not isinstance(other, FeatureMatrix):
            return NotImplemented
        return (
            self.video_ids == other.video_ids
            and self.column_names == other.column_names
            and self.labels == other.labels
            and self.domain_tag == other.domain_tag
            and np.array_equal(self.X, other.X)
        )

    __hash__ = None


def select_columns(
    m: FeatureMatrix, groups: Iterable[str], schema: FeatureSchema | None = None
) -> FeatureMatrix:
    """Restrict `m` to columns whose source feature belongs to one of `groups`."""
    groups = frozenset(groups)
    if not groups:
        raise DataError("at least one feature group is required")
    schema = schema if schema is not None else reference_schema()
    unknown = groups - schema.groups
    if unknown:
        raise DataError(f"unknown feature group(s) for this schema: {', '.join(sorted(unknown))}")
    group_of = {f.name: f.group for f in schema.features}
    idx = []
    for i, feat in enumerate(m.features):
        if feat not in group_of:
            raise DataError(f"column {m.column_names[i]} refers to feature {feat} outside the schema")
        if group_of[feat] in groups:
            idx.append(i)
    if not idx:
        raise DataError(f"no columns for groups {sorted(groups)}")
    return m.take_columns(idx)


def write_featurized_csv(m: FeatureMatrix, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["video_id", "label", *m.column_names])
        labels = m.labels if m.labels is not None else (None,) * m.n_rows
        for vid, lab, row in zip(m.video_ids, labels, m.X):
            w.writerow([vid, lab.value if lab else UNLABELED, *(repr(float(v)) for v in row)])


def load_featurized_csv(path: str | Path, domain_tag: str = "source") -> FeatureMatrix:
    """Load a featurized CSV; labels are kept only if every row is labeled."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["video_id", "label"]:
            raise DataError(f"{path}: header must start with video_id,label")
        columns = header[2:]
        ids, toks, rows = [], [], []
        for rowno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}: malformed row {rowno}")
            ids.append(row[0])
            toks.append(row[1])
            try:
                rows.append([float(v) for v in row[2:]])
            except ValueError:
                raise DataError(f"{path}: row {rowno}: non-numeric value") from None
    if not ids:
        raise DataError(f"{path}: no rows")
    if all(t == UNLABELED for t in toks):
        labels = None
    elif any(t == UNLABELED for t in toks):
        raise DataError(f"{path}: mixture of labeled and unlabeled rows")
    else:
        labels = tuple(Label.parse(t) for t in toks)
    X = np.array(rows, dtype=float).reshape(len(ids), len(columns))
    return FeatureMatrix(tuple(ids), tuple(columns), X, labels, domain_tag)
