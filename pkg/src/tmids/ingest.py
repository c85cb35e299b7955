"""Loading CICIoMT2024-style CSVs and assembling the three scenarios."""

from __future__ import annotations

import fnmatch
import logging
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from .exceptions import DataError, SchemaError, UsageError
from .preprocess import FlowTable

log = logging.getLogger(__name__)


def normalize_name(name) -> str:
    return re.sub(r"[\s\-_]+", "_", str(name).strip()).lower()


@dataclass(frozen=True)
class ScenarioSpec:
    id: str
    features: tuple
    classes: tuple
    aliases: dict = field(default_factory=dict)
    ignore_columns: tuple = ()
    train_files: tuple = ()
    test_files: tuple = ()
    file_labels: tuple = ()
    label_columns: tuple = ("label",)
    label_aliases: dict = field(default_factory=dict)
    sources: dict = field(default_factory=dict)
    positive_class: str | None = None

    @property
    def class_map(self):
        return {c: i for i, c in enumerate(self.classes)}

    @property
    def n_features(self):
        return len(self.features)


def common_features(a, b) -> list:
    """Order-preserving intersection of two feature lists (order of ``a``)."""
    fa = a.features if isinstance(a, ScenarioSpec) else list(a)
    fb = b.features if isinstance(b, ScenarioSpec) else list(b)
    keys = {normalize_name(f) for f in fb}
    out = [f for f in fa if normalize_name(f) in keys]
    if not out:
        raise SchemaError("feature lists have no names in common")
    return out


def load_manifest(path=None) -> dict:
    """Parse a scenario manifest into ``{id: ScenarioSpec}``.

    Scenarios with an ``intersect`` entry get their feature list from the
    named scenarios rather than from the file.
    """
    if path is None:
        text = resources.files("tmids").joinpath("data/scenarios.yaml").read_text()
    else:
        text = Path(path).read_text()
    raw = yaml.safe_load(text)
    label_columns = tuple(raw.get("label_columns", ["label"]))
    label_aliases = {normalize_name(k): v for k, v in raw.get("label_aliases", {}).items()}
    specs = {}
    pending = {}
    for sid, body in raw["scenarios"].items():
        if "intersect" in body:
            pending[sid] = body
            continue
        specs[sid] = ScenarioSpec(
            id=sid,
            features=tuple(body["features"]),
            classes=tuple(body["classes"]),
            aliases={normalize_name(k): v for k, v in (body.get("aliases") or {}).items()},
            ignore_columns=tuple(body.get("ignore_columns") or ()),
            train_files=tuple(body.get("train_files") or ()),
            test_files=tuple(body.get("test_files") or ()),
            file_labels=tuple((r["pattern"], r["label"]) for r in body.get("file_labels") or ()),
            label_columns=label_columns,
            label_aliases=label_aliases,
            positive_class=body.get("positive_class"),
        )
    for sid, body in pending.items():
        parts = [specs[p] for p in body["intersect"]]
        feats = parts[0].features
        for p in parts[1:]:
            feats = tuple(common_features(feats, p))
        specs[sid] = ScenarioSpec(
            id=sid,
            features=feats,
            classes=tuple(body["classes"]),
            label_columns=label_columns,
            label_aliases=label_aliases,
            sources={k: dict((v or {}).get("relabel") or {}) for k, v in body["sources"].items()},
        )
    return specs


def get_scenario(sid, manifest=None) -> ScenarioSpec:
    specs = manifest if isinstance(manifest, dict) else load_manifest(manifest)
    try:
        return specs[sid]
    except KeyError:
        raise UsageError(f"unknown scenario {sid!r}; known: {sorted(specs)}") from None


# -- CSV loading ---------------------------------------------------------------


def _canonical_label(value, spec: ScenarioSpec):
    key = normalize_name(value)
    name = spec.label_aliases.get(key, str(value).strip())
    lookup = {normalize_name(c): c for c in spec.classes}
    return lookup.get(normalize_name(name))


def label_from_filename(path, spec: ScenarioSpec):
    stem = Path(path).name.lower()
    for pattern, label in spec.file_labels:
        if re.search(pattern, stem):
            return label
    return None


def load_csv(path, spec: ScenarioSpec, label=None) -> FlowTable:
    """Read one CSV and validate it against ``spec``.

    Columns are renamed and reordered to the scenario's canonical feature order.
    Non-numeric cells become NaN so :func:`~tmids.preprocess.clean` drops
    the row. Without a label column the label comes from ``label`` or the
    file name.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: file not found")
    df = pd.read_csv(path, low_memory=False, float_precision="round_trip")
    wanted = {normalize_name(f): f for f in spec.features}
    ignore = {normalize_name(c) for c in spec.ignore_columns}
    label_keys = {normalize_name(c) for c in spec.label_columns}
    rename, extra, label_col = {}, [], None
    for col in df.columns:
        key = normalize_name(col)
        key = normalize_name(spec.aliases.get(key, key))
        if key in wanted:
            if wanted[key] in rename.values():
                raise SchemaError(f"{path}: column {wanted[key]!r} appears twice")
            rename[col] = wanted[key]
        elif key in label_keys and label_col is None:
            label_col = col
        elif key not in ignore:
            extra.append(str(col))
    missing = [f for f in spec.features if f not in rename.values()]
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"missing columns {missing}")
        if extra:
            parts.append(f"unexpected columns {extra}")
        raise SchemaError(f"{path}: {'; '.join(parts)}", missing=missing, extra=extra)

    values = df[list(rename)].rename(columns=rename)[list(spec.features)]
    values = values.apply(pd.to_numeric, errors="coerce")
    if label_col is not None:
        raw_labels = df[label_col].astype(str).to_numpy()
    else:
        label = label or label_from_filename(path, spec)
        if label is None:
            raise DataError(f"{path}: no label column and no label can be inferred from the name")
        raw_labels = np.full(len(df), label, dtype=object)

    mapped = {}
    for v in pd.unique(raw_labels):
        canon = _canonical_label(v, spec)
        if canon is None:
            raise DataError(f"{path}: unknown label {v!r} for scenario {spec.id}")
        mapped[v] = canon
    labels = np.array([mapped[v] for v in raw_labels], dtype=object)
    table = FlowTable(list(spec.features), values.to_numpy(dtype=np.float64), labels, spec.id)
    table.stats = {"source": str(path), "rows": len(table)}
    return table


def stratified_subsample(table: FlowTable, fraction, rng) -> FlowTable:
    """Keep ``round(fraction * n_c)`` rows of each class (half rounds up, at least 1)."""
    if not 0 < fraction <= 1:
        raise UsageError(f"subsample fraction must be in (0, 1], got {fraction}")
    if fraction == 1:
        return table
    rng = np.random.default_rng(rng)
    keep = []
    labels = table.labels.astype(str)
    for cls in sorted(set(labels)):
        idx = np.flatnonzero(labels == cls)
        k = max(1, int(np.floor(fraction * len(idx) + 0.5)))
        keep.append(np.sort(rng.choice(idx, size=k, replace=False)))
    return table.take(np.sort(np.concatenate(keep)))


def concat_tables(tables, scenario="") -> FlowTable:
    if not tables:
        raise DataError("no tables to combine")
    cols = tables[0].columns
    return FlowTable(
        list(cols),
        np.concatenate([t.values for t in tables]),
        np.concatenate([t.labels for t in tables]),
        scenario,
    )


def discover_files(spec: ScenarioSpec, root, manifest=None) -> dict:
    """Find train/test CSVs under ``root`` using the scenario's file globs.

    For an intersection scenario the result is keyed by source scenario.
    """
    root = Path(root)
    if spec.sources:
        specs = manifest if isinstance(manifest, dict) else load_manifest(manifest)
        return {sid: discover_files(specs[sid], root) for sid in spec.sources}
    rel = sorted(str(p.relative_to(root)) for p in root.rglob("*.csv"))
    out = {}
    for split, globs in (("train", spec.train_files), ("test", spec.test_files)):
        hits = [r for r in rel if any(fnmatch.fnmatch(r.lower(), g.lower()) for g in globs)]
        out[split] = [root / r for r in hits]
    return out


def _load_split(spec, paths, columns, relabel, fraction, seed, offset):
    tables = []
    for i, p in enumerate(paths):
        t = load_csv(p, spec)
        if fraction is not None:
            t = stratified_subsample(t, fraction, np.random.SeedSequence([seed, offset + i]))
        if columns is not None:
            pos = [t.columns.index(c) for c in columns]
            t = FlowTable(list(columns), t.values[:, pos], t.labels, t.scenario)
        if relabel:
            t.labels = np.array([relabel.get(v, v) for v in t.labels], dtype=object)
        tables.append(t)
    return tables


def assemble_scenario(spec: ScenarioSpec, files, subsample=None, seed=0, manifest=None):
    """Load a scenario's train and test tables.

    ``files`` is ``{"train": [...], "test": [...]}`` or, for an
    intersection scenario, ``{source_id: {"train": [...], "test": [...]}}``.
    ``subsample`` keeps that fraction of every class in every file.

    Returns ``(train, test, class_map)``. Tables are not cleaned; their
    ``stats["counts"]`` hold the per-class counts as loaded.
    """
    if spec.sources:
        specs = manifest if isinstance(manifest, dict) else load_manifest(manifest)
        parts = {"train": [], "test": []}
        for n, (sid, relabel) in enumerate(spec.sources.items()):
            if sid not in files:
                raise UsageError(f"scenario {spec.id} needs files for source {sid}")
            for split in parts:
                parts[split] += _load_split(
                    specs[sid], files[sid].get(split, []), spec.features, relabel,
                    subsample, seed, 100_000 * n + (0 if split == "train" else 50_000),
                )
    else:
        parts = {
            split: _load_split(spec, files.get(split, []), None, None, subsample, seed,
                               0 if split == "train" else 50_000)
            for split in ("train", "test")
        }
    out = []
    for split in ("train", "test"):
        if not parts[split]:
            raise DataError(f"scenario {spec.id}: no {split} files")
        table = concat_tables(parts[split], spec.id)
        unknown = set(table.labels.tolist()) - set(spec.classes)
        if unknown:
            raise DataError(f"scenario {spec.id}: unknown label {sorted(unknown)[0]!r}")
        table.stats = {"counts": {c: int((table.labels == c).sum()) for c in spec.classes}}
        log.info("%s %s rows per class: %s", spec.id, split, table.stats["counts"])
        out.append(table)
    return out[0], out[1], spec.class_map


def encode_labels(table: FlowTable, class_map) -> np.ndarray:
    try:
        return np.array([class_map[v] for v in table.labels], dtype=np.int64)
    except KeyError as exc:
        raise DataError(f"unknown label {exc.args[0]!r}") from None


def read_features(path, feature_names, label_columns=("label",)):
    """Pull ``feature_names`` out of a CSV by normalized header match.

    Returns ``(values, labels_or_None)``. Used at prediction time, where
    the model's own feature list is the schema.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: file not found")
    df = pd.read_csv(path, low_memory=False, float_precision="round_trip")
    by_key = {normalize_name(c): c for c in df.columns}
    missing = [f for f in feature_names if normalize_name(f) not in by_key]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing}", missing=missing)
    cols = [by_key[normalize_name(f)] for f in feature_names]
    values = df[cols].apply(pd.to_numeric, errors="coerce").to_numpy(dtype=np.float64)
    labels = None
    for lc in label_columns:
        if normalize_name(lc) in by_key:
            labels = df[by_key[normalize_name(lc)]].astype(str).to_numpy(dtype=object)
            break
    return values, labels
