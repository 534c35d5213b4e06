"""Vertex-level contact annotation records, dataset serialization, statistics.

A dataset is a directory with an ``index.json`` manifest (template reference,
vocabulary, splits, record ids) and one JSON annotation file per record under
``annotations/``. Images are referenced by relative path. The exact field
names are documented in ``dataset_schema.json`` shipped with the package.
"""

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1

# desk-scale default object vocabulary; real releases load theirs from file
DEFAULT_VOCABULARY = ("ground", "box", "ball", "chair", "table")


class DatasetError(ValueError):
    """Raised on schema violations or invalid annotation content."""


def _ids(vertex_ids):
    a = np.unique(np.asarray(vertex_ids, dtype=np.int64))
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class ContactRecord:
    """Per-image contact annotation.

    object_contacts holds (object_label, sorted unique vertex ids) per
    contacted object; scene_supported is the vertex set supported by the
    scene (ground, furniture, ...).
    """

    image_id: str
    image_path: str
    object_contacts: tuple = ()
    scene_supported: np.ndarray = field(default_factory=lambda: _ids([]))
    annotator_id: str = None
    feedback: str = None

    def __post_init__(self):
        contacts = tuple((str(label), _ids(ids)) for label, ids in self.object_contacts)
        object.__setattr__(self, "object_contacts", contacts)
        object.__setattr__(self, "scene_supported", _ids(self.scene_supported))

    def __eq__(self, other):
        if not isinstance(other, ContactRecord):
            return NotImplemented
        return (
            self.image_id == other.image_id
            and self.image_path == other.image_path
            and len(self.object_contacts) == len(other.object_contacts)
            and all(
                la == lb and np.array_equal(ia, ib)
                for (la, ia), (lb, ib) in zip(self.object_contacts, other.object_contacts)
            )
            and np.array_equal(self.scene_supported, other.scene_supported)
            and self.annotator_id == other.annotator_id
            and self.feedback == other.feedback
        )

    def validate(self, num_vertices, vocabulary=None):
        for label, ids in self.object_contacts:
            if vocabulary is not None and label not in vocabulary:
                raise DatasetError(f"{self.image_id}: label {label!r} not in vocabulary")
            if ids.size and (ids.min() < 0 or ids.max() >= num_vertices):
                raise DatasetError(f"{self.image_id}: vertex id out of range for {label!r}")
        ss = self.scene_supported
        if ss.size and (ss.min() < 0 or ss.max() >= num_vertices):
            raise DatasetError(f"{self.image_id}: scene_supported vertex id out of range")

    def labels(self):
        return [label for label, _ in self.object_contacts]


def binarize(record, num_vertices, mode="union", label=None):
    """Binary per-vertex contact vector from a record.

    mode 'union' merges all object sets and scene_supported; 'per-object'
    selects one object label; 'scene-only' selects scene_supported.
    """
    out = np.zeros(num_vertices, dtype=np.float64)
    if mode == "union":
        for _, ids in record.object_contacts:
            out[ids] = 1.0
        out[record.scene_supported] = 1.0
    elif mode == "per-object":
        for lab, ids in record.object_contacts:
            if lab == label:
                out[ids] = 1.0
                break
        else:
            raise DatasetError(f"record {record.image_id} has no object {label!r}")
    elif mode == "scene-only":
        out[record.scene_supported] = 1.0
    else:
        raise ValueError(f"unknown binarize mode {mode!r}")
    return out


@dataclass(frozen=True, eq=False)
class ContactDataset:
    """Immutable collection of ContactRecords plus split assignments."""

    records: tuple
    template_ref: str
    num_vertices: int
    vocabulary: tuple = DEFAULT_VOCABULARY
    splits: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "vocabulary", tuple(self.vocabulary))
        splits = {name: tuple(ids) for name, ids in self.splits.items()}
        object.__setattr__(self, "splits", splits)
        known = {r.image_id for r in self.records}
        if len(known) != len(self.records):
            raise DatasetError("duplicate image_id in records")
        seen = set()
        for name, ids in splits.items():
            for image_id in ids:
                if image_id not in known:
                    raise DatasetError(f"split {name!r} references unknown id {image_id!r}")
                if image_id in seen:
                    raise DatasetError(f"image id {image_id!r} appears in two splits")
                seen.add(image_id)
        for r in self.records:
            r.validate(self.num_vertices, self.vocabulary)

    def __eq__(self, other):
        if not isinstance(other, ContactDataset):
            return NotImplemented
        return (
            self.records == tuple(other.records)
            and self.template_ref == other.template_ref
            and self.num_vertices == other.num_vertices
            and self.vocabulary == other.vocabulary
            and self.splits == other.splits
        )

    def record(self, image_id):
        for r in self.records:
            if r.image_id == image_id:
                return r
        raise KeyError(image_id)

    def split_records(self, split):
        if split is None:
            return list(self.records)
        if split not in self.splits:
            raise KeyError(f"unknown split {split!r}")
        return [self.record(i) for i in self.splits[split]]


def aggregate_contact_probability(dataset, split=None):
    """Per-vertex mean of union-binarized records over a split."""
    records = dataset.split_records(split)
    if not records:
        raise DatasetError("cannot aggregate over an empty split")
    acc = np.zeros(dataset.num_vertices, dtype=np.float64)
    for r in records:
        acc += binarize(r, dataset.num_vertices)
    return acc / len(records)


def part_contact_histogram(dataset, mesh, min_vertices=10):
    """Images per part whose union contact hits the part in >= min_vertices."""
    if min_vertices < 1:
        raise ValueError("min_vertices must be >= 1")
    counts = np.zeros(mesh.num_parts, dtype=np.int64)
    for r in dataset.records:
        contact = binarize(r, dataset.num_vertices) > 0
        for part in range(mesh.num_parts):
            if contact[mesh.part_labels == part].sum() >= min_vertices:
                counts[part] += 1
    return counts


def object_label_histogram(dataset):
    """Number of records containing each object label at least once."""
    counts = {}
    for r in dataset.records:
        for label in set(r.labels()):
            counts[label] = counts.get(label, 0) + 1
    return counts


# ---------------------------------------------------------------------------
# serialization


def _record_to_json(record):
    out = {
        "image_id": record.image_id,
        "image_path": record.image_path,
        "object_contacts": [
            {"label": label, "vertex_ids": ids.tolist()} for label, ids in record.object_contacts
        ],
        "scene_supported": record.scene_supported.tolist(),
    }
    if record.annotator_id is not None:
        out["annotator_id"] = record.annotator_id
    if record.feedback is not None:
        out["feedback"] = record.feedback
    return out


def _record_from_json(payload):
    return ContactRecord(
        image_id=payload["image_id"],
        image_path=payload["image_path"],
        object_contacts=tuple(
            (c["label"], c["vertex_ids"]) for c in payload.get("object_contacts", [])
        ),
        scene_supported=payload.get("scene_supported", []),
        annotator_id=payload.get("annotator_id"),
        feedback=payload.get("feedback"),
    )


def save_dataset(dataset, path):
    """Write a dataset directory: index.json + annotations/<image_id>.json."""
    root = Path(path)
    (root / "annotations").mkdir(parents=True, exist_ok=True)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "template_ref": dataset.template_ref,
        "num_vertices": dataset.num_vertices,
        "vocabulary": list(dataset.vocabulary),
        "splits": {name: list(ids) for name, ids in sorted(dataset.splits.items())},
        "records": [r.image_id for r in dataset.records],
    }
    (root / "index.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    for r in dataset.records:
        out = root / "annotations" / f"{r.image_id}.json"
        out.write_text(json.dumps(_record_to_json(r), indent=2, sort_keys=True) + "\n")


def load_dataset(path):
    """Load and validate a dataset directory written by save_dataset."""
    root = Path(path)
    index_path = root / "index.json"
    if not index_path.exists():
        raise DatasetError(f"missing manifest: {index_path}")
    manifest = json.loads(index_path.read_text())
    version = manifest.get("schema_version")
    if version != SCHEMA_VERSION:
        raise DatasetError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    records = []
    for image_id in manifest["records"]:
        rec_path = root / "annotations" / f"{image_id}.json"
        if not rec_path.exists():
            raise DatasetError(f"missing annotation file for {image_id!r}")
        records.append(_record_from_json(json.loads(rec_path.read_text())))
    return ContactDataset(
        records=tuple(records),
        template_ref=manifest["template_ref"],
        num_vertices=int(manifest["num_vertices"]),
        vocabulary=tuple(manifest.get("vocabulary", DEFAULT_VOCABULARY)),
        splits=manifest.get("splits", {}),
    )


def with_records(dataset, records, splits=None):
    """New dataset with different records (datasets are immutable values)."""
    return replace(dataset, records=tuple(records), splits=splits or dataset.splits)
