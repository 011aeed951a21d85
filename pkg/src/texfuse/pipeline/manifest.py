"""JSON-lines dataset manifests.

One object per line::

    {"image": "s0/img_000.pgm", "cell": "c0", "specimen": "s0",
     "class": "grating", "intensity": "positive"}

An optional first line ``{"classes": [...]}`` declares the class set; without
it the set is whatever labels appear. Image paths are resolved relative to
the manifest file.
"""
from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

INTENSITIES = ("positive", "intermediate", "unknown")


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class ManifestEntry:
    image: str
    cell: str
    specimen: str
    label: str
    intensity: str = "unknown"

    def to_json(self) -> dict:
        return {"image": self.image, "cell": self.cell, "specimen": self.specimen,
                "class": self.label, "intensity": self.intensity}


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple
    classes: tuple
    root: Path = Path(".")

    def __len__(self):
        return len(self.entries)

    def path_of(self, entry: ManifestEntry) -> Path:
        p = Path(entry.image)
        return p if p.is_absolute() else self.root / p

    @property
    def specimens(self) -> list[str]:
        return sorted({e.specimen for e in self.entries})

    def specimens_by_class(self) -> dict:
        out = defaultdict(set)
        for e in self.entries:
            out[e.label].add(e.specimen)
        return {c: sorted(out[c]) for c in self.classes}

    def class_of_specimen(self) -> dict:
        return {e.specimen: e.label for e in self.entries}

    def select(self, specimens) -> list[ManifestEntry]:
        keep = set(specimens)
        return [e for e in self.entries if e.specimen in keep]


def _entry(obj, lineno: int) -> ManifestEntry:
    if not isinstance(obj, dict):
        raise ManifestError(f"line {lineno}: expected a JSON object")
    missing = [k for k in ("image", "specimen", "class") if k not in obj]
    if missing:
        raise ManifestError(f"line {lineno}: missing keys {missing}")
    image = str(obj["image"])
    specimen = str(obj["specimen"]).strip()
    label = str(obj["class"])
    cell = str(obj.get("cell", image))
    intensity = str(obj.get("intensity", "unknown"))
    if not image:
        raise ManifestError(f"line {lineno}: empty image path")
    if not specimen:
        raise ManifestError(f"line {lineno}: empty specimen id")
    if intensity not in INTENSITIES:
        raise ManifestError(f"line {lineno}: intensity must be one of {INTENSITIES}")
    return ManifestEntry(image, cell, specimen, label, intensity)


def build_manifest(entries, classes=None, root=".") -> DatasetManifest:
    """Validate entries and wrap them; see :func:`load_manifest` for the rules."""
    entries = tuple(entries)
    seen = set()
    owner = {}
    for e in entries:
        if e.image in seen:
            raise ManifestError(f"duplicate image path {e.image!r}")
        seen.add(e.image)
        if owner.setdefault(e.specimen, e.label) != e.label:
            raise ManifestError(f"specimen {e.specimen!r} carries more than one class")
    labels = sorted({e.label for e in entries})
    if classes is None:
        classes = labels
    else:
        classes = list(classes)
        if len(set(classes)) != len(classes):
            raise ManifestError("duplicate names in the declared class set")
        unknown = sorted(set(labels) - set(classes))
        if unknown:
            raise ManifestError(f"labels outside the declared class set: {unknown}")
    return DatasetManifest(entries, tuple(classes), Path(root))


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ManifestError(f"cannot read manifest: {exc}") from exc
    classes = None
    entries = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"line {lineno}: {exc.msg}") from exc
        if isinstance(obj, dict) and set(obj) == {"classes"}:
            if entries or classes is not None:
                raise ManifestError(f"line {lineno}: class header must come first")
            classes = [str(c) for c in obj["classes"]]
            continue
        entries.append(_entry(obj, lineno))
    if not entries:
        raise ManifestError("manifest has no entries")
    return build_manifest(entries, classes, path.parent)


def write_manifest(path, manifest: DatasetManifest) -> None:
    lines = [json.dumps({"classes": list(manifest.classes)})]
    lines += [json.dumps(e.to_json(), sort_keys=True) for e in manifest.entries]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
