"""Specimen-level train/test splits.

Setups A to D put a fixed number of specimens per class into training
(1, 2, 4, 8); from setup C on, the class with the fewest specimens only
contributes 2. Leave-one-specimen-out emits one split per specimen.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .manifest import DatasetManifest

SETUP_COUNTS = {"setup_a": 1, "setup_b": 2, "setup_c": 4, "setup_d": 8}
SMALL_CLASS_COUNTS = {"setup_a": 1, "setup_b": 2, "setup_c": 2, "setup_d": 2}
KINDS = tuple(SETUP_COUNTS) + ("loso", "custom")


class SplitError(ValueError):
    pass


class Split(NamedTuple):
    train: tuple
    test: tuple


@dataclass(frozen=True)
class SplitSpec:
    kind: str = "setup_d"
    seed: int = 0
    repeats: int = 10
    counts: dict = field(default_factory=dict)  # custom kind: class -> count

    def __post_init__(self):
        kind = normalize_kind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if kind == "custom" and not self.counts:
            raise ValueError("custom splits need per-class counts")


def normalize_kind(kind: str) -> str:
    k = kind.strip().lower()
    if k in ("a", "b", "c", "d"):
        k = "setup_" + k
    if k not in KINDS:
        raise ValueError(f"unknown split kind {kind!r}")
    return k


def _small_class(by_class: dict):
    sizes = {c: len(s) for c, s in by_class.items()}
    smallest = min(sizes.values())
    owners = [c for c, n in sizes.items() if n == smallest]
    return owners[0] if len(owners) == 1 else None


def per_class_counts(manifest: DatasetManifest, spec: SplitSpec) -> dict:
    by_class = manifest.specimens_by_class()
    if spec.kind == "custom":
        counts = {c: int(spec.counts.get(c, 0)) for c in by_class}
    else:
        counts = {c: SETUP_COUNTS[spec.kind] for c in by_class}
        small = _small_class(by_class)
        if small is not None:
            counts[small] = min(counts[small], SMALL_CLASS_COUNTS[spec.kind])
    for c, n in counts.items():
        have = len(by_class[c])
        if n < 1 or n >= have:
            raise SplitError(
                f"class {c!r}: {n} training specimens requested but {have} available "
                "(at least one must remain for testing)"
            )
    return counts


def assert_disjoint(split: Split) -> None:
    overlap = set(split.train) & set(split.test)
    if overlap:
        raise AssertionError(f"specimens in both train and test: {sorted(overlap)}")


def make_splits(manifest: DatasetManifest, spec: SplitSpec) -> list[Split]:
    specimens = manifest.specimens
    if spec.kind == "loso":
        if len(specimens) < 2:
            raise SplitError("leave-one-specimen-out needs at least two specimens")
        splits = [Split(tuple(s for s in specimens if s != held), (held,)) for held in specimens]
    else:
        counts = per_class_counts(manifest, spec)
        by_class = manifest.specimens_by_class()
        rng = np.random.default_rng(spec.seed)
        splits = []
        for _ in range(spec.repeats):
            train = []
            for c in manifest.classes:
                pool = by_class[c]
                picks = rng.choice(len(pool), size=counts[c], replace=False)
                train.extend(pool[i] for i in sorted(picks))
            chosen = set(train)
            splits.append(Split(tuple(sorted(train)), tuple(s for s in specimens if s not in chosen)))
    for s in splits:
        assert_disjoint(s)
    return splits
