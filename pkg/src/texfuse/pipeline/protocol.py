"""Train/evaluate on one split, and aggregate repeats."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..classify import cross_validate_c, fuse_features, predict, train_linear_svm_ovr
from .manifest import DatasetManifest
from .splits import Split, assert_disjoint


@dataclass(frozen=True, eq=False)
class EvalReport:
    """Outcome of one split. ``confusion[i, j]`` counts true class ``i``
    predicted as ``j``."""

    classes: tuple
    confusion: np.ndarray
    C: float | None = None
    split_index: int = 0

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.confusion) / self.total) if self.total else 0.0

    @property
    def mca(self) -> float:
        return mean_class_accuracy(self.confusion)

    def to_json(self) -> dict:
        return {"split": self.split_index, "classes": list(self.classes), "C": self.C,
                "accuracy": self.accuracy, "mca": self.mca, "confusion": self.confusion.tolist()}

    @classmethod
    def from_json(cls, d: dict) -> "EvalReport":
        return cls(tuple(d["classes"]), np.asarray(d["confusion"], dtype=np.int64), d.get("C"), int(d.get("split", 0)))


def mean_class_accuracy(confusion) -> float:
    """Mean per-class recall over classes that have test samples."""
    M = np.asarray(confusion, dtype=np.float64)
    support = M.sum(axis=1)
    present = support > 0
    if not present.any():
        return 0.0
    return float(np.mean(np.diag(M)[present] / support[present]))


def confusion_matrix(classes, y_true, y_pred) -> np.ndarray:
    pos = {c: i for i, c in enumerate(classes)}
    M = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        M[pos[t], pos[p]] += 1
    return M


def report_from_predictions(classes, y_true, y_pred, C=None, split_index: int = 0) -> EvalReport:
    return EvalReport(tuple(classes), confusion_matrix(classes, y_true, y_pred), C, split_index)


def split_rows(manifest: DatasetManifest, split: Split):
    """``(train_entries, test_entries)`` in manifest order."""
    assert_disjoint(split)
    return manifest.select(split.train), manifest.select(split.test)


def run_train_eval(manifest: DatasetManifest, split: Split, caches, C="auto",
                   seed: int = 0, weights=None, split_index: int = 0) -> EvalReport:
    """Fuse the cached rows of each feature kind, fit the OvR SVM on the
    training specimens and score the test specimens."""
    caches = list(caches)
    if not caches:
        raise ValueError("at least one feature cache is required")
    train, test = split_rows(manifest, split)
    if not train or not test:
        raise ValueError("split leaves the train or test side empty")

    def rows(entries):
        images = [e.image for e in entries]
        return fuse_features([c.matrix(images) for c in caches], weights)

    Xtr, Xte = rows(train), rows(test)
    ytr = np.array([e.label for e in train])
    if C == "auto":
        C = cross_validate_c(Xtr, ytr, [e.specimen for e in train], seed=seed)
    model = train_linear_svm_ovr(Xtr, ytr, float(C), seed)
    pred = predict(model, Xte)
    return report_from_predictions(manifest.classes, [e.label for e in test], pred.tolist(), float(C), split_index)


@dataclass(frozen=True, eq=False)
class Summary:
    classes: tuple
    accuracies: tuple
    mcas: tuple
    confusion: np.ndarray
    extra: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.accuracies)

    @staticmethod
    def _std(v) -> float:
        return float(np.std(v, ddof=1)) if len(v) > 1 else 0.0

    @property
    def accuracy_mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def accuracy_std(self) -> float:
        return self._std(self.accuracies)

    @property
    def mca_mean(self) -> float:
        return float(np.mean(self.mcas))

    @property
    def mca_std(self) -> float:
        return self._std(self.mcas)

    @property
    def percent(self) -> np.ndarray:
        """Row-normalised summed confusion in percent (empty rows stay zero)."""
        M = self.confusion.astype(np.float64)
        s = M.sum(axis=1, keepdims=True)
        return np.divide(100.0 * M, s, out=np.zeros_like(M), where=s > 0)

    @property
    def pooled_accuracy(self) -> float:
        return float(np.trace(self.confusion) / self.confusion.sum())

    @property
    def pooled_mca(self) -> float:
        return mean_class_accuracy(self.confusion)

    def to_json(self) -> dict:
        return {"classes": list(self.classes), "n": self.n,
                "accuracy_mean": self.accuracy_mean, "accuracy_std": self.accuracy_std,
                "mca_mean": self.mca_mean, "mca_std": self.mca_std,
                "pooled_accuracy": self.pooled_accuracy, "pooled_mca": self.pooled_mca,
                "confusion": self.confusion.tolist(), "percent": self.percent.tolist(), **self.extra}


def aggregate_reports(reports) -> Summary:
    """Mean and sample standard deviation of accuracy and MCA, plus the
    summed confusion matrix. Reports are ordered by split index first."""
    reports = sorted(reports, key=lambda r: r.split_index)
    if not reports:
        raise ValueError("no reports to aggregate")
    classes = reports[0].classes
    if any(r.classes != classes for r in reports):
        raise ValueError("reports disagree on the class set")
    total = sum((r.confusion for r in reports), np.zeros_like(reports[0].confusion))
    return Summary(classes, tuple(r.accuracy for r in reports), tuple(r.mca for r in reports), total)


def format_summary(summary: Summary, title: str = "") -> str:
    lines = []
    if title:
        lines.append(title)
    lines.append(f"splits: {summary.n}")
    lines.append(f"accuracy: {100 * summary.accuracy_mean:.1f} +- {100 * summary.accuracy_std:.1f} %")
    lines.append(f"MCA:      {100 * summary.mca_mean:.1f} +- {100 * summary.mca_std:.1f} %")
    width = max(6, max(len(str(c)) for c in summary.classes))
    head = " " * width + " | " + " ".join(f"{str(c)[:width]:>{width}}" for c in summary.classes)
    lines.append("confusion (% of true class):")
    lines.append(head)
    for c, row in zip(summary.classes, summary.percent):
        lines.append(f"{str(c):>{width}} | " + " ".join(f"{v:{width}.1f}" for v in row))
    return "\n".join(lines)
