"""Histogram normalisation, feature fusion, one-vs-rest linear SVM and C selection.

The SVM solves each binary class-vs-rest problem in the dual with coordinate
descent (L1 hinge loss, L2 regulariser, bias as an augmented constant
feature). Small problems run on the Gram matrix ``X X^T + 1``, which is
also what lets cross-validation reuse one kernel across all folds; larger
ones update the weight vector directly.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from . import kernels, tensorio

DEFAULT_C_GRID = (0.001, 0.01, 0.1, 1.0, 100.0, 1000.0)
GAP_TOL = 1e-3
MAX_EPOCHS = 1000
GRAM_MAX_ROWS = 3000


# --------------------------------------------------------------------------
# Normalisation and fusion
# --------------------------------------------------------------------------


def power_l2_normalize(H) -> np.ndarray:
    """Signed square root then L2 normalisation (along the last axis)."""
    h = np.asarray(H, dtype=np.float64)
    if not np.all(np.isfinite(h)):
        raise ValueError("non-finite entries")
    r = np.sign(h) * np.sqrt(np.abs(h))
    n = np.linalg.norm(r, axis=-1, keepdims=True)
    return np.divide(r, n, out=np.zeros_like(r), where=n > 0)


def _l2(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    return np.divide(v, n, out=np.zeros_like(v), where=n > 0)


def fuse_features(blocks, weights=None) -> np.ndarray:
    """Power-L2 each block, concatenate, L2 the result.

    Works on single vectors or on row-aligned matrices. ``weights`` scales
    each normalised block before the final L2 (default: equal weights).
    """
    blocks = [np.asarray(b, dtype=np.float64) for b in blocks]
    if not blocks:
        raise ValueError("nothing to fuse")
    if any(b.shape[-1] == 0 for b in blocks):
        raise ValueError("empty feature block")
    if weights is None:
        weights = [1.0] * len(blocks)
    if len(weights) != len(blocks):
        raise ValueError("one weight per block expected")
    parts = [w * power_l2_normalize(b) for b, w in zip(blocks, weights)]
    return _l2(np.concatenate(parts, axis=-1))


# --------------------------------------------------------------------------
# Chi-squared similarity
# --------------------------------------------------------------------------


def _check_hist(X, Y):
    x = np.asarray(X, dtype=np.float64)
    y = np.asarray(Y, dtype=np.float64)
    if x.shape[-1] != y.shape[-1]:
        raise ValueError(f"dimension mismatch: {x.shape[-1]} vs {y.shape[-1]}")
    if np.any(x < 0) or np.any(y < 0):
        raise ValueError("chi-squared similarity needs non-negative histograms")
    return x, y


def chi2_similarity(X, Y) -> float:
    """``sum 2 x y / (x + y)`` with empty bins contributing zero."""
    x, y = _check_hist(X, Y)
    if x.ndim != 1 or y.ndim != 1:
        raise ValueError("expected two vectors")
    s = x + y
    terms = np.divide(2.0 * x * y, s, out=np.zeros_like(s), where=s > 0)
    return float(terms.sum())


def chi2_kernel_matrix(A, B=None, chunk: int = 64) -> np.ndarray:
    """Pairwise chi-squared similarities between the rows of ``A`` and ``B``."""
    a = np.atleast_2d(np.asarray(A, dtype=np.float64))
    b = a if B is None else np.atleast_2d(np.asarray(B, dtype=np.float64))
    a, b = _check_hist(a, b)
    out = np.empty((a.shape[0], b.shape[0]))
    for s in range(0, a.shape[0], chunk):
        xa = a[s:s + chunk, None, :]
        den = xa + b[None, :, :]
        num = 2.0 * xa * b[None, :, :]
        out[s:s + chunk] = np.divide(num, den, out=np.zeros_like(den), where=den > 0).sum(axis=2)
    return out


def nn_chi2_predict(train_X, train_y, test_X) -> np.ndarray:
    """Label of the most chi-squared-similar training row (first one on ties)."""
    S = chi2_kernel_matrix(test_X, train_X)
    labels = np.asarray(train_y)
    return labels[np.argmax(S, axis=1)]


# --------------------------------------------------------------------------
# Linear SVM
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LinearSvmModel:
    classes: tuple
    W: np.ndarray  # (n_classes, D)
    b: np.ndarray  # (n_classes,)
    C: float

    @property
    def dim(self) -> int:
        return int(self.W.shape[1])

    def to_tfmd(self) -> bytes:
        labels = [c.item() if hasattr(c, "item") else c for c in self.classes]
        return tensorio.dumps({"W": self.W, "b": self.b}, {"kind": "linear_svm_ovr", "classes": labels, "C": self.C})

    @classmethod
    def from_tensors(cls, t: dict, meta: dict) -> "LinearSvmModel":
        return cls(tuple(meta["classes"]), t["W"], t["b"], float(meta["C"]))


def _row_keys(X: np.ndarray, y) -> list:
    return [(hashlib.sha1(row.tobytes()).digest(), str(lab)) for row, lab in zip(X, y)]


def canonical_order(X, y) -> np.ndarray:
    """Row permutation that depends only on row contents, so the fit does
    not depend on the order the samples arrive in."""
    keys = _row_keys(np.ascontiguousarray(X, dtype=np.float64), y)
    return np.array(sorted(range(len(keys)), key=keys.__getitem__), dtype=np.int64)


def _duality_gap(alpha, y, f, C) -> tuple[float, float]:
    ay = alpha * y
    wnorm = float(ay @ f)
    primal = 0.5 * wnorm + C * float(np.maximum(0.0, 1.0 - y * f).sum())
    dual = float(alpha.sum()) - 0.5 * wnorm
    return primal, dual


def _converged(primal, dual) -> bool:
    return primal - dual <= GAP_TOL * max(abs(primal), 1e-12)


def solve_dual_gram(K: np.ndarray, y: np.ndarray, C: float, seed: int = 0,
                    max_epochs: int = MAX_EPOCHS) -> tuple[np.ndarray, int]:
    """Dual coordinate descent on a kernel matrix that already includes the
    bias term. Returns ``(alpha, epochs)``; ``sum alpha_i y_i K[:, i]`` is
    the decision function on the training rows."""
    n = K.shape[0]
    K = np.ascontiguousarray(K, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    alpha = np.zeros(n)
    f = np.zeros(n)
    rng = np.random.default_rng(seed)
    epochs = 0
    for epochs in range(1, max_epochs + 1):
        order = rng.permutation(n)
        kernels.dcd_epoch(K, y, alpha, f, float(C), order)
        # recompute f now and then to stop drift from the incremental updates
        if epochs % 50 == 0:
            f = K @ (alpha * y)
        if _converged(*_duality_gap(alpha, y, f, C)):
            break
    return alpha, epochs


def solve_dual_primal(X: np.ndarray, y: np.ndarray, C: float, seed: int = 0,
                      max_epochs: int = MAX_EPOCHS) -> tuple[np.ndarray, int]:
    """Same problem as :func:`solve_dual_gram` but keeping ``w`` explicitly.

    ``X`` must already carry the constant bias column. Returns ``(w, epochs)``.
    """
    n = X.shape[0]
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    qdiag = np.einsum("ij,ij->i", X, X)
    alpha = np.zeros(n)
    w = np.zeros(X.shape[1])
    rng = np.random.default_rng(seed)
    epochs = 0
    for epochs in range(1, max_epochs + 1):
        order = rng.permutation(n)
        kernels.dcd_epoch_primal(X, y, alpha, w, float(C), order, qdiag)
        if _converged(*_duality_gap(alpha, y, X @ w, C)):
            break
    return w, epochs


def _targets(y, classes) -> np.ndarray:
    return np.stack([np.where(y == c, 1.0, -1.0) for c in classes])


def _validate(X, y):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("feature matrix must be 2-D")
    y = np.asarray(y)
    if y.shape[0] != X.shape[0]:
        raise ValueError("one label per row expected")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite features")
    classes = tuple(sorted(set(y.tolist())))
    if len(classes) < 2:
        raise ValueError("need at least two classes")
    return X, y, classes


def train_linear_svm_ovr(X, y, C: float = 1.0, seed: int = 0, gram=None) -> LinearSvmModel:
    """One binary hinge-loss SVM per class against the rest.

    ``gram`` may pass a precomputed ``X X^T`` (without the bias term) for
    the rows of ``X`` in their given order.
    """
    X, y, classes = _validate(X, y)
    if not C > 0:
        raise ValueError("C must be positive")
    perm = canonical_order(X, y)
    Xc, yc = X[perm], y[perm]
    n, D = Xc.shape
    Y = _targets(yc, classes)
    W = np.empty((len(classes), D))
    b = np.empty(len(classes))
    if gram is not None or n <= GRAM_MAX_ROWS:
        K = (Xc @ Xc.T if gram is None else np.asarray(gram)[np.ix_(perm, perm)]) + 1.0
        for k in range(len(classes)):
            alpha, _ = solve_dual_gram(K, Y[k], C, seed)
            ay = alpha * Y[k]
            W[k] = ay @ Xc
            b[k] = ay.sum()
    else:
        Xa = np.hstack([Xc, np.ones((n, 1))])
        for k in range(len(classes)):
            w, _ = solve_dual_primal(Xa, Y[k], C, seed)
            W[k], b[k] = w[:-1], w[-1]
    return LinearSvmModel(classes, W, b, float(C))


def decision_function(model: LinearSvmModel, X) -> np.ndarray:
    A = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if A.shape[1] != model.dim:
        raise ValueError(f"dimension mismatch: model {model.dim}, input {A.shape[1]}")
    return A @ model.W.T + model.b


def predict(model: LinearSvmModel, x):
    """Highest-scoring class; ties go to the smallest label.

    A 1-D input returns one label, a 2-D input an array of labels.
    """
    scores = decision_function(model, x)
    # classes are sorted and argmax returns the first maximum
    labels = np.asarray(model.classes, dtype=object)[np.argmax(scores, axis=1)]
    if np.ndim(x) == 1:
        return labels[0]
    return np.array(labels.tolist())


# --------------------------------------------------------------------------
# Precomputed-kernel hook
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class KernelSvmModel:
    """OvR SVM on a user-supplied kernel; ``coef[k] = alpha * y`` per class."""

    classes: tuple
    coef: np.ndarray  # (n_classes, n_train)
    C: float


def train_kernel_svm_ovr(K, y, C: float = 1.0, seed: int = 0) -> KernelSvmModel:
    """Train on a precomputed train x train kernel (a constant 1 is added
    for the bias). Rows are used in the given order."""
    K = np.asarray(K, dtype=np.float64)
    y = np.asarray(y)
    if K.ndim != 2 or K.shape[0] != K.shape[1] or K.shape[0] != y.shape[0]:
        raise ValueError("kernel must be square and match the labels")
    classes = tuple(sorted(set(y.tolist())))
    if len(classes) < 2:
        raise ValueError("need at least two classes")
    Y = _targets(y, classes)
    coef = np.stack([solve_dual_gram(K + 1.0, Y[k], C, seed)[0] * Y[k] for k in range(len(classes))])
    return KernelSvmModel(classes, coef, float(C))


def predict_kernel(model: KernelSvmModel, K_test) -> np.ndarray:
    """``K_test`` is test x train."""
    scores = (np.asarray(K_test, dtype=np.float64) + 1.0) @ model.coef.T
    return np.array([model.classes[i] for i in np.argmax(scores, axis=1)])


# --------------------------------------------------------------------------
# C selection
# --------------------------------------------------------------------------


def _folds(y, groups, seed):
    from sklearn.model_selection import LeaveOneGroupOut, StratifiedKFold

    n_groups = len(set(np.asarray(groups).tolist()))
    if n_groups < 2:
        raise ValueError("cross-validation needs at least two specimen groups")
    if n_groups >= 3:
        return list(LeaveOneGroupOut().split(np.zeros(len(y)), y, groups))
    min_count = min(np.unique(y, return_counts=True)[1])
    k = min(5, int(min_count))
    if k < 2:
        raise ValueError("too few samples per class for stratified folds")
    return list(StratifiedKFold(k, shuffle=True, random_state=seed).split(np.zeros(len(y)), y))


def cross_validate_c(X, y, groups, grid=DEFAULT_C_GRID, seed: int = 0) -> float:
    """C with the best mean fold accuracy; ties go to the smallest C.

    Folds leave one specimen group out, or are stratified 5-fold when
    fewer than three groups exist.
    """
    grid = sorted(float(c) for c in grid)
    if not grid:
        raise ValueError("empty C grid")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    groups = np.asarray(groups)
    if len(groups) != len(y):
        raise ValueError("one group id per row expected")
    if len(grid) == 1:
        return grid[0]
    folds = _folds(y, groups, seed)
    G = X @ X.T
    best_c, best_acc = grid[0], -1.0
    for C in grid:
        accs = []
        for tr, te in folds:
            if len(set(y[tr].tolist())) < 2:
                pred = np.full(te.shape[0], y[tr][0])
            else:
                model = train_linear_svm_ovr(X[tr], y[tr], C, seed, gram=G[np.ix_(tr, tr)])
                pred = predict(model, X[te])
            accs.append(float(np.mean(pred == y[te])))
        acc = float(np.mean(accs))
        if acc > best_acc:
            best_c, best_acc = C, acc
    return best_c
