"""PCA, k-means, diagonal GMM and the VQ / Fisher-vector image encoders."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import tensorio

LOG_2PI = math.log(2.0 * math.pi)


def _rows(X) -> np.ndarray:
    data = getattr(X, "data", X)
    a = np.asarray(data, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D sample matrix, got shape {a.shape}")
    return a


# --------------------------------------------------------------------------
# PCA
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray
    basis: np.ndarray  # (D, d), orthonormal columns
    explained_variance: np.ndarray
    whiten: bool = False

    @property
    def d(self) -> int:
        return int(self.basis.shape[1])

    def to_tfmd(self) -> bytes:
        return tensorio.dumps(
            {"mean": self.mean, "basis": self.basis, "explained_variance": self.explained_variance},
            {"kind": "pca", "whiten": self.whiten},
        )

    @classmethod
    def from_tensors(cls, t: dict, meta: dict) -> "PcaModel":
        return cls(t["mean"], t["basis"], t["explained_variance"], bool(meta.get("whiten", False)))


def fit_pca(samples, d: int, whiten: bool = False) -> PcaModel:
    """Top-``d`` principal axes of the centred samples via SVD.

    Each axis is signed so that its largest-magnitude entry is positive.
    """
    X = _rows(samples)
    n, D = X.shape
    if d < 1 or d > D:
        raise ValueError(f"d must lie in [1, {D}], got {d}")
    if n <= d:
        raise ValueError(f"need more than d={d} samples, got {n}")
    mean = X.mean(axis=0)
    _, s, vt = np.linalg.svd(X - mean, full_matrices=False)
    # relative to the data scale, so rounding residue of constant data is rank 0
    scale = max(s[0] if s.size else 0.0, float(np.abs(X).max()) * np.sqrt(n))
    tol = scale * max(n, D) * np.finfo(np.float64).eps
    rank = int(np.sum(s > tol))
    if rank < d:
        raise ValueError(f"sample matrix has rank {rank} < requested d={d}")
    basis = vt[:d].T.copy()
    pivots = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[pivots, np.arange(d)])
    basis *= signs
    return PcaModel(mean, basis, s[:d] ** 2 / (n - 1), whiten)


def apply_pca(model: PcaModel, x) -> np.ndarray:
    """Project rows (or a single vector) onto the principal basis."""
    a = np.asarray(getattr(x, "data", x), dtype=np.float64)
    if a.shape[-1] != model.mean.shape[0]:
        raise ValueError(f"dimension mismatch: model {model.mean.shape[0]}, input {a.shape[-1]}")
    out = (a - model.mean) @ model.basis
    if model.whiten:
        out = out / np.sqrt(np.maximum(model.explained_variance, 1e-300))
    return out


# --------------------------------------------------------------------------
# k-means
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Codebook:
    centroids: np.ndarray
    objective_history: tuple = field(default=())

    @property
    def K(self) -> int:
        return int(self.centroids.shape[0])

    def to_tfmd(self) -> bytes:
        return tensorio.dumps({"centroids": self.centroids}, {"kind": "codebook"})

    @classmethod
    def from_tensors(cls, t: dict, meta: dict) -> "Codebook":
        return cls(t["centroids"])


def _sq_dists(X, C, Xsq=None):
    """Squared distances by expansion; clipped at zero."""
    Xsq = (X * X).sum(1) if Xsq is None else Xsq
    d = Xsq[:, None] - 2.0 * (X @ C.T) + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _kmeanspp(X, K, rng, Xsq):
    n = X.shape[0]
    idx = [int(rng.integers(n))]
    best = _sq_dists(X, X[idx], Xsq)[:, 0]
    for _ in range(1, K):
        total = best.sum()
        if total <= 0:
            # all remaining mass sits on chosen points; take unused rows in order
            unused = np.setdiff1d(np.arange(n), idx)
            nxt = int(unused[0])
        else:
            nxt = int(rng.choice(n, p=best / total))
        idx.append(nxt)
        best = np.minimum(best, _sq_dists(X, X[[nxt]], Xsq)[:, 0])
    return X[idx].copy()


def fit_kmeans(samples, K: int, max_iters: int = 100, seed: int = 0) -> Codebook:
    """k-means++ seeding followed by Lloyd iterations to an assignment fixpoint."""
    X = _rows(samples)
    n = X.shape[0]
    if K < 1:
        raise ValueError("K must be >= 1")
    if n < K:
        raise ValueError(f"need at least K={K} samples, got {n}")
    rng = np.random.default_rng(seed)
    Xsq = (X * X).sum(1)
    C = _kmeanspp(X, K, rng, Xsq)
    history = []
    labels = None
    for _ in range(max_iters):
        dist = _sq_dists(X, C, Xsq)
        new_labels = dist.argmin(axis=1)
        mind = dist[np.arange(n), new_labels]
        history.append(float(mind.sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        counts = np.bincount(labels, minlength=K)
        sums = np.zeros_like(C)
        np.add.at(sums, labels, X)
        nonempty = counts > 0
        C[nonempty] = sums[nonempty] / counts[nonempty, None]
        empty = np.nonzero(~nonempty)[0]
        if empty.size:
            # re-seed from the points worst served by their current centroid
            far = np.argsort(-mind, kind="stable")
            C[empty] = X[far[:empty.size]]
            labels = None
    return Codebook(C, tuple(history))


def vq_encode(codebook: Codebook, X) -> np.ndarray:
    """L1-normalised hard-assignment histogram (ties go to the lowest index)."""
    A = _rows(X)
    if A.shape[0] == 0:
        raise ValueError("cannot encode an empty descriptor set")
    C = codebook.centroids
    if A.shape[1] != C.shape[1]:
        raise ValueError("descriptor / codebook dimension mismatch")
    counts = np.zeros(C.shape[0])
    chunk = max(1, 4_000_000 // max(1, C.size))
    for s in range(0, A.shape[0], chunk):
        block = A[s:s + chunk]
        d = ((block[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)
        counts += np.bincount(d.argmin(axis=1), minlength=C.shape[0])
    return counts / A.shape[0]


# --------------------------------------------------------------------------
# Diagonal GMM
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GmmModel:
    weights: np.ndarray  # (K,)
    means: np.ndarray  # (K, d)
    variances: np.ndarray  # (K, d)
    loglik_history: tuple = field(default=())
    variance_floor: np.ndarray | None = None

    @property
    def K(self) -> int:
        return int(self.weights.shape[0])

    @property
    def d(self) -> int:
        return int(self.means.shape[1])

    def to_tfmd(self) -> bytes:
        return tensorio.dumps(
            {"weights": self.weights, "means": self.means, "variances": self.variances},
            {"kind": "gmm"},
        )

    @classmethod
    def from_tensors(cls, t: dict, meta: dict) -> "GmmModel":
        return cls(t["weights"], t["means"], t["variances"])


def _log_joint(X, weights, means, variances):
    """``log pi_k + log N(x_i; mu_k, diag var_k)`` as an (N, K) matrix."""
    inv = 1.0 / variances
    maha = (X * X) @ inv.T - 2.0 * X @ (means * inv).T + (means * means * inv).sum(1)[None, :]
    maha = np.maximum(maha, 0.0)
    logdet = np.log(variances).sum(1)
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    return logw[None, :] - 0.5 * (X.shape[1] * LOG_2PI + logdet[None, :] + maha)


def gmm_responsibilities(model: GmmModel, x) -> np.ndarray:
    """Posterior component probabilities, computed in log space."""
    X = np.asarray(getattr(x, "data", x), dtype=np.float64)
    single = X.ndim == 1
    X = X[None, :] if single else X
    if X.shape[1] != model.d:
        raise ValueError(f"dimension mismatch: model {model.d}, input {X.shape[1]}")
    lj = _log_joint(X, model.weights, model.means, model.variances)
    r = np.exp(lj - logsumexp(lj, axis=1, keepdims=True))
    return r[0] if single else r


def fit_gmm(samples, K: int, max_iters: int = 100, tol: float = 1e-6, seed: int = 0,
            floor_ratio: float = 1e-4, kmeans_iters: int = 50) -> GmmModel:
    """EM for a diagonal-covariance mixture, seeded by k-means.

    Variances never drop below ``floor_ratio`` times the global per-dimension
    variance. Iteration stops once the mean log-likelihood gains less than
    ``tol`` or after ``max_iters`` M-steps.
    """
    X = _rows(samples)
    n, d = X.shape
    if n < K:
        raise ValueError(f"need at least K={K} samples, got {n}")
    floor = floor_ratio * X.var(axis=0)
    floor = np.where(floor > 0, floor, floor_ratio)
    cb = fit_kmeans(X, K, max_iters=kmeans_iters, seed=seed)
    labels = _sq_dists(X, cb.centroids).argmin(axis=1)
    counts = np.bincount(labels, minlength=K).astype(np.float64)
    weights = counts / n
    means = cb.centroids.copy()
    variances = np.empty((K, d))
    for k in range(K):
        members = X[labels == k]
        if members.shape[0] > 1:
            variances[k] = members.var(axis=0)
        else:
            variances[k] = X.var(axis=0)
    variances = np.maximum(variances, floor)

    def e_step(w, m, v):
        lj = _log_joint(X, w, m, v)
        lse = logsumexp(lj, axis=1)
        ll = float(lse.mean())
        if not math.isfinite(ll):
            raise FloatingPointError("non-finite GMM log-likelihood; data may be degenerate")
        return np.exp(lj - lse[:, None]), ll

    resp, ll = e_step(weights, means, variances)
    history = [ll]
    Xsq = X * X
    for _ in range(max_iters):
        nk = resp.sum(axis=0)
        live = nk > 1e-10
        weights = nk / n
        sx = resp.T @ X
        sxx = resp.T @ Xsq
        new_means = means.copy()
        new_means[live] = sx[live] / nk[live, None]
        new_var = variances.copy()
        new_var[live] = sxx[live] / nk[live, None] - new_means[live] ** 2
        means = new_means
        variances = np.maximum(new_var, floor)
        resp, ll_new = e_step(weights, means, variances)
        history.append(ll_new)
        gain = ll_new - ll
        ll = ll_new
        if gain < tol:
            break
    return GmmModel(weights, means, variances, tuple(history), floor)


def gmm_average_loglik(model: GmmModel, X) -> float:
    A = _rows(X)
    return float(logsumexp(_log_joint(A, model.weights, model.means, model.variances), axis=1).mean())


# --------------------------------------------------------------------------
# Fisher vectors
# --------------------------------------------------------------------------


def ifv_dim(d: int, K: int) -> int:
    return 2 * d * K


def ifv_encode(model: GmmModel, X) -> np.ndarray:
    """First- and second-order Fisher statistics ``[u_1, v_1, ..., u_K, v_K]``.

    No power or L2 normalisation is applied here.
    """
    A = _rows(X)
    N = A.shape[0]
    if N == 0:
        raise ValueError("cannot encode an empty descriptor set")
    if A.shape[1] != model.d:
        raise ValueError(f"dimension mismatch: model {model.d}, input {A.shape[1]}")
    S = gmm_responsibilities(model, A)
    out = np.empty((model.K, 2, model.d))
    sd = np.sqrt(model.variances)
    for k in range(model.K):
        z = (A - model.means[k]) / sd[k]
        s = S[:, k]
        out[k, 0] = (s @ z) / (N * math.sqrt(model.weights[k]))
        out[k, 1] = (s @ (z * z - 1.0)) / (N * math.sqrt(2.0 * model.weights[k]))
    return out.ravel()


# --------------------------------------------------------------------------
# Training-set sampling
# --------------------------------------------------------------------------


def sample_training_descriptors(sets, n: int = 100_000, seed: int = 0) -> np.ndarray:
    """Uniform sample without replacement from the pooled descriptor sets.

    Returns every descriptor (in input order) when fewer than ``n`` exist.
    """
    arrays = [_as_matrix(s) for s in sets]
    counts = np.array([a.shape[0] for a in arrays], dtype=np.int64)
    total = int(counts.sum())
    if total == 0:
        raise ValueError("no descriptors in the training corpus")
    dims = {a.shape[1] for a in arrays if a.shape[0]}
    if len(dims) != 1:
        raise ValueError(f"inconsistent descriptor dimensions {sorted(dims)}")
    if total <= n:
        return np.concatenate([a for a in arrays if a.shape[0]])
    rng = np.random.default_rng(seed)
    picks = np.sort(rng.choice(total, size=n, replace=False))
    offsets = np.concatenate([[0], np.cumsum(counts)])
    owner = np.searchsorted(offsets, picks, side="right") - 1
    parts = []
    for o in np.unique(owner):
        sel = picks[owner == o] - offsets[o]
        parts.append(arrays[o][sel])
    return np.concatenate(parts)


def _as_matrix(s) -> np.ndarray:
    a = np.asarray(getattr(s, "data", s), dtype=np.float64)
    if a.size == 0:
        return a.reshape(0, a.shape[-1] if a.ndim == 2 else 0)
    return _rows(a)
