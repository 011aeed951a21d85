"""Per-image feature extraction for every supported kind, with caching.

Texture kinds (``pricolbp``, ``pricolgbp``, ``mclbp_*``) are fixed functions
of the image. The RootSIFT kinds first need an encoder (PCA plus a GMM, or
a k-means codebook) fitted on descriptors from training specimens only; the
encoder's fingerprint becomes part of the cache key.
"""
from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .. import encode, tensorio
from .._backend import thread_limit
from ..densesift import PatchGridConfig, extract_image_rootsifts
from ..gabor import GaborBankConfig, pricolgbp, pricolgbp_dim
from ..imgcore import extract_channel, load_image
from ..lbp import LbpConfig
from ..mclbp import build_groups_co, mclbp_feature
from ..pricolbp import TemplateSet, descriptor_dim, pricolbp_descriptor
from .cache import DescriptorStore, FeatureCache
from .manifest import DatasetManifest

TEXTURE_KINDS = ("pricolbp", "pricolgbp", "mclbp_sum", "mclbp_moment", "mclbp_dft")
ENCODED_KINDS = ("rootsift_ifv", "rootsift_vq")
FEATURE_KINDS = TEXTURE_KINDS + ENCODED_KINDS


@dataclass(frozen=True)
class FeatureConfig:
    """Extraction settings. Defaults are the full-scale values;
    :meth:`desk` shrinks them for small images and quick runs."""

    channel: str = "gray"
    templates: str = "ten"
    gabor_scales: tuple = (1, 2, 3, 4, 5, 6, 7)
    patch_size: int = 41
    patch_step: int = 2
    n_sift_scales: int = 6
    min_side: int = 64
    pca_dim: int = 80
    n_components: int = 256
    n_train_descriptors: int = 100_000
    em_iters: int = 100
    mclbp_sigma1: float = 1.0
    seed: int = 0

    @classmethod
    def desk(cls, **overrides) -> "FeatureConfig":
        base = cls(gabor_scales=(1, 2, 3), pca_dim=48, n_components=64,
                   n_train_descriptors=20_000, em_iters=50)
        return replace(base, **overrides)

    @property
    def lbp(self) -> LbpConfig:
        return LbpConfig(8, 1.0)

    @property
    def template_set(self) -> TemplateSet:
        return TemplateSet.preset(self.templates)

    @property
    def gabor(self) -> GaborBankConfig:
        return GaborBankConfig(scales=tuple(self.gabor_scales))

    @property
    def grid(self) -> PatchGridConfig:
        return PatchGridConfig(self.patch_size, self.patch_step,
                               tuple(1.5 ** k for k in range(1, self.n_sift_scales + 1)), self.min_side)

    def relevant(self, kind: str) -> dict:
        """Fields that influence the rows of ``kind``."""
        d = asdict(self)
        keys = {"channel"}
        if kind in ("pricolbp", "pricolgbp"):
            keys |= {"templates"}
        if kind == "pricolgbp":
            keys |= {"gabor_scales"}
        if kind.startswith("mclbp"):
            keys |= {"mclbp_sigma1"}
        if kind in ENCODED_KINDS:
            keys |= {"patch_size", "patch_step", "n_sift_scales", "min_side", "pca_dim",
                     "n_components", "n_train_descriptors", "em_iters", "seed"}
        return {k: list(d[k]) if isinstance(d[k], tuple) else d[k] for k in sorted(keys)}


def check_kind(kind: str) -> str:
    if kind not in FEATURE_KINDS:
        raise ValueError(f"unknown feature kind {kind!r}; expected one of {FEATURE_KINDS}")
    return kind


def feature_dim(kind: str, cfg: FeatureConfig = FeatureConfig()) -> int:
    check_kind(kind)
    n_t = len(cfg.template_set)
    if kind == "pricolbp":
        return descriptor_dim(8, n_t)
    if kind == "pricolgbp":
        return pricolgbp_dim(len(cfg.gabor_scales), n_t)
    if kind == "rootsift_ifv":
        return encode.ifv_dim(cfg.pca_dim, cfg.n_components)
    if kind == "rootsift_vq":
        return cfg.n_components
    return build_groups_co(8).pooled_dim(kind.split("_", 1)[1])


def read_image(manifest: DatasetManifest, entry, channel: str = "gray"):
    return extract_channel(load_image(manifest.path_of(entry)), channel)


def texture_feature(kind: str, img, cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    if kind == "pricolbp":
        return pricolbp_descriptor(img, cfg.lbp, cfg.template_set)
    if kind == "pricolgbp":
        return pricolgbp(img, cfg.lbp, cfg.template_set, cfg.gabor)
    if kind.startswith("mclbp_"):
        return mclbp_feature(img, kind.split("_", 1)[1], sigma1=cfg.mclbp_sigma1)
    raise ValueError(f"{kind!r} is not a texture kind")


# --------------------------------------------------------------------------
# RootSIFT encoders
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Encoder:
    kind: str
    pca: encode.PcaModel | None  # IFV only; VQ quantises raw RootSIFT
    model: object  # GmmModel or Codebook

    def to_tfmd(self) -> bytes:
        tensors = {}
        if self.pca is not None:
            tensors = {"pca/mean": self.pca.mean, "pca/basis": self.pca.basis,
                       "pca/explained_variance": self.pca.explained_variance}
        if isinstance(self.model, encode.GmmModel):
            tensors.update({"gmm/weights": self.model.weights, "gmm/means": self.model.means,
                            "gmm/variances": self.model.variances})
        else:
            tensors["codebook/centroids"] = self.model.centroids
        return tensorio.dumps(tensors, {"kind": self.kind})

    @classmethod
    def from_tfmd(cls, raw: bytes) -> "Encoder":
        t, meta = tensorio.loads(raw)
        pca = None
        if "pca/basis" in t:
            pca = encode.PcaModel(t["pca/mean"], t["pca/basis"], t["pca/explained_variance"])
        if meta["kind"] == "rootsift_ifv":
            model = encode.GmmModel(t["gmm/weights"], t["gmm/means"], t["gmm/variances"])
        else:
            model = encode.Codebook(t["codebook/centroids"])
        return cls(meta["kind"], pca, model)

    @property
    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_tfmd()).hexdigest()

    def encode(self, descriptors) -> np.ndarray:
        z = descriptors if self.pca is None else encode.apply_pca(self.pca, descriptors)
        if self.kind == "rootsift_ifv":
            return encode.ifv_encode(self.model, z)
        return encode.vq_encode(self.model, z)


def fit_encoder(kind: str, descriptor_sets, cfg: FeatureConfig = FeatureConfig()) -> Encoder:
    """PCA then GMM (``rootsift_ifv``), or plain k-means on the raw
    descriptors (``rootsift_vq``), fitted on a seeded sample of the given
    training descriptors."""
    if kind not in ENCODED_KINDS:
        raise ValueError(f"{kind!r} does not use an encoder")
    sample = encode.sample_training_descriptors(descriptor_sets, cfg.n_train_descriptors, cfg.seed)
    if kind == "rootsift_vq":
        return Encoder(kind, None, encode.fit_kmeans(sample, cfg.n_components, max_iters=cfg.em_iters, seed=cfg.seed))
    pca = encode.fit_pca(sample, cfg.pca_dim)
    z = encode.apply_pca(pca, sample)
    return Encoder(kind, pca, encode.fit_gmm(z, cfg.n_components, max_iters=cfg.em_iters, seed=cfg.seed))


def _sift_key(cfg: FeatureConfig) -> str:
    rel = {k: v for k, v in cfg.relevant("rootsift_ifv").items()
           if k in ("channel", "patch_size", "patch_step", "n_sift_scales", "min_side")}
    return hashlib.sha256(json.dumps(rel, sort_keys=True).encode()).hexdigest()[:16]


def descriptor_store(cache_dir, cfg: FeatureConfig) -> DescriptorStore:
    return DescriptorStore(Path(cache_dir) / f"rootsift-{_sift_key(cfg)}")


def descriptor_sets(manifest: DatasetManifest, entries, cfg: FeatureConfig, store: DescriptorStore | None = None):
    """RootSIFT matrices for ``entries``, read from or written to ``store``."""
    todo = [e for e in entries if store is None or e.image not in store]

    def work(e):
        return extract_image_rootsifts(read_image(manifest, e, cfg.channel), cfg.grid).data

    fresh = dict(zip((e.image for e in todo), _map(work, todo)))
    if store is not None:
        for image, data in fresh.items():
            store.put(image, data)
        return [fresh[e.image] if e.image in fresh else store.get(e.image) for e in entries]
    return [fresh[e.image] for e in entries]


def _map(fn, items):
    items = list(items)
    workers = min(thread_limit(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------
# Cached extraction
# --------------------------------------------------------------------------


def config_hash(kind: str, cfg: FeatureConfig, encoder: Encoder | None = None) -> str:
    payload = {"kind": kind, "config": cfg.relevant(kind)}
    if encoder is not None:
        payload["encoder"] = encoder.fingerprint
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def cache_path(cache_dir, kind: str, chash: str) -> Path:
    return Path(cache_dir) / f"{kind}-{chash[:16]}.tffc"


def extract_features(manifest: DatasetManifest, kind: str, cfg: FeatureConfig = FeatureConfig(),
                     cache_dir=None, encoder: Encoder | None = None,
                     train_specimens=None) -> FeatureCache:
    """One row per manifest image, appended to the cache for this
    kind/config. Rows already present are not recomputed.

    Encoded kinds need ``encoder`` or ``train_specimens`` (to fit one).
    """
    check_kind(kind)
    if cache_dir is None:
        raise ValueError("a cache directory is required")
    store = None
    if kind in ENCODED_KINDS:
        store = descriptor_store(cache_dir, cfg)
        if encoder is None:
            if train_specimens is None:
                raise ValueError(f"{kind} needs an encoder or the training specimens")
            train = manifest.select(train_specimens)
            if not train:
                raise ValueError("no manifest entries belong to the training specimens")
            encoder = fit_encoder(kind, descriptor_sets(manifest, train, cfg, store), cfg)
        elif encoder.kind != kind:
            raise ValueError(f"encoder was fitted for {encoder.kind}, not {kind}")
    chash = config_hash(kind, cfg, encoder)
    cache = FeatureCache.open(cache_path(cache_dir, kind, chash), kind, feature_dim(kind, cfg), chash)
    todo = [e for e in manifest.entries if e.image not in cache]
    if not todo:
        return cache
    if kind in ENCODED_KINDS:
        sets = descriptor_sets(manifest, todo, cfg, store)
        rows = [encoder.encode(d) for d in sets]
    else:
        rows = _map(lambda e: texture_feature(kind, read_image(manifest, e, cfg.channel), cfg), todo)
    cache.add_many(zip((e.image for e in todo), rows))
    return cache
