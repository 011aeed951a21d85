"""``texfuse`` command line.

Exit codes: 0 success, 1 usage error, 2 data error.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .. import tensorio
from ..classify import cross_validate_c, fuse_features, train_linear_svm_ovr
from ..imgcore import ImageFormatError
from ..tensorio import ContainerError
from .cache import CacheError
from .features import (ENCODED_KINDS, FEATURE_KINDS, Encoder, FeatureConfig, descriptor_sets,
                       descriptor_store, extract_features, fit_encoder)
from .manifest import ManifestError, load_manifest
from .protocol import EvalReport, aggregate_reports, format_summary, run_train_eval, split_rows
from .splits import Split, SplitError, SplitSpec, make_splits
from .synth import generate_corpus

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
DATA_ERRORS = (ManifestError, SplitError, CacheError, ContainerError, ImageFormatError,
               FileNotFoundError, ValueError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _c_value(raw: str):
    if raw == "auto":
        return "auto"
    try:
        v = float(raw)
    except ValueError:
        raise argparse.ArgumentTypeError("expected 'auto' or a positive number") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("C must be positive")
    return v


def _features(raw: str) -> list[str]:
    kinds = [k.strip() for k in raw.split(",") if k.strip()]
    bad = [k for k in kinds if k not in FEATURE_KINDS]
    if not kinds or bad:
        raise argparse.ArgumentTypeError(f"feature kinds must come from {', '.join(FEATURE_KINDS)}")
    return kinds


def _config(args) -> FeatureConfig:
    return FeatureConfig.desk(seed=args.seed) if args.preset == "desk" else FeatureConfig(seed=args.seed)


def _write(path, text: str):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _splits(args, manifest) -> list[Split]:
    return make_splits(manifest, SplitSpec(args.setup, args.seed, args.repeats))


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------


def cmd_synth(args):
    out = args.out or "synthetic"
    m = generate_corpus(out, args.specimens, args.images, args.size, args.seed, rotate=not args.no_rotate)
    print(f"wrote {len(m)} images, {len(m.specimens)} specimens to {out}/manifest.jsonl")


def cmd_split(args):
    m = load_manifest(args.manifest)
    splits = _splits(args, m)
    doc = {"setup": args.setup, "seed": args.seed,
           "splits": [{"train": list(s.train), "test": list(s.test)} for s in splits]}
    _write(args.out, json.dumps(doc, indent=1) + "\n")


def _train_split(args, m) -> Split:
    splits = _splits(args, m)
    if not 0 <= args.split_index < len(splits):
        raise UsageError(f"--split-index must lie in [0, {len(splits) - 1}]")
    return splits[args.split_index]


def cmd_codebook(args):
    kind = args.feature[0]
    if len(args.feature) != 1 or kind not in ENCODED_KINDS:
        raise UsageError(f"codebook needs exactly one of {ENCODED_KINDS}")
    m = load_manifest(args.manifest)
    cfg = _config(args)
    split = _train_split(args, m)
    store = descriptor_store(args.cache, cfg)
    enc = fit_encoder(kind, descriptor_sets(m, m.select(split.train), cfg, store), cfg)
    out = args.out or f"{kind}.tfmd"
    Path(out).write_bytes(enc.to_tfmd())
    print(f"{kind} encoder fitted on {len(split.train)} training specimens -> {out}")


def _load_encoder(args, kind):
    if not args.codebook:
        raise UsageError(f"{kind} needs --codebook (see 'texfuse codebook')")
    return Encoder.from_tfmd(Path(args.codebook).read_bytes())


def _caches(args, m, cfg, kinds, split=None):
    caches = []
    for kind in kinds:
        enc = None
        if kind in ENCODED_KINDS:
            if args.codebook:
                enc = _load_encoder(args, kind)
            elif split is None:
                raise UsageError(f"{kind} needs --codebook")
        caches.append(extract_features(m, kind, cfg, args.cache, encoder=enc,
                                       train_specimens=None if split is None else split.train))
    return caches


def cmd_extract(args):
    m = load_manifest(args.manifest)
    cfg = _config(args)
    for kind in args.feature:
        enc = _load_encoder(args, kind) if kind in ENCODED_KINDS else None
        cache = extract_features(m, kind, cfg, args.cache, encoder=enc)
        print(f"{kind}: {cache.new_rows} new rows, {len(cache)} cached, dim {cache.dim} -> {cache.path}")


def cmd_train(args):
    m = load_manifest(args.manifest)
    cfg = _config(args)
    split = _train_split(args, m)
    caches = _caches(args, m, cfg, args.feature, split)
    train, _ = split_rows(m, split)
    images = [e.image for e in train]
    X = fuse_features([c.matrix(images) for c in caches])
    y = np.array([e.label for e in train])
    C = args.c
    if C == "auto":
        C = cross_validate_c(X, y, [e.specimen for e in train], seed=args.seed)
    model = train_linear_svm_ovr(X, y, float(C), args.seed)
    out = args.out or "model.tfmd"
    t, meta = tensorio.loads(model.to_tfmd())
    meta.update({"features": args.feature, "train_specimens": list(split.train)})
    tensorio.save(out, t, meta)
    print(f"trained {len(model.classes)}-class SVM (C={C:g}) on {len(images)} images -> {out}")


def evaluate(args, m, cfg, log=print) -> dict:
    splits = _splits(args, m)
    reports = []
    for i, split in enumerate(splits):
        t0 = time.perf_counter()
        caches = _caches(args, m, cfg, args.feature, split)
        r = run_train_eval(m, split, caches, args.c, seed=args.seed, split_index=i)
        reports.append(r)
        log(f"split {i}: accuracy {100 * r.accuracy:.1f}%  MCA {100 * r.mca:.1f}%  C={r.C:g}  "
            f"({time.perf_counter() - t0:.1f} s)")
    summary = aggregate_reports(reports)
    return {"features": args.feature, "setup": args.setup, "seed": args.seed, "preset": args.preset,
            "summary": summary.to_json(), "reports": [r.to_json() for r in reports]}


def cmd_eval(args):
    if args.codebook:
        raise UsageError("eval fits one encoder per split; --codebook is not accepted")
    m = load_manifest(args.manifest)
    doc = evaluate(args, m, _config(args), log=lambda s: print(s, file=sys.stderr))
    if args.out:
        Path(args.out).write_text(json.dumps(doc, indent=1) + "\n")
    print(_render(doc))


def _render(doc) -> str:
    summary = aggregate_reports([EvalReport.from_json(r) for r in doc["reports"]])
    return format_summary(summary, f"features: {'+'.join(doc['features'])}  setup: {doc['setup']}") + "\n"


def cmd_report(args):
    src = args.input or args.out
    if not src:
        raise UsageError("report needs a results file")
    doc = json.loads(Path(src).read_text())
    if args.json:
        print(json.dumps(doc["summary"], indent=1))
    else:
        print(_render(doc), end="")


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="texfuse", description="Texture and shape features for cell-image classification.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, manifest=True):
        if manifest:
            sp.add_argument("--manifest", required=True, help="JSON-lines dataset manifest")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help="output file")

    def feature_opts(sp, default="pricolgbp"):
        sp.add_argument("--feature", type=_features, default=_features(default),
                        help="feature kind, or a comma list to fuse")
        sp.add_argument("--preset", choices=("full", "desk"), default="full",
                        help="full-scale settings or the reduced desk-scale ones")
        sp.add_argument("--cache", default="texfuse-cache", help="feature cache directory")
        sp.add_argument("--codebook", help="fitted encoder file for rootsift kinds")

    def split_opts(sp):
        sp.add_argument("--setup", default="d", choices=("a", "b", "c", "d", "loso"))
        sp.add_argument("--repeats", type=int, default=10)

    s = sub.add_parser("synth", help="generate the synthetic four-class corpus")
    common(s, manifest=False)
    s.add_argument("--specimens", type=int, default=4, help="specimens per class")
    s.add_argument("--images", type=int, default=20, help="images per specimen")
    s.add_argument("--size", type=int, default=64)
    s.add_argument("--no-rotate", action="store_true")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("split", help="write specimen-level train/test splits")
    common(s)
    split_opts(s)
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("codebook", help="fit a PCA+GMM or k-means encoder on training specimens")
    common(s)
    split_opts(s)
    feature_opts(s, "rootsift_ifv")
    s.add_argument("--split-index", type=int, default=0)
    s.set_defaults(func=cmd_codebook)

    s = sub.add_parser("extract", help="compute and cache feature rows")
    common(s)
    feature_opts(s)
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("train", help="train the one-vs-rest SVM on one split")
    common(s)
    split_opts(s)
    feature_opts(s)
    s.add_argument("--c", type=_c_value, default="auto")
    s.add_argument("--split-index", type=int, default=0)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="run the full protocol over all splits")
    common(s)
    split_opts(s)
    feature_opts(s)
    s.add_argument("--c", type=_c_value, default="auto")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("report", help="print tables from an eval results file")
    s.add_argument("input", nargs="?", help="results JSON written by 'texfuse eval --out'")
    s.add_argument("--out", help=argparse.SUPPRESS)
    s.add_argument("--json", action="store_true", help="print the summary as JSON")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "repeats", 1) < 1:
        parser.error("--repeats must be >= 1")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"texfuse: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except json.JSONDecodeError as exc:
        print(f"texfuse: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DATA_ERRORS as exc:
        print(f"texfuse: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
