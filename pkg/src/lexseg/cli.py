"""Command-line entry point: ``lexseg <command> ...``.

Exit codes: 0 on success, 1 on runtime or missing-resource errors, 2 on
usage errors. Options can come from ``--config FILE`` (YAML); flags given
on the command line win.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np
import torch
import yaml

from lexseg import __version__
from lexseg.classifier import BackendSpec, backend_vocabulary, load_backend
from lexseg.dataset import (
    VOC_CLASSES,
    convert_sbd,
    cooccurrence,
    get_partition,
    ingest_voc_sbd,
    load_corpus,
    load_partition_file,
    sample_episodes,
    save_corpus,
    synth_partitions,
    synth_shapes_corpus,
)
from lexseg.dataset.store import read_rgb
from lexseg.dataset.synthetic import SYNTH_CLASSES
from lexseg.errors import ConfigurationError, LexsegError, LexsegWarning, ResourceError
from lexseg.evaluation import WORDNET_REFERENCE, MetricsReport, compare_mappers, evaluate_partition, format_comparison, format_summary
from lexseg.paths import data_root, resolve_resource
from lexseg.pipeline import AttentionBuilder, TrainingExamples, parse_variant, segment
from lexseg.postprocess import GrabCutParams, write_annotation_png, write_mask_png
from lexseg.postprocess.io import read_mask_png
from lexseg.saliency import SaliencyCache, generate_attention_maps, write_salmap
from lexseg.segnet import ModelConfig, TrainHyper, build_model, load_checkpoint, save_checkpoint, train
from lexseg.segnet.train import TrainState
from lexseg.semantics import load_embeddings, load_ontology, tokenize_label
from lexseg.semantics.labels import bundled_path
from lexseg.semantics.proxies import (
    MAPPERS,
    build_proxy_set,
    resolve_target,
    word2vec_candidates,
    wordnet_candidates,
)

log = logging.getLogger("lexseg")

BUNDLED_CONFIGS = ("tiny-synth", "deeplabv3-voc")


# ---------------------------------------------------------------- config


def _read_config(path) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file() and str(path) in BUNDLED_CONFIGS:
        p = bundled_path(f"configs/{path}.yaml")
    if not p.is_file():
        raise ResourceError(f"config file {path} not found")
    with open(p, encoding="utf-8") as fh:
        return yaml.safe_load(fh) or {}


def _pick(flag, config: dict, key: str, default=None):
    """Flag value if given, else config value, else default."""
    if flag is not None:
        return flag
    return config.get(key, default)


# ---------------------------------------------------------------- resources


def _spec(args, default="fixture") -> BackendSpec:
    name = getattr(args, "backend", None) or default
    if Path(name).suffix in (".yaml", ".yml"):
        spec = BackendSpec.from_file(name)
        if getattr(args, "weights", None):
            spec.weights_path = args.weights
        return spec
    return BackendSpec.named(name, weights_path=getattr(args, "weights", None))


def _backend(args, default="fixture"):
    return load_backend(_spec(args, default))


def _ontology(spec: BackendSpec, args):
    explicit = getattr(args, "wordnet", None)
    if explicit:
        return load_ontology(explicit)
    if spec.ontology:
        return load_ontology(resolve_resource(spec.ontology) or bundled_path(spec.ontology))
    return load_ontology()


def _table(args, vocab, extra_words=()):
    if not getattr(args, "embeddings", None):
        return None
    words = set(extra_words)
    for entry in vocab:
        words.update(entry.label.tokens)
    return load_embeddings(args.embeddings, vocabulary=words)


def _builder(args, backend, mapper="wordnet", k=5, seed=0, extra_words=()):
    ontology = _ontology(backend.spec, args) if mapper == "wordnet" else None
    table = _table(args, backend.vocabulary, extra_words) if mapper == "word2vec" else None
    if mapper == "word2vec" and table is None:
        raise ConfigurationError("--mapper word2vec needs --embeddings FILE")
    cache = SaliencyCache(args.saliency_cache) if getattr(args, "saliency_cache", None) else None
    return AttentionBuilder(backend, ontology, table, mapper, k, seed, cache)


def _read_image(path):
    p = resolve_resource(path)
    if p is None or not p.is_file():
        raise ResourceError(f"image {path} not found")
    return read_rgb(p)


def _seed_everything(seed: int) -> None:
    torch.manual_seed(seed)
    np.random.seed(seed % 2**32)


def _datasets(corpus: str, partition, data: dict, seed: int, args):
    """(train store, test store) for the chosen corpus."""
    if corpus == "synthetic":
        root = getattr(args, "corpus_dir", None)
        if root:
            store = load_corpus(root)
            return store, store
        n_train = int(data.get("train_images", 300))
        n_test = int(data.get("test_images", 60))
        train_store = synth_shapes_corpus(n_train, 1000 + seed, classes=partition.train_labels)
        test_store = synth_shapes_corpus(n_test, 2000 + seed)
        return train_store, test_store
    if corpus == "voc":
        root = data_root()
        voc = getattr(args, "voc_root", None) or data.get("voc_root") or (root / "VOCdevkit/VOC2012" if root else None)
        sbd = getattr(args, "sbd_root", None) or data.get("sbd_root") or (root / "SBD" if root else None)
        if voc is None:
            raise ResourceError("set LEXSEG_DATA_ROOT or pass --voc-root")
        sbd = sbd if sbd is not None and Path(sbd).exists() else None
        return ingest_voc_sbd(voc, sbd)
    raise ConfigurationError(f"unknown corpus {corpus!r}; expected 'synthetic' or 'voc'")


def _partition(args, corpus: str):
    if getattr(args, "partition_file", None):
        return load_partition_file(args.partition_file)
    index = args.partition if args.partition is not None else 0
    if corpus == "synthetic":
        parts = synth_partitions()
        if not 0 <= index < len(parts):
            raise ConfigurationError(f"synthetic partitions are 0..{len(parts) - 1}")
        return parts[index]
    return get_partition(index)


# ---------------------------------------------------------------- commands


def cmd_map_labels(args) -> int:
    spec = _spec(args, "vgg19-imagenet1k")
    vocab = backend_vocabulary(spec)
    target = tokenize_label(args.label)
    ontology = _ontology(spec, args) if args.mapper == "wordnet" else None
    table = None
    if args.mapper == "word2vec":
        if not args.embeddings:
            raise ConfigurationError("--mapper word2vec needs --embeddings FILE")
        table = _table(args, vocab, target.tokens)
    if args.mapper == "wordnet" and not resolve_target(target, ontology):
        raise LexsegError(f"label {args.label!r} is not in WordNet")
    if args.image:
        image = _read_image(args.image)
        backend = load_backend(spec)
        proxies = build_proxy_set(target, image, args.mapper, vocab, backend, ontology, table, args.k)
        print("role\tclass_index\tlabel\tscore")
        for i, s in proxies.positives:
            print(f"positive\t{i}\t{vocab.label(i)}\t{s:.6f}")
        for i, s in proxies.negatives:
            print(f"negative\t{i}\t{vocab.label(i)}\t{s:.6f}")
        for f in proxies.flags:
            print(f"# flag: {f}", file=sys.stderr)
        return 0
    if args.mapper == "wordnet":
        rows = [(i, None) for i in wordnet_candidates(target, vocab, ontology)][: args.k]
    else:
        rows = word2vec_candidates(target, vocab, table, args.k)
    print("role\tclass_index\tlabel\tscore")
    for i, s in rows:
        print(f"positive\t{i}\t{vocab.label(i)}\t{'-' if s is None else f'{s:.6f}'}")
    if not rows:
        print(f"# no candidates for {args.label!r}", file=sys.stderr)
    return 0


def cmd_saliency(args) -> int:
    backend = _backend(args)
    image = _read_image(args.image)
    builder = _builder(args, backend, args.mapper, args.k)
    proxies = builder.proxies(image, args.label)
    cache = SaliencyCache(args.saliency_cache) if args.saliency_cache else None
    pos, neg = generate_attention_maps(image, proxies, backend, cache)
    out = Path(args.out_dir)
    write_salmap(out / "positive.salmap", pos.values)
    write_salmap(out / "negative.salmap", neg.values)
    print(f"positive\t{out / 'positive.salmap'}\t{','.join(map(str, proxies.positive_indices))}")
    print(f"negative\t{out / 'negative.salmap'}\t{','.join(map(str, proxies.negative_indices))}")
    return 0


def cmd_segment(args) -> int:
    config = _read_config(args.config)
    ckpt = resolve_resource(args.checkpoint)
    if ckpt is None:
        raise ResourceError(f"checkpoint {args.checkpoint} not found")
    image = _read_image(args.image)
    model, _, hyper, _ = load_checkpoint(ckpt)
    variant = parse_variant(_pick(args.variant, config, "variant", hyper.variant if hyper else "SEM-2-C-NEG"))
    backend = _backend(args)
    builder = _builder(args, backend, args.mapper, args.k, args.seed)
    gt = None
    if variant.first == "truth":
        if not args.gt_mask:
            raise ConfigurationError("--variant oracle needs --gt-mask")
        gt = read_mask_png(args.gt_mask)
    params = GrabCutParams(iterations=args.iterations)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        out = segment(image, args.label, model, builder, variant, params, gt_mask=gt,
                      grabcut=False if args.no_grabcut else None)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    write_mask_png(args.out, out.mask)
    if args.dump_saliency:
        d = Path(args.dump_saliency)
        maps = out.attention.maps
        h, w = out.mask.shape
        write_salmap(d / "positive.salmap", maps.get("first", np.zeros((h, w))))
        write_salmap(d / "negative.salmap", maps.get("second", np.zeros((h, w))))
    if args.dump_likelihood:
        d = Path(args.dump_likelihood)
        d.mkdir(parents=True, exist_ok=True)
        np.save(d / "likelihood.npy", out.likelihood)
    if args.dump_annotation and out.annotation is not None:
        write_annotation_png(Path(args.dump_annotation) / "annotation.png", out.annotation)
    print(f"{args.out}\t{out.mask.shape[1]}x{out.mask.shape[0]}\tforeground={int(out.mask.sum())}")
    return 0


def _train_setup(args, config):
    model_cfg = dict(config.get("model", {}))
    train_cfg = dict(config.get("train", {}))
    data = dict(config.get("data", {}))
    seed = _pick(args.seed, train_cfg, "seed", 0)
    train_cfg["seed"] = seed
    if args.steps is not None:
        train_cfg["steps"] = args.steps
    variant = parse_variant(_pick(args.variant, train_cfg, "variant", "SEM-2-C-NEG"))
    train_cfg["variant"] = variant.model_tag
    model_cfg["input_channels"] = variant.channels
    model_cfg["seed"] = seed
    corpus = _pick(getattr(args, "corpus", None), data, "corpus", "synthetic")
    backend_name = args.backend or data.get("backend") or ("fixture" if corpus == "synthetic" else "vgg19-imagenet1k")
    return ModelConfig(**model_cfg), TrainHyper.from_dict(train_cfg), data, corpus, backend_name, variant, seed


def cmd_train(args) -> int:
    config = _read_config(args.config or "tiny-synth")
    model_cfg, hyper, data, corpus, backend_name, variant, seed = _train_setup(args, config)
    args.backend = backend_name
    _seed_everything(seed)
    partition = _partition(args, corpus)
    model = build_model(model_cfg)
    out = Path(args.out)
    if hyper.steps == 0:
        path = save_checkpoint(out / "step-000000.pt", model, TrainState(), hyper, {"partition": partition.index})
        print(f"checkpoint\t{path}\tstep=0")
        return 0
    backend = _backend(args)
    builder = _builder(args, backend, args.mapper, args.k, seed)
    train_store, _ = _datasets(corpus, partition, data, seed, args)
    stream = sample_episodes(train_store, partition, "train", variant.model_tag, seed)
    state = train(model, TrainingExamples(stream, builder, variant.model_tag), hyper.steps, hyper, checkpoint_dir=out)
    first = np.mean(state.loss_history[:20])
    last = np.mean(state.loss_history[-20:])
    print(f"checkpoint\t{state.checkpoint_path}\tstep={state.step}\tloss {first:.4f} -> {last:.4f}")
    return 0


def cmd_eval(args) -> int:
    config = _read_config(args.config)
    data = dict(config.get("data", {}))
    ckpt = resolve_resource(args.checkpoint)
    if ckpt is None:
        raise ResourceError(f"checkpoint {args.checkpoint} not found")
    model, state, hyper, _ = load_checkpoint(ckpt)
    variant = parse_variant(args.variant or (hyper.variant if hyper else "SEM-2-C-NEG"))
    corpus = _pick(args.corpus, data, "corpus", "synthetic")
    seed = args.seed if args.seed is not None else 0
    args.backend = args.backend or data.get("backend") or ("fixture" if corpus == "synthetic" else "vgg19-imagenet1k")
    _seed_everything(seed)
    partition = _partition(args, corpus)
    backend = _backend(args)
    builder = _builder(args, backend, args.mapper, args.k, seed)
    _, test_store = _datasets(corpus, partition, data, seed, args)
    params = GrabCutParams(iterations=args.iterations)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        scores = evaluate_partition(model, test_store, partition, builder, variant, params, seed,
                                    args.workers, args.limit, args.overlays)
    report = MetricsReport(variant.tag, metadata={
        "seed": seed, "steps": state.step, "backbone": model.config.backbone, "checkpoint": str(ckpt),
        "corpus": corpus,
    })
    report.add(scores)
    tsv, js = report.write(args.report)
    sys.stdout.write(report.to_tsv())
    sys.stdout.write(format_summary([report]))
    print(f"# wrote {tsv} and {js}", file=sys.stderr)
    return 0


def cmd_synth(args) -> int:
    classes = tuple(args.classes.split(",")) if args.classes else SYNTH_CLASSES
    store = synth_shapes_corpus(args.n, args.seed, args.size, args.max_shapes, classes)
    save_corpus(store, args.out)
    print(f"{args.out}\t{len(store)} images\t{store.digest()}")
    return 0


def cmd_convert_sbd(args) -> int:
    n = convert_sbd(args.sbd, args.out, copy_images=not args.no_images)
    print(f"converted {n} images into {args.out}")
    return 0


def cmd_export_ontology(args) -> int:
    vocab = backend_vocabulary(_spec(args, "vgg19-imagenet1k"))
    ontology = load_ontology(args.wordnet) if args.wordnet else load_ontology()
    keep = set()
    for entry in vocab:
        keep.add(entry.synset_id)
        keep |= ontology.closure(entry.synset_id)
    for word in args.include or ():
        for sid in ontology.lookup(word):
            keep.add(sid)
            keep |= ontology.closure(sid)
    ontology.subset(keep).write_tsv(args.out)
    print(f"{args.out}\t{len(keep)} synsets")
    return 0


def cmd_compare_mappers(args) -> int:
    spec = _spec(args, "vgg19-imagenet1k")
    vocab = backend_vocabulary(spec)
    ontology = _ontology(spec, args)
    targets = args.targets or list(WORDNET_REFERENCE)
    words = {t for target in targets for t in tokenize_label(target).tokens}
    table = _table(args, vocab, words)
    rows = compare_mappers(targets, vocab, ontology, table, args.k)
    sys.stdout.write(format_comparison(rows, vocab))
    return 0


def cmd_cooccurrence(args) -> int:
    args.corpus = "voc"
    train_store, test_store = _datasets("voc", None, {}, 0, args)
    frac = cooccurrence([train_store, test_store], args.a, args.b)
    print(json.dumps({"a": args.a, "b": args.b, "fraction": frac}))
    return 0


# ---------------------------------------------------------------- parser


def _variant_arg(text):
    try:
        return parse_variant(text).tag
    except ConfigurationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lexseg", description="Segment unseen labels with a pretrained classifier.")
    parser.add_argument("--version", action="version", version=f"lexseg {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, mapper=True):
        p.add_argument("--backend", help="backend name (fixture, vgg19-imagenet1k) or backend YAML file")
        p.add_argument("--weights", help="classifier weights file")
        p.add_argument("--wordnet", help="WordNet dict directory or ontology TSV")
        p.add_argument("--embeddings", help="GloVe-format word vectors")
        if mapper:
            p.add_argument("--mapper", choices=MAPPERS, default="wordnet")
            p.add_argument("--k", type=_positive_int, default=5)
        p.add_argument("--seed", type=int)
        p.add_argument("--saliency-cache", help="directory for cached saliency maps")

    p = sub.add_parser("map-labels", help="print proxy labels for a target")
    p.add_argument("--label", required=True)
    p.add_argument("--image")
    common(p)
    p.set_defaults(func=cmd_map_labels)

    p = sub.add_parser("saliency", help="write positive and negative saliency maps")
    p.add_argument("--image", required=True)
    p.add_argument("--label", required=True)
    p.add_argument("--out-dir", required=True)
    common(p)
    p.set_defaults(func=cmd_saliency)

    p = sub.add_parser("segment", help="segment one label in one image")
    p.add_argument("--image", required=True)
    p.add_argument("--label", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--variant", type=_variant_arg)
    p.add_argument("--no-grabcut", action="store_true")
    p.add_argument("--gt-mask", help="ground-truth mask PNG (oracle variant)")
    p.add_argument("--iterations", type=_positive_int, default=5)
    p.add_argument("--dump-saliency")
    p.add_argument("--dump-likelihood")
    p.add_argument("--dump-annotation")
    p.add_argument("--config")
    common(p)
    p.set_defaults(func=cmd_segment)

    def data_opts(p):
        p.add_argument("--partition", type=int)
        p.add_argument("--partition-file")
        p.add_argument("--variant", type=_variant_arg)
        p.add_argument("--config")
        p.add_argument("--corpus", choices=("synthetic", "voc"))
        p.add_argument("--corpus-dir", help="saved synthetic corpus")
        p.add_argument("--voc-root")
        p.add_argument("--sbd-root", help="converted SBD directory")
        p.add_argument("--workers", type=_positive_int, default=os.cpu_count() or 1)

    p = sub.add_parser("train", help="train the segmentation network")
    data_opts(p)
    p.add_argument("--steps", type=int)
    p.add_argument("--out", required=True, help="checkpoint directory")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a partition")
    data_opts(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--report", required=True, help="report directory")
    p.add_argument("--limit", type=int)
    p.add_argument("--overlays", help="directory for image | truth | prediction PNGs")
    p.add_argument("--iterations", type=_positive_int, default=5)
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="write a synthetic shapes corpus")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=48)
    p.add_argument("--max-shapes", type=int, default=3)
    p.add_argument("--classes", help="comma-separated subset of the fixture colours")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("convert-sbd", help="convert SBD .mat annotations to per-class PNGs")
    p.add_argument("--sbd", required=True, help="the SBD release's dataset/ directory")
    p.add_argument("--out", required=True)
    p.add_argument("--no-images", action="store_true")
    p.set_defaults(func=cmd_convert_sbd)

    p = sub.add_parser("export-ontology", help="write the WordNet subset a vocabulary needs as TSV")
    p.add_argument("--out", required=True)
    p.add_argument("--include", nargs="*", help="extra words whose synsets to keep")
    common(p, mapper=False)
    p.set_defaults(func=cmd_export_ontology)

    p = sub.add_parser("compare-mappers", help="WordNet vs word-vector proxies against reference lists")
    p.add_argument("--targets", nargs="*")
    common(p)
    p.set_defaults(func=cmd_compare_mappers)

    p = sub.add_parser("cooccurrence", help="fraction of images with label A that also contain B")
    p.add_argument("a", choices=VOC_CLASSES)
    p.add_argument("b", choices=VOC_CLASSES)
    p.add_argument("--voc-root")
    p.add_argument("--sbd-root")
    p.set_defaults(func=cmd_cooccurrence)
    return parser


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    # per-sample warnings repeat across a training run; show each message once
    warnings.filterwarnings("once", category=LexsegWarning)
    workers = getattr(args, "workers", None)
    if workers and workers > 1:
        # image-level threads already fill the cores
        torch.set_num_threads(max(1, (os.cpu_count() or 1) // workers))
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"lexseg {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (LexsegError, OSError, ValueError, KeyError) as exc:
        print(f"lexseg {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
