"""Pascal VOC and SBD ingestion, SBD conversion and label co-occurrence."""

from __future__ import annotations

import shutil
from pathlib import Path

import numpy as np
from PIL import Image

from lexseg.dataset.partitions import VOC_CLASSES
from lexseg.dataset.store import PaletteMask, PerClassPNGMasks, Sample, SampleStore
from lexseg.errors import ResourceError, UndefinedFractionError

VOC_LAYOUT = """expected VOC layout under {root}:
  JPEGImages/<id>.jpg
  SegmentationClass/<id>.png
  ImageSets/Segmentation/train.txt
  ImageSets/Segmentation/val.txt"""

SBD_LAYOUT = """expected converted SBD layout under {root}:
  index.txt                 one image id per line
  masks/<class>/<id>.png    binary mask per present class
  images/<id>.jpg           (optional, falls back to VOC JPEGImages)
run `lexseg convert-sbd` on the original SBD release to produce it"""


def _read_ids(path: Path) -> list[str]:
    return [line.strip() for line in path.read_text().splitlines() if line.strip()]


def _check_voc(voc_root: Path) -> None:
    needed = [voc_root / "JPEGImages", voc_root / "SegmentationClass",
              voc_root / "ImageSets/Segmentation/train.txt", voc_root / "ImageSets/Segmentation/val.txt"]
    if not all(p.exists() for p in needed):
        raise ResourceError(VOC_LAYOUT.format(root=voc_root))


def load_voc_split(voc_root, split: str, classes=VOC_CLASSES) -> SampleStore:
    """VOC segmentation split with labels read from the class PNGs."""
    voc_root = Path(voc_root)
    _check_voc(voc_root)
    samples = []
    for image_id in _read_ids(voc_root / f"ImageSets/Segmentation/{split}.txt"):
        png = voc_root / "SegmentationClass" / f"{image_id}.png"
        with Image.open(png) as im:
            values = np.unique(np.asarray(im))
        labels = frozenset(classes[v - 1] for v in values if 1 <= v <= len(classes))
        samples.append(Sample(image_id, labels, PaletteMask(png, tuple(classes)),
                              voc_root / "JPEGImages" / f"{image_id}.jpg"))
    return SampleStore(samples, f"voc-{split}")


def load_converted_sbd(sbd_root, voc_root=None, classes=VOC_CLASSES) -> SampleStore:
    sbd_root = Path(sbd_root)
    index = sbd_root / "index.txt"
    if not index.is_file() or not (sbd_root / "masks").is_dir():
        raise ResourceError(SBD_LAYOUT.format(root=sbd_root))
    paths: dict[str, dict] = {}
    for cls in classes:
        d = sbd_root / "masks" / cls
        if d.is_dir():
            for png in d.glob("*.png"):
                paths.setdefault(png.stem, {})[cls] = png
    samples = []
    for image_id in _read_ids(index):
        img = sbd_root / "images" / f"{image_id}.jpg"
        if not img.is_file() and voc_root is not None:
            img = Path(voc_root) / "JPEGImages" / f"{image_id}.jpg"
        masks = paths.get(image_id, {})
        samples.append(Sample(image_id, frozenset(masks), PerClassPNGMasks(masks), img))
    return SampleStore(samples, "sbd")


def ingest_voc_sbd(voc_root, sbd_root=None, classes=VOC_CLASSES) -> tuple[SampleStore, SampleStore]:
    """``(train, test)``: train is SBD plus VOC-train minus every VOC-val id; test is VOC-val.

    Where an id is in both SBD and VOC-train, the VOC annotation is kept.
    """
    train = load_voc_split(voc_root, "train", classes)
    test = load_voc_split(voc_root, "val", classes)
    if sbd_root is not None:
        train = train.merged(load_converted_sbd(sbd_root, voc_root, classes), "train")
    return train.without(test.ids), test


def convert_sbd(sbd_dataset_dir, out_dir, classes=VOC_CLASSES, copy_images: bool = True) -> int:
    """Turn SBD's ``cls/*.mat`` annotations into per-class PNG masks.

    Returns the number of converted images.
    """
    from scipy.io import loadmat

    src, out = Path(sbd_dataset_dir), Path(out_dir)
    cls_dir = src / "cls"
    if not cls_dir.is_dir():
        raise ResourceError(f"expected SBD annotations in {cls_dir} (the release's dataset/ folder)")
    ids = []
    for mat in sorted(cls_dir.glob("*.mat")):
        seg = np.asarray(loadmat(mat, squeeze_me=True, struct_as_record=False)["GTcls"].Segmentation)
        for v in np.unique(seg):
            if 1 <= v <= len(classes):
                d = out / "masks" / classes[v - 1]
                d.mkdir(parents=True, exist_ok=True)
                Image.fromarray(((seg == v) * 255).astype(np.uint8), mode="L").save(d / f"{mat.stem}.png")
        if copy_images and (src / "img" / f"{mat.stem}.jpg").is_file():
            (out / "images").mkdir(parents=True, exist_ok=True)
            shutil.copy2(src / "img" / f"{mat.stem}.jpg", out / "images" / f"{mat.stem}.jpg")
        ids.append(mat.stem)
    out.mkdir(parents=True, exist_ok=True)
    (out / "index.txt").write_text("".join(f"{i}\n" for i in ids))
    return len(ids)


def cooccurrence(stores, a: str, b: str) -> float:
    """Fraction of images containing ``a`` that also contain ``b``.

    ``stores`` is one :class:`SampleStore` or several; images are counted
    once per id.
    """
    if isinstance(stores, SampleStore):
        stores = [stores]
    seen: dict[str, frozenset] = {}
    for store in stores:
        for s in store:
            seen.setdefault(s.image_id, s.labels)
    with_a = [labels for labels in seen.values() if a in labels]
    if not with_a:
        raise UndefinedFractionError(f"no image contains {a!r}")
    return sum(b in labels for labels in with_a) / len(with_a)
