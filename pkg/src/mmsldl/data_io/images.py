"""Image-folder datasets: ``root/<class_name>/*.png|jpg|pgm``."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..errors import DatasetError, InvalidInputError
from ..transforms import ImagePlane

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".pgm", ".ppm", ".bmp", ".tif", ".tiff"}


@dataclass
class DatasetManifest:
    root: Path
    classes: dict
    geometry: tuple
    checksum: str

    @property
    def class_names(self):
        return list(self.classes)


@dataclass
class LabeledDataset:
    """Column-stacked views sharing one sorted label vector."""

    views: list
    labels: np.ndarray
    class_names: list = field(default_factory=list)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=int)
        if self.labels.size and np.any(np.diff(self.labels) < 0):
            raise InvalidInputError("LabeledDataset labels must be sorted; use LabeledDataset.from_unsorted")
        for X in self.views:
            if X.shape[1] != self.labels.size:
                raise InvalidInputError("every view needs one column per label")
        if not self.class_names:
            C = int(self.labels.max()) + 1 if self.labels.size else 0
            self.class_names = [str(c) for c in range(C)]

    @classmethod
    def from_unsorted(cls, views, labels, class_names=None):
        labels = np.asarray(labels, dtype=int)
        order = np.argsort(labels, kind="stable")
        return cls([np.asarray(X, dtype=float)[:, order] for X in views], labels[order], list(class_names or []))

    @property
    def n_classes(self):
        return len(self.class_names)

    @property
    def per_class_counts(self):
        return np.bincount(self.labels, minlength=self.n_classes)

    def subset(self, idx):
        idx = np.asarray(idx, dtype=int)
        return LabeledDataset.from_unsorted([X[:, idx] for X in self.views], self.labels[idx], self.class_names)


def build_manifest(root, geometry=(32, 32)):
    """List ``root`` deterministically; class ids follow lexicographic class names."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root not found: {root}")
    classes = {}
    digest = hashlib.sha256()
    for cdir in sorted(p for p in root.iterdir() if p.is_dir()):
        files = sorted(p for p in cdir.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)
        if not files:
            raise DatasetError(f"class {cdir.name!r} has no images in {cdir}")
        classes[cdir.name] = files
        for f in files:
            digest.update(str(f.relative_to(root)).encode())
            digest.update(f.read_bytes())
    if not classes:
        raise DatasetError(f"no class directories under {root}")
    return DatasetManifest(root, classes, tuple(geometry), digest.hexdigest())


def decode_image(path, geometry=None):
    """Decode to an ImagePlane in [0, 1]; gray stays single-channel, anything else becomes RGB."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"missing image file: {path}")
    try:
        with Image.open(path) as im:
            im.load()
            mode = "L" if im.mode in ("L", "I", "I;16", "F", "1", "P") and _is_gray(im) else "RGB"
            im = im.convert(mode)
            if geometry is not None:
                h, w = geometry
                im = im.resize((w, h), Image.BILINEAR)
            px = np.asarray(im, dtype=float) / 255.0
    except (UnidentifiedImageError, OSError) as exc:
        offset = getattr(exc, "offset", None)
        where = f" at byte {offset}" if offset is not None else ""
        raise DatasetError(f"cannot decode image {path}{where}: {exc}") from exc
    return ImagePlane(np.clip(px, 0.0, 1.0))


def _is_gray(im):
    if im.mode != "P":
        return True
    pal = np.asarray(im.convert("RGB"))
    return bool(np.all(pal[..., 0] == pal[..., 1]) and np.all(pal[..., 1] == pal[..., 2]))


def load_dataset(manifest, geometry=None):
    """Decode every image of ``manifest``; returns ``{class_name: [ImagePlane, ...]}``."""
    geometry = geometry or manifest.geometry
    return {name: [decode_image(f, geometry) for f in files] for name, files in manifest.classes.items()}


def images_to_views(images_by_class, transforms):
    """Apply each modality transform to every image, producing a sorted LabeledDataset."""
    names = list(images_by_class)
    views = [[] for _ in transforms]
    labels = []
    for c, name in enumerate(names):
        for img in images_by_class[name]:
            for k, t in enumerate(transforms):
                views[k].append(t(img))
            labels.append(c)
    return LabeledDataset([np.column_stack(v) for v in views], np.array(labels), names)
