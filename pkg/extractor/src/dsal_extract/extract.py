"""Run a frozen backbone over an image dataset and write phase-split embeddings.

The backbone's classification head is replaced with identity so each image
maps to its flattened penultimate feature vector. No training, no
augmentation; inference only.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn
from torch.utils.data import DataLoader
from torchvision import datasets, models, transforms

from .formats import write_embeddings, write_labels, write_manifest

log = logging.getLogger("dsal_extract")

_IMAGENET_MEAN = (0.485, 0.456, 0.406)
_IMAGENET_STD = (0.229, 0.224, 0.225)
_CIFAR_MEAN = (0.5071, 0.4865, 0.4409)
_CIFAR_STD = (0.2673, 0.2564, 0.2762)

BACKBONES = {
    "resnet18": models.resnet18,
    "resnet34": models.resnet34,
    "resnet50": models.resnet50,
}

PREPROCESSING = {
    "imagenet": transforms.Compose([
        transforms.Resize(256),
        transforms.CenterCrop(224),
        transforms.ToTensor(),
        transforms.Normalize(_IMAGENET_MEAN, _IMAGENET_STD),
    ]),
    "cifar": transforms.Compose([
        transforms.ToTensor(),
        transforms.Normalize(_CIFAR_MEAN, _CIFAR_STD),
    ]),
    "none": transforms.ToTensor(),
}


@dataclass(frozen=True)
class ExtractionSpec:
    """What to extract and how to split the classes into phases."""

    dataset: str
    backbone: str
    out_dir: str | Path
    base_fraction: float = 0.5
    phases: int = 0
    preprocessing: str = "imagenet"
    seed: int = 0
    pretrained: bool = True
    batch_size: int = 64
    dataset_root: str | Path = "data"
    download: bool = False
    # geometry of the synthetic image dataset used for demos and tests
    fake_classes: int = 10
    fake_train: int = 200
    fake_test: int = 50
    fake_image_size: int = 32

    def __post_init__(self):
        if not 0.0 < self.base_fraction <= 1.0:
            raise ValueError("base_fraction must be in (0, 1]")
        if self.phases < 0:
            raise ValueError("phases must be nonnegative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")


def _build_transform(spec: ExtractionSpec):
    try:
        return PREPROCESSING[spec.preprocessing]
    except KeyError:
        raise ValueError(
            f"unknown preprocessing {spec.preprocessing!r}; "
            f"choose from {sorted(PREPROCESSING)}"
        ) from None


def _build_datasets(spec: ExtractionSpec, transform) -> tuple[dict, int]:
    """Return {split: dataset} plus the declared class count."""
    if spec.dataset == "fake":
        # deterministic synthetic images; the test split continues the
        # index stream via random_offset so the two splits differ
        train = datasets.FakeData(
            size=spec.fake_train, image_size=(3, spec.fake_image_size, spec.fake_image_size),
            num_classes=spec.fake_classes, transform=transform,
        )
        test = datasets.FakeData(
            size=spec.fake_test, image_size=(3, spec.fake_image_size, spec.fake_image_size),
            num_classes=spec.fake_classes, transform=transform,
            random_offset=spec.fake_train,
        )
        return {"train": train, "test": test}, spec.fake_classes
    if spec.dataset == "cifar100":
        root = str(spec.dataset_root)
        train = datasets.CIFAR100(root, train=True, transform=transform,
                                  download=spec.download)
        test = datasets.CIFAR100(root, train=False, transform=transform,
                                 download=spec.download)
        return {"train": train, "test": test}, 100
    if spec.dataset == "imagefolder":
        root = Path(spec.dataset_root)
        splits = {}
        for name in ("train", "test", "val"):
            if (root / name).is_dir():
                splits[name] = datasets.ImageFolder(root / name, transform=transform)
        if not splits:
            raise FileNotFoundError(
                f"no train/test/val directories under {root}"
            )
        counts = {len(ds.classes) for ds in splits.values()}
        if len(counts) != 1:
            raise ValueError("splits disagree on the class count")
        return splits, counts.pop()
    raise ValueError(
        f"unknown dataset {spec.dataset!r}; choose fake, cifar100, or imagefolder"
    )


def _build_backbone(spec: ExtractionSpec) -> nn.Module:
    try:
        builder = BACKBONES[spec.backbone]
    except KeyError:
        raise ValueError(
            f"unsupported backbone {spec.backbone!r}; choose from {sorted(BACKBONES)}"
        ) from None
    if spec.pretrained:
        model = builder(weights="DEFAULT")
    else:
        # frozen random features; seeded so reruns are byte-identical
        torch.manual_seed(spec.seed)
        model = builder(weights=None)
    model.fc = nn.Identity()
    model.eval()
    for p in model.parameters():
        p.requires_grad_(False)
    return model


def split_classes(n_classes: int, base_fraction: float, phases: int,
                  seed: int) -> list[list[int]]:
    """Assign class ids to phases: a base block, then even increments.

    Deterministic given the seed (ids are permuted once, then cut).
    """
    if n_classes < 1:
        raise ValueError("need at least one class")
    order = [int(c) for c in np.random.default_rng(seed).permutation(n_classes)]
    base = int(round(base_fraction * n_classes))
    base = max(1, min(base, n_classes))
    if base == n_classes:
        return [order]
    remaining = n_classes - base
    if phases < 1 or remaining % phases != 0:
        raise ValueError(
            f"{phases} phases cannot evenly split the {remaining} classes "
            "left after the base phase"
        )
    step = remaining // phases
    out = [order[:base]]
    for k in range(phases):
        out.append(order[base + k * step: base + (k + 1) * step])
    return out


def _forward_split(model: nn.Module, dataset, batch_size: int):
    loader = DataLoader(dataset, batch_size=batch_size, shuffle=False,
                        num_workers=0)
    feats, labels = [], []
    with torch.no_grad():
        for images, targets in loader:
            out = model(images)
            feats.append(out.to(torch.float32).numpy())
            labels.append(np.asarray(targets, dtype=np.int64))
    features = np.concatenate(feats) if feats else np.zeros((0, 0), np.float32)
    return features, np.concatenate(labels) if labels else np.zeros(0, np.int64)


def extract(spec: ExtractionSpec) -> dict:
    """Extract features and write one manifest per dataset split.

    Returns a summary with manifest paths and the class split. Rows within
    a phase are grouped by class in assignment order, preserving dataset
    order inside each class.
    """
    transform = _build_transform(spec)
    split_datasets, n_classes = _build_datasets(spec, transform)
    phase_classes = split_classes(n_classes, spec.base_fraction, spec.phases,
                                  spec.seed)
    model = _build_backbone(spec)
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    manifests = {}
    for split_name, dataset in split_datasets.items():
        features, labels = _forward_split(model, dataset, spec.batch_size)
        log.info("%s: %d rows, %d features", split_name, *features.shape)
        entries = []
        for idx, class_ids in enumerate(phase_classes):
            rows = np.concatenate(
                [np.flatnonzero(labels == c) for c in class_ids]
            ) if class_ids else np.zeros(0, np.int64)
            emb_name = f"{split_name}_phase{idx:03d}.dsal"
            lbl_name = f"{split_name}_phase{idx:03d}.dslb"
            write_embeddings(out_dir / emb_name, features[rows])
            write_labels(out_dir / lbl_name, labels[rows])
            entries.append({
                "embeddings": emb_name,
                "labels": lbl_name,
                "classes": [int(c) for c in class_ids],
            })
        manifest_path = out_dir / f"{split_name}_manifest.json"
        write_manifest(manifest_path, split_name, entries)
        manifests[split_name] = str(manifest_path)

    return {
        "manifests": manifests,
        "classes_per_phase": [len(c) for c in phase_classes],
        "phase_classes": [[int(c) for c in ids] for ids in phase_classes],
        "feature_width": int(features.shape[1]) if features.size else 0,
    }
