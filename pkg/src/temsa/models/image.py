"""Frozen image backbones, the augmentation pipeline, and the image-side
sentiment classifier (backbone features into the dense-1024 head)."""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from .heads import ClassifyHead, HeadConfig

IMAGE_SIZE = 224
IMAGE_BACKBONES = ("vgg16", "vgg19", "resnet50", "vit")
BACKBONE_DIMS = {"vgg16": 4096, "vgg19": 4096, "resnet50": 2048, "vit": 768}
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

# Raw transforms usable on any (H, W, C) array; the augmentation entry point
# below additionally enforces the 224x224 input contract.
TRANSFORMS = {
    "identity": lambda img: img,
    "flip_lr": np.fliplr,
    "flip_tb": np.flipud,
    "rot90": lambda img: np.rot90(img, 1, axes=(0, 1)),
    "rot180": lambda img: np.rot90(img, 2, axes=(0, 1)),
    "rot270": lambda img: np.rot90(img, 3, axes=(0, 1)),
}
TRANSFORM_ORDER = ("identity", "flip_lr", "flip_tb", "rot90", "rot180", "rot270")


def image_augment(img: np.ndarray, rng: np.random.Generator | int) -> np.ndarray:
    """Apply one transform chosen uniformly from the six (identity, both
    flips, three rotations) using the given seeded stream."""
    img = np.asarray(img)
    if img.shape[:2] != (IMAGE_SIZE, IMAGE_SIZE):
        raise ValueError(f"augmentation expects {IMAGE_SIZE}x{IMAGE_SIZE} "
                         f"images, got shape {img.shape}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    name = TRANSFORM_ORDER[int(rng.integers(len(TRANSFORM_ORDER)))]
    return np.ascontiguousarray(TRANSFORMS[name](img))


def build_backbone(kind: str, pretrained: bool = False) -> tuple[nn.Module, int]:
    """A feature extractor with its classification layer cut off, frozen and
    locked in eval mode; returns (module, feature_dim)."""
    from torchvision import models
    weights = "IMAGENET1K_V1" if pretrained else None
    if kind == "vgg16":
        net = models.vgg16(weights=weights)
        net.classifier[-1] = nn.Identity()
    elif kind == "vgg19":
        net = models.vgg19(weights=weights)
        net.classifier[-1] = nn.Identity()
    elif kind == "resnet50":
        net = models.resnet50(weights=weights)
        net.fc = nn.Identity()
    elif kind == "vit":
        net = models.vit_b_16(weights=weights)
        net.heads = nn.Identity()
    else:
        raise ValueError(f"unknown image backbone {kind!r}; "
                         f"choose from {IMAGE_BACKBONES}")
    net.requires_grad_(False)
    net.eval()
    return net, BACKBONE_DIMS[kind]


class ImageClassifier(nn.Module):
    """Frozen backbone, then dense 1024 (relu, or gelu for the ViT variant),
    dropout, softmax over three classes.  Only the head trains."""

    def __init__(self, backbone_kind: str, pretrained: bool = False,
                 dropout: float = 0.1):
        super().__init__()
        self.backbone_kind = backbone_kind
        backbone, feat_dim = build_backbone(backbone_kind, pretrained=pretrained)
        self.backbone = backbone
        activation = "gelu" if backbone_kind == "vit" else "relu"
        self.head = ClassifyHead(HeadConfig(in_dim=feat_dim, activation=activation,
                                            dropout=dropout))

    def train(self, mode: bool = True):
        # The backbone never leaves eval mode: its dropout/batch-norm layers
        # must behave identically during training and inference.
        super().train(mode)
        self.backbone.eval()
        return self

    @staticmethod
    def prepare_batch(batch: np.ndarray) -> torch.Tensor:
        """uint8 (B, H, W, C) images to normalized float (B, C, H, W)."""
        arr = np.asarray(batch)
        if arr.ndim != 4 or arr.shape[-1] != 3:
            raise ValueError(f"expected (B, H, W, 3) image batch, got {arr.shape}")
        x = torch.from_numpy(np.ascontiguousarray(arr)).float() / 255.0
        x = x.permute(0, 3, 1, 2)
        mean = torch.tensor(IMAGENET_MEAN).view(1, 3, 1, 1)
        std = torch.tensor(IMAGENET_STD).view(1, 3, 1, 1)
        return (x - mean) / std

    def features(self, x: torch.Tensor) -> torch.Tensor:
        with torch.no_grad():
            return self.backbone(x)

    def forward_logits(self, x: torch.Tensor) -> torch.Tensor:
        return self.head.forward_logits(self.features(x))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.softmax(self.forward_logits(x), dim=-1)
