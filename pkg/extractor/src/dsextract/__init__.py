"""Export pooled vision-encoder embeddings of labeled face images to DSE1 files."""

from .backbones import (
    DEFAULT_BACKBONE,
    BackboneInfo,
    BackboneUnavailableError,
    ClipVisionEncoder,
    SeededPatchEncoder,
    backbone_identifiers,
    create_backbone,
)
from .dse1 import write_dse1
from .extract import extract
from .manifest import ExtractManifest, LabeledImage, LabelError, load_manifest
from .preprocess import CHANNEL_MEAN, CHANNEL_STD, IMAGE_SIZE, load_batch, load_image

__all__ = [
    "BackboneInfo",
    "BackboneUnavailableError",
    "CHANNEL_MEAN",
    "CHANNEL_STD",
    "ClipVisionEncoder",
    "DEFAULT_BACKBONE",
    "ExtractManifest",
    "IMAGE_SIZE",
    "LabelError",
    "LabeledImage",
    "SeededPatchEncoder",
    "backbone_identifiers",
    "create_backbone",
    "extract",
    "load_batch",
    "load_image",
    "load_manifest",
    "write_dse1",
]
