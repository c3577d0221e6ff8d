"""Run a backbone over a manifest and write the embedding file.

Images are encoded in manifest order in fixed-size batches, so extraction
is deterministic given the same weights and inputs. The DSE1 file is
written atomically, and a plain-text sidecar manifest (``<out>.manifest.txt``)
records the backbone, its pooling choice, the preprocessing, and the shapes,
so an embedding file never travels without its provenance.
"""

import numpy as np

from .backbones import create_backbone
from .dse1 import write_dse1
from .manifest import ExtractManifest
from .preprocess import CHANNEL_MEAN, CHANNEL_STD, IMAGE_SIZE, load_batch

BATCH_SIZE = 32


def extract(manifest: ExtractManifest) -> str:
    """Encode every listed image, write the DSE1 file, return the sidecar path."""
    backbone = create_backbone(manifest.backbone)
    info = backbone.info()

    rows = []
    paths = [img.path for img in manifest.images]
    for start in range(0, len(paths), BATCH_SIZE):
        rows.append(backbone.encode(load_batch(paths[start : start + BATCH_SIZE])))
    embeddings = np.concatenate(rows, axis=0)
    if embeddings.shape[1] != info.d_emb:
        raise RuntimeError(
            f"backbone {info.identifier} produced width {embeddings.shape[1]}, "
            f"declared {info.d_emb}"
        )

    write_dse1(list(manifest.images), embeddings, manifest.out_path)

    sidecar = manifest.out_path + ".manifest.txt"
    entries = [
        ("command", "extract"),
        ("backbone", info.identifier),
        ("weights", info.weights),
        ("pooling", info.pooling),
        ("d_emb", info.d_emb),
        ("resize", f"{IMAGE_SIZE}x{IMAGE_SIZE} bilinear"),
        ("normalize_mean", ",".join(f"{v:.3f}" for v in CHANNEL_MEAN)),
        ("normalize_std", ",".join(f"{v:.3f}" for v in CHANNEL_STD)),
        ("image_root", manifest.image_root),
        ("labels", manifest.label_path),
        ("n_records", len(manifest.images)),
        ("output", manifest.out_path),
    ]
    with open(sidecar, "w", encoding="utf-8") as f:
        for key, value in entries:
            f.write(f"{key} = {value}\n")
    return sidecar
