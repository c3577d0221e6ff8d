"""Writer for the DSE1 embedding container.

The layout is the one the dsid package reads: a 16-byte header (magic
"DSE1", version 1, record count, embedding width), then per record a u16
subject, u8 true label, u8 disguised label, u8 frame type, three zero pad
bytes, and the embedding as little-endian float32. This module only writes;
reading stays on the consumer side of the format boundary.
"""

import os
import struct
import tempfile

import numpy as np

from .manifest import LabeledImage

DSE1_MAGIC = b"DSE1"
DSE1_VERSION = 1
_HEADER = struct.Struct("<III")
_RECORD_FIXED = struct.Struct("<HBBB3s")


def write_dse1(images: list[LabeledImage], embeddings: np.ndarray, path: str) -> None:
    """Write one record per labeled image, atomically (temp file + rename)."""
    if not images:
        raise ValueError("refusing to write an empty embedding file")
    emb = np.ascontiguousarray(embeddings, dtype="<f4")
    if emb.ndim != 2 or emb.shape[0] != len(images):
        raise ValueError(
            f"embedding matrix shape {emb.shape} does not match {len(images)} records"
        )
    d_emb = emb.shape[1]
    if d_emb == 0:
        raise ValueError("embedding width must be positive")

    chunks = [DSE1_MAGIC, _HEADER.pack(DSE1_VERSION, len(images), d_emb)]
    for img, row in zip(images, emb):
        chunks.append(
            _RECORD_FIXED.pack(
                img.subject, img.true_label, img.disguised_label, img.frame_type, b"\x00\x00\x00"
            )
        )
        chunks.append(row.tobytes())

    out_dir = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".dse1-", dir=out_dir)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(b"".join(chunks))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
