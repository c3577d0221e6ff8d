"""Extraction manifests: a label CSV resolved against an image directory.

The CSV has a fixed header ``path,subject,true_label,disguised_label,
frame_type`` and one row per image. Paths are resolved relative to the image
root (absolute paths pass through). Every invariant violation aborts with
the 1-based CSV line number; a missing image aborts with its resolved path.
"""

import os
from dataclasses import dataclass

N_CLASSES = 6

_CSV_HEADER = ["path", "subject", "true_label", "disguised_label", "frame_type"]
_FRAME_NAMES = {"onset": 0, "apex": 1}


class LabelError(ValueError):
    """Malformed label CSV or a label invariant violation."""


@dataclass(frozen=True)
class LabeledImage:
    path: str  # resolved, existing image file
    subject: int
    true_label: int
    disguised_label: int
    frame_type: int  # 0 = onset, 1 = apex


@dataclass(frozen=True)
class ExtractManifest:
    image_root: str
    label_path: str
    backbone: str
    out_path: str
    images: tuple[LabeledImage, ...]


def _parse_row(lineno: int, cells: list[str], image_root: str) -> LabeledImage:
    try:
        subject = int(cells[1])
        true_label = int(cells[2])
        disguised_label = int(cells[3])
    except ValueError as exc:
        raise LabelError(f"line {lineno}: non-integer label field") from exc
    if not 0 <= subject <= 0xFFFF:
        raise LabelError(f"line {lineno}: subject {subject} outside u16 range")
    for name, v in (("true_label", true_label), ("disguised_label", disguised_label)):
        if not 0 <= v < N_CLASSES:
            raise LabelError(f"line {lineno}: {name} {v} out of range [0, {N_CLASSES})")
    if true_label == disguised_label:
        raise LabelError(
            f"line {lineno}: labels coincide: true_label == disguised_label == {true_label}"
        )
    frame_name = cells[4].strip().lower()
    if frame_name not in _FRAME_NAMES:
        raise LabelError(f"line {lineno}: unknown frame_type {cells[4]!r}")
    rel = cells[0].strip()
    if not rel:
        raise LabelError(f"line {lineno}: empty image path")
    return LabeledImage(
        path=os.path.join(image_root, rel),
        subject=subject,
        true_label=true_label,
        disguised_label=disguised_label,
        frame_type=_FRAME_NAMES[frame_name],
    )


def load_manifest(image_root: str, label_path: str, backbone: str, out_path: str) -> ExtractManifest:
    with open(label_path, "r", encoding="utf-8") as f:
        lines = [ln.rstrip("\n") for ln in f]
    lines = [(i + 1, ln) for i, ln in enumerate(lines) if ln.strip() != ""]
    if not lines:
        raise LabelError("empty label file")
    header_no, header_line = lines[0]
    header = [c.strip() for c in header_line.split(",")]
    if header != _CSV_HEADER:
        raise LabelError(
            f"line {header_no}: bad header, expected {','.join(_CSV_HEADER)}"
        )

    images: list[LabeledImage] = []
    seen: dict[str, int] = {}
    for lineno, line in lines[1:]:
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != len(_CSV_HEADER):
            raise LabelError(
                f"line {lineno}: expected {len(_CSV_HEADER)} columns, got {len(cells)}"
            )
        img = _parse_row(lineno, cells, image_root)
        # one record per image: a duplicate path is inconsistent data even
        # when the labels happen to agree
        if img.path in seen:
            raise LabelError(
                f"line {lineno}: duplicate image path {img.path} (first listed on line {seen[img.path]})"
            )
        seen[img.path] = lineno
        if not os.path.isfile(img.path):
            raise FileNotFoundError(f"image not found: {img.path}")
        images.append(img)
    if not images:
        raise LabelError("no data rows")
    return ExtractManifest(
        image_root=image_root,
        label_path=label_path,
        backbone=backbone,
        out_path=out_path,
        images=tuple(images),
    )
