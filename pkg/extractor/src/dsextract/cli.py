"""Command-line front end.

Exit codes match the consumer package's convention: 0 success, 1 I/O or
environment failure (missing files, unobtainable weights), 2 invalid
arguments, 3 malformed label data.
"""

import argparse
import sys

from .backbones import (
    DEFAULT_BACKBONE,
    BackboneUnavailableError,
    backbone_identifiers,
)
from .extract import extract
from .manifest import LabelError, load_manifest

EXIT_OK = 0
EXIT_IO = 1
EXIT_USAGE = 2
EXIT_DATA = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dse-extract",
        description="Export pooled vision-encoder embeddings of labeled images to a DSE1 file.",
    )
    parser.add_argument("--images", help="image root directory")
    parser.add_argument("--labels", help="label CSV (path,subject,true_label,disguised_label,frame_type)")
    parser.add_argument("--out", help="output DSE1 path")
    parser.add_argument(
        "--backbone",
        default=DEFAULT_BACKBONE,
        help=f"encoder identifier (default: {DEFAULT_BACKBONE})",
    )
    parser.add_argument(
        "--list-backbones", action="store_true", help="print known encoder identifiers and exit"
    )
    return parser


def run(argv: list[str]) -> int:
    args = build_parser().parse_args(argv)
    if args.list_backbones:
        for identifier in backbone_identifiers():
            print(identifier)
        return EXIT_OK
    missing = [flag for flag, v in (("--images", args.images), ("--labels", args.labels), ("--out", args.out)) if not v]
    if missing:
        print(f"error: missing required arguments: {', '.join(missing)}", file=sys.stderr)
        return EXIT_USAGE

    try:
        manifest = load_manifest(args.images, args.labels, args.backbone, args.out)
        sidecar = extract(manifest)
    except LabelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BackboneUnavailableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {manifest.out_path} ({len(manifest.images)} records); manifest {sidecar}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    return run(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
