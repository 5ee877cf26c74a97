"""vidextract command line.

    vidextract extract --manifest m.jsonl --videos-root dir \
        --encoder siglip-base --out features.vaeb --frames 16 --batch 64

Exit codes: 0 success, 1 usage error, 2 extraction/data error.
"""

from __future__ import annotations

import argparse
import sys

from .decode import DecodeError
from .encoders import EncoderError, available_encoders
from .extract import ExtractError, ExtractJob, extract_all
from .manifest import ManifestFormatError


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{message}\n{self.format_usage()}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="vidextract", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    p = sub.add_parser("extract", help="extract clip embeddings into a VAEB store")
    p.add_argument("--manifest", required=True)
    p.add_argument("--videos-root", required=True, dest="videos_root")
    p.add_argument("--encoder", required=True,
                   help=f"encoder id ({', '.join(available_encoders())})")
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=16,
                   help="frames sampled per clip for image encoders")
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--device", default=None, help="device hint, e.g. cpu or cuda")
    p.add_argument("--frame-dump", dest="frame_dump", default=None,
                   help="directory for per-clip frame-feature debug dumps")
    p.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command != "extract":
            raise _UsageError(parser.format_usage())
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:
        return int(exc.code or 0)
    job = ExtractJob(
        manifest_path=args.manifest,
        encoder_id=args.encoder,
        out_path=args.out,
        videos_root=args.videos_root,
        frames=args.frames,
        batch_size=args.batch,
        device=args.device,
        frame_dump_dir=args.frame_dump,
    )
    try:
        extracted, skipped = extract_all(job)
    except (ExtractError, DecodeError, EncoderError, ManifestFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if not args.quiet:
        print(f"extracted {extracted} clips ({skipped} skipped) to {args.out}",
              file=sys.stderr)
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
