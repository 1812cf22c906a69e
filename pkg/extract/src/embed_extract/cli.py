"""The extract command: raw JSON-lines text in, EMB1 + index files out.

Exit codes mirror the downstream tooling: 0 success, 1 validation
failure with a JSON diagnostic on stderr, 2 usage error.
"""

import argparse
import json
import sys

from .encoders import EncoderLoadError, load_encoder
from .extract import run_extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="extract",
        description="Sentence-split and encode a raw text corpus into embedding files.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument(
        "--in", dest="infile", required=True, help="JSON lines {doc_id, label, text}"
    )
    parser.add_argument(
        "--out", required=True, help="output prefix (.emb + .index.jsonl)"
    )
    parser.add_argument(
        "--min-sentences", type=int, default=2, help="drop shorter documents"
    )
    parser.add_argument(
        "--encoder", default="hash:768", help="hash[:dim] or sbert:<model>"
    )
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else int(exc.code)
    try:
        encoder = load_encoder(args.encoder)
        summary = run_extract(
            args.infile,
            args.out,
            encoder,
            min_sentences=args.min_sentences,
            log=lambda msg: print(msg, file=sys.stderr),
        )
    except (EncoderLoadError, ValueError, OSError) as exc:
        json.dump({"error": type(exc).__name__, "detail": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    print(json.dumps(summary))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
