"""`adapter serve` and `adapter features` entry points."""
from __future__ import annotations

import argparse
import sys

from .features import export_features, resolve_extractor
from .serve import AdapterConfig, serve


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="adapter",
        description="Serve a segmentation model over the framed stdin/stdout protocol.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="answer framed prediction requests on stdin/stdout")
    p_serve.add_argument(
        "--model",
        default="echo_rect",
        help="echo_rect | constant:V | module:path to a callable (default: echo_rect)",
    )
    p_serve.add_argument("--device", default="cpu", help="device hint passed to loaded models")

    p_feat = sub.add_parser("features", help="export per-image embedding features as CSV")
    p_feat.add_argument("--manifest", required=True, help="dataset manifest CSV")
    p_feat.add_argument("--out", required=True, help="output features CSV path")
    p_feat.add_argument(
        "--extractor",
        default="efficientnet_b4",
        help="efficientnet_b4 | module:path to a callable (default: efficientnet_b4)",
    )
    p_feat.add_argument("--device", default="cpu")

    args = parser.parse_args(argv)
    if args.command == "serve":
        return serve(AdapterConfig(model=args.model, device=args.device))
    if args.command == "features":
        extractor = resolve_extractor(args.extractor, device=args.device)
        count = export_features(args.manifest, args.out, extractor)
        print(f"wrote {count} feature rows to {args.out}", file=sys.stderr)
        return 0
    return 2


if __name__ == "__main__":
    sys.exit(main())
