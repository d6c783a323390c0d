import argparse
import logging
import sys
from pathlib import Path

from .exporter import ExportJob, export


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="embed_exporter",
        description="export per-occurrence contextual embeddings to an SSDE store",
    )
    parser.add_argument("--model", required=True, help="checkpoint id or local path")
    parser.add_argument("--occurrences", required=True)
    parser.add_argument("--corpus", required=True, help="chunks JSONL")
    parser.add_argument("--out", required=True, help="SSDE output path")
    parser.add_argument("--layer", choices=("last", "sum4"), default="last")
    parser.add_argument("--pooling", choices=("mean", "first"), default="mean")
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--no-deterministic", action="store_true",
                        help="skip seed/thread pinning (faster, not byte-reproducible)")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    job = ExportJob(
        model_id=args.model,
        occurrences=Path(args.occurrences),
        corpus=Path(args.corpus),
        output=Path(args.out),
        layer="sum_last_4" if args.layer == "sum4" else "last",
        pooling="first_subword" if args.pooling == "first" else "mean",
        batch_size=args.batch_size,
        device=args.device,
        deterministic=not args.no_deterministic,
    )
    try:
        export(job)
    except (ValueError, FileNotFoundError) as exc:
        logging.getLogger("embed_exporter").error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
