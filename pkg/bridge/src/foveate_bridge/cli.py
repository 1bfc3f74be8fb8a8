"""Bridge launcher: pick backends, pick a transport, serve forever."""

from __future__ import annotations

import argparse
import sys

from .backends import (
    SentenceEncoderBackend,
    StubAnswerBackend,
    StubEmbedBackend,
    StubMetricBackend,
    TransformersVlmBackend,
    VggFeatureMetricBackend,
)
from .server import Bridge, serve_http, serve_stdio


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="foveate-bridge",
        description="serve vision-language, embedding, and metric models over the oracle protocol",
    )
    parser.add_argument("--vlm", metavar="MODEL_ID", help="transformers checkpoint for answering")
    parser.add_argument("--encoder", metavar="MODEL_ID", help="sentence-transformers checkpoint")
    parser.add_argument("--metric", choices=["vgg"], help="deep perceptual metric backend")
    parser.add_argument("--stub", action="store_true", help="deterministic stub backends (no models)")
    parser.add_argument("--stub-answer", default="A", help="answer the stub backend returns")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--max-answer-tokens", type=int, default=32)
    transport = parser.add_mutually_exclusive_group(required=True)
    transport.add_argument("--stdio", action="store_true", help="serve newline JSON on stdio")
    transport.add_argument("--http", metavar="HOST:PORT", help="serve one message per POST body")
    return parser


def build_bridge(args) -> Bridge:
    if args.stub:
        return Bridge(
            StubAnswerBackend(args.stub_answer), StubEmbedBackend(), StubMetricBackend()
        )
    if not (args.vlm or args.encoder or args.metric):
        raise SystemExit("configure at least one backend (--vlm/--encoder/--metric) or --stub")
    answer = (
        TransformersVlmBackend(args.vlm, args.device, args.max_answer_tokens)
        if args.vlm
        else StubAnswerBackend()
    )
    embedder = SentenceEncoderBackend(args.encoder, args.device) if args.encoder else StubEmbedBackend()
    metric = VggFeatureMetricBackend(args.device) if args.metric == "vgg" else StubMetricBackend()
    return Bridge(answer, embedder, metric)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    bridge = build_bridge(args)
    print(f"embedding dimension: {bridge.embed_backend.dimension}", file=sys.stderr)
    if args.stdio:
        serve_stdio(bridge)
    else:
        host, _, port = args.http.rpartition(":")
        serve_http(bridge, host or "127.0.0.1", int(port))
    return 0


if __name__ == "__main__":
    sys.exit(main())
