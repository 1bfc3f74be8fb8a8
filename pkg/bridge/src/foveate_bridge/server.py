"""Request dispatch and the two transports (stdio lines, HTTP POST)."""

from __future__ import annotations

import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from . import protocol
from .backends import StubAnswerBackend, StubEmbedBackend, StubMetricBackend


class Bridge:
    """Stateless per request; model handles are owned for the process life.

    Inference is serialized behind one lock per bridge (one device), so
    concurrent transports may hand requests over freely.
    """

    def __init__(self, answer_backend=None, embed_backend=None, metric_backend=None):
        self.answer_backend = answer_backend or StubAnswerBackend()
        self.embed_backend = embed_backend or StubEmbedBackend()
        self.metric_backend = metric_backend or StubMetricBackend()
        self._inference_lock = threading.Lock()

    def handle_line(self, line: str) -> str:
        request_id = "unknown"
        try:
            req = protocol.parse_request(line)
            request_id = req["id"]
            with self._inference_lock:
                return self._dispatch(req)
        except protocol.ProtocolError as exc:
            return protocol.reply_line(request_id, error=str(exc))
        except Exception as exc:  # reply in-band; the server stays up
            return protocol.reply_line(request_id, error=f"{type(exc).__name__}: {exc}")

    def _dispatch(self, req: dict) -> str:
        kind = req["kind"]
        if kind == "handshake":
            dim = self.embed_backend.dimension
            basis = [1.0] + [0.0] * (dim - 1)
            return protocol.reply_line(req["id"], embeddings=[basis])
        if kind == "ask":
            image = protocol.decode_image(req["image"])
            answer = self.answer_backend.answer(image, req["question"])
            return protocol.reply_line(req["id"], answer=answer)
        if kind == "embed":
            vectors = self.embed_backend.embed([str(t) for t in req["texts"]])
            return protocol.reply_line(req["id"], embeddings=vectors)
        ref = protocol.decode_image(req["image"])
        dist = protocol.decode_image(req["image2"])
        return protocol.reply_line(req["id"], distance=self.metric_backend.distance(ref, dist))


def serve_stdio(bridge: Bridge, stdin=None, stdout=None):
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        stdout.write(bridge.handle_line(line) + "\n")
        stdout.flush()


class _BridgeHTTPServer(ThreadingHTTPServer):
    # Default socketserver backlog (5) drops bursts of concurrent connects.
    request_queue_size = 128
    daemon_threads = True


def make_http_server(bridge: Bridge, host: str, port: int) -> ThreadingHTTPServer:
    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            body = self.rfile.read(length).decode("utf-8")
            reply = bridge.handle_line(body)
            payload = reply.encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        def log_message(self, *args):
            pass

    return _BridgeHTTPServer((host, port), Handler)


def serve_http(bridge: Bridge, host: str, port: int):
    server = make_http_server(bridge, host, port)
    print(f"bridge listening on http://{host}:{server.server_address[1]}", file=sys.stderr)
    server.serve_forever()
