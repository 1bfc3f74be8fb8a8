"""The black-box model boundary: wire protocol, mock oracles, clients.

An oracle answers questions about images and embeds short texts.  The
in-process mocks make the whole optimization loop testable offline; the
clients speak a newline-delimited JSON protocol to an external process
(child-process stdio or HTTP POST), one request/reply object per line
or body:

    request  {"id", "kind": "ask"|"embed"|"metric",
              "image"?, "image2"?: base64 PNG, "question"?, "texts"?}
    reply    {"id", "answer"? | "embeddings"? | "distance"? | "error"?}

Exactly one payload field is populated per reply.  ``ask`` at the oracle
interface returns both the answer and its embedding; remote transports
realize that as an ask round trip followed by an embed round trip.
"""

from __future__ import annotations

import base64
import io
import json
import select
import shlex
import subprocess
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import OracleError, OracleUnavailable
from .semantic import normalize_embedding
from .warp import ImageBuffer

KINDS = ("ask", "embed", "metric")
DEFAULT_TIMEOUT = 60.0


# ----------------------------------------------------------------------
# Image codec (base64 PNG payloads)
# ----------------------------------------------------------------------


def image_to_png_bytes(img: ImageBuffer) -> bytes:
    from PIL import Image

    raw = np.clip(np.round(img.data * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(raw, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def image_from_png_bytes(blob: bytes) -> ImageBuffer:
    from PIL import Image

    with Image.open(io.BytesIO(blob)) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return ImageBuffer.from_array(arr)


def encode_image(img: ImageBuffer) -> str:
    return base64.b64encode(image_to_png_bytes(img)).decode("ascii")


def decode_image(payload: str) -> ImageBuffer:
    return image_from_png_bytes(base64.b64decode(payload))


# ----------------------------------------------------------------------
# Protocol messages
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class OracleRequest:
    id: str
    kind: str
    image: Optional[str] = None      # base64 PNG
    image2: Optional[str] = None
    question: Optional[str] = None
    texts: Optional[tuple[str, ...]] = None

    def validate(self):
        if not self.id:
            raise OracleError("request id must be nonempty")
        if self.kind not in KINDS:
            raise OracleError(f"unknown request kind {self.kind!r}")
        if self.kind == "ask" and (self.image is None or self.question is None):
            raise OracleError("ask requires image and question")
        if self.kind == "embed" and not self.texts:
            raise OracleError("embed requires a nonempty text list")
        if self.kind == "metric" and (self.image is None or self.image2 is None):
            raise OracleError("metric requires two images")


@dataclass(frozen=True)
class OracleReply:
    id: str
    answer: Optional[str] = None
    embeddings: Optional[tuple[tuple[float, ...], ...]] = None
    distance: Optional[float] = None
    error: Optional[str] = None

    def validate(self):
        if not self.id:
            raise OracleError("reply id must be nonempty")
        populated = sum(
            x is not None for x in (self.answer, self.embeddings, self.distance, self.error)
        )
        if populated != 1:
            raise OracleError(f"reply must populate exactly one field, got {populated}")


def encode_request(req: OracleRequest) -> str:
    req.validate()
    msg = {"id": req.id, "kind": req.kind}
    if req.image is not None:
        msg["image"] = req.image
    if req.image2 is not None:
        msg["image2"] = req.image2
    if req.question is not None:
        msg["question"] = req.question
    if req.texts is not None:
        msg["texts"] = list(req.texts)
    return json.dumps(msg, separators=(",", ":"))


def decode_request(line: str) -> OracleRequest:
    obj = _parse_object(line)
    req = OracleRequest(
        id=_expect(obj, "id", str),
        kind=_expect(obj, "kind", str),
        image=_optional(obj, "image", str),
        image2=_optional(obj, "image2", str),
        question=_optional(obj, "question", str),
        texts=tuple(obj["texts"]) if obj.get("texts") is not None else None,
    )
    req.validate()
    return req


def encode_reply(reply: OracleReply) -> str:
    reply.validate()
    msg: dict = {"id": reply.id}
    if reply.answer is not None:
        msg["answer"] = reply.answer
    if reply.embeddings is not None:
        msg["embeddings"] = [list(vec) for vec in reply.embeddings]
    if reply.distance is not None:
        msg["distance"] = reply.distance
    if reply.error is not None:
        msg["error"] = reply.error
    return json.dumps(msg, separators=(",", ":"))


def decode_reply(line: str) -> OracleReply:
    obj = _parse_object(line)
    embeddings = None
    if obj.get("embeddings") is not None:
        embeddings = tuple(tuple(float(x) for x in vec) for vec in obj["embeddings"])
    reply = OracleReply(
        id=_expect(obj, "id", str),
        answer=_optional(obj, "answer", str),
        embeddings=embeddings,
        distance=float(obj["distance"]) if obj.get("distance") is not None else None,
        error=_optional(obj, "error", str),
    )
    reply.validate()
    return reply


def _parse_object(line: str) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise OracleError(f"malformed protocol line: {exc}") from exc
    if not isinstance(obj, dict):
        raise OracleError("protocol message must be a JSON object")
    return obj


def _expect(obj: dict, key: str, typ) -> str:
    value = obj.get(key)
    if not isinstance(value, typ):
        raise OracleError(f"missing or invalid field {key!r}")
    return value


def _optional(obj: dict, key: str, typ):
    value = obj.get(key)
    if value is not None and not isinstance(value, typ):
        raise OracleError(f"invalid field {key!r}")
    return value


# ----------------------------------------------------------------------
# Mock oracles (pure functions of their configuration)
# ----------------------------------------------------------------------


class RegionFidelityOracle:
    """Answers "A" when the candidate is faithful inside a target window.

    Compares the candidate's mean absolute error against a frozen
    reference image inside ``rect = (x0, y0, x1, y1)`` pixels: below
    ``tau`` the answer is "A", otherwise "B".  Embeddings are fixed unit
    vectors per label, so the text loss flips between 0 and 1 exactly
    when the oracle's judgment flips.  This rewards concentrating the
    pixel budget where the question looks, which is the behavior the
    adaptive sampler is meant to produce.
    """

    label_embeddings = {"A": (1.0, 0.0), "B": (0.0, 1.0)}

    def __init__(self, reference: ImageBuffer, rect: tuple[int, int, int, int], tau: float):
        x0, y0, x1, y1 = rect
        if not (0 <= x0 < x1 <= reference.width and 0 <= y0 < y1 <= reference.height):
            raise ValueError(f"rect {rect} outside {reference.width}x{reference.height}")
        if not (0.0 < tau < 1.0):
            raise ValueError("tau must be in (0, 1)")
        self.reference = reference
        self.rect = rect
        self.tau = tau

    def region_error(self, img: ImageBuffer) -> float:
        x0, y0, x1, y1 = self.rect
        ref = self.reference.data[y0:y1, x0:x1]
        got = img.data[y0:y1, x0:x1]
        return float(np.abs(ref - got).mean())

    def ask(self, image: ImageBuffer, question: str) -> tuple[str, np.ndarray]:
        label = "A" if self.region_error(image) < self.tau else "B"
        return label, np.asarray(self.label_embeddings[label], dtype=np.float64)

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        if not texts:
            raise OracleError("embed requires a nonempty text list")
        out = []
        for text in texts:
            if text not in self.label_embeddings:
                raise OracleError(f"region-fidelity oracle cannot embed {text!r}")
            out.append(np.asarray(self.label_embeddings[text], dtype=np.float64))
        return out


class AnswerEchoOracle:
    """Returns one fixed answer regardless of the image (null-effect mock)."""

    def __init__(self, answer: str = "A", dim: int = 8):
        self.answer = answer
        self.dim = dim

    def _embed_one(self, text: str) -> np.ndarray:
        # Deterministic pseudo-embedding seeded by the text content.
        seed = int.from_bytes(text.encode("utf-8")[:8].ljust(8, b"\0"), "little")
        rng = np.random.default_rng(seed)
        return normalize_embedding(rng.normal(size=self.dim))

    def ask(self, image: ImageBuffer, question: str) -> tuple[str, np.ndarray]:
        return self.answer, self._embed_one(self.answer)

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        if not texts:
            raise OracleError("embed requires a nonempty text list")
        return [self._embed_one(t) for t in texts]


def ask(oracle, image: ImageBuffer, question: str) -> tuple[str, np.ndarray]:
    """Query any oracle; returns (answer, unit-norm embedding of the answer)."""
    answer, embedding = oracle.ask(image, question)
    return answer, normalize_embedding(embedding)


def embed(oracle, texts: Sequence[str]) -> list[np.ndarray]:
    """Embed texts through any oracle; one unit-norm vector per text."""
    if not texts:
        raise OracleError("embed requires a nonempty text list")
    vecs = oracle.embed(list(texts))
    return [normalize_embedding(v) for v in vecs]


# ----------------------------------------------------------------------
# Remote clients
# ----------------------------------------------------------------------


class _RemoteOracleBase:
    """Shared ask/embed/metric logic on top of a send(request)->reply hook."""

    def __init__(self):
        self._counter = 0

    def _next_id(self) -> str:
        self._counter += 1
        return f"req-{self._counter}"

    def _roundtrip(self, req: OracleRequest) -> OracleReply:
        reply = self._send(req)
        if reply.id != req.id:
            raise OracleError(f"reply id {reply.id!r} does not match request {req.id!r}")
        if reply.error is not None:
            raise OracleError(f"oracle error: {reply.error}")
        return reply

    def ask(self, image: ImageBuffer, question: str) -> tuple[str, np.ndarray]:
        req = OracleRequest(self._next_id(), "ask", image=encode_image(image), question=question)
        reply = self._roundtrip(req)
        if reply.answer is None:
            raise OracleError("ask reply carried no answer")
        vec = self.embed([reply.answer])[0]
        return reply.answer, vec

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        req = OracleRequest(self._next_id(), "embed", texts=tuple(texts))
        reply = self._roundtrip(req)
        if reply.embeddings is None:
            raise OracleError("embed reply carried no embeddings")
        if len(reply.embeddings) != len(texts):
            raise OracleError("embed reply length mismatch")
        return [np.asarray(v, dtype=np.float64) for v in reply.embeddings]

    def metric(self, ref: ImageBuffer, dist: ImageBuffer) -> float:
        req = OracleRequest(
            self._next_id(), "metric", image=encode_image(ref), image2=encode_image(dist)
        )
        reply = self._roundtrip(req)
        if reply.distance is None:
            raise OracleError("metric reply carried no distance")
        return float(reply.distance)

    def metric_plugin(self):
        """Adapter usable as the perceptual-loss plugin slot."""
        return lambda ref, dist: self.metric(ref, dist)


class HttpOracle(_RemoteOracleBase):
    """One protocol message per HTTP POST body."""

    def __init__(self, url: str, timeout: float = DEFAULT_TIMEOUT):
        super().__init__()
        self.url = url
        self.timeout = timeout

    def _send(self, req: OracleRequest) -> OracleReply:
        import requests

        try:
            resp = requests.post(
                self.url,
                data=encode_request(req).encode("utf-8"),
                headers={"Content-Type": "application/json"},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise OracleUnavailable(f"oracle endpoint unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise OracleUnavailable(f"oracle endpoint returned HTTP {resp.status_code}")
        return decode_reply(resp.text)


class StdioOracle(_RemoteOracleBase):
    """Child process speaking one JSON message per line over stdio."""

    def __init__(self, command: str, timeout: float = DEFAULT_TIMEOUT):
        super().__init__()
        self.timeout = timeout
        try:
            self._proc = subprocess.Popen(
                shlex.split(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise OracleUnavailable(f"cannot start oracle process: {exc}") from exc

    def close(self):
        if self._proc.poll() is None:
            self._proc.terminate()
            try:
                self._proc.wait(timeout=5.0)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        for pipe in (self._proc.stdin, self._proc.stdout):
            if pipe is not None:
                pipe.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()

    def _send(self, req: OracleRequest) -> OracleReply:
        if self._proc.poll() is not None:
            raise OracleUnavailable("oracle process exited")
        try:
            self._proc.stdin.write(encode_request(req) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise OracleUnavailable(f"oracle process pipe broken: {exc}") from exc
        ready, _, _ = select.select([self._proc.stdout], [], [], self.timeout)
        if not ready:
            raise OracleUnavailable(f"oracle reply timed out after {self.timeout}s")
        line = self._proc.stdout.readline()
        if not line:
            raise OracleUnavailable("oracle process closed its stdout")
        return decode_reply(line)


# ----------------------------------------------------------------------
# Serving a local oracle over stdio (used to test the client path and to
# expose mocks to --oracle-cmd consumers)
# ----------------------------------------------------------------------


def handle_request_line(oracle, line: str) -> str:
    """Serve one protocol line against an in-process oracle."""
    req_id = "unknown"
    try:
        parsed = json.loads(line)
        if isinstance(parsed, dict) and isinstance(parsed.get("id"), str):
            req_id = parsed["id"]
    except json.JSONDecodeError:
        pass
    try:
        req = decode_request(line)
        if req.kind == "ask":
            answer, _ = oracle.ask(decode_image(req.image), req.question)
            return encode_reply(OracleReply(req.id, answer=answer))
        if req.kind == "embed":
            vecs = embed(oracle, list(req.texts))
            return encode_reply(
                OracleReply(req.id, embeddings=tuple(tuple(float(x) for x in v) for v in vecs))
            )
        ref = decode_image(req.image)
        dist = decode_image(req.image2)
        if hasattr(oracle, "metric"):
            value = float(oracle.metric(ref, dist))
        else:
            value = float(np.abs(ref.data - dist.data).mean())
        return encode_reply(OracleReply(req.id, distance=value))
    except OracleError as exc:
        return encode_reply(OracleReply(req_id, error=str(exc)))
    except Exception as exc:  # stay up; report per-request failures in-band
        return encode_reply(OracleReply(req_id, error=f"{type(exc).__name__}: {exc}"))


def run_stdio_server(oracle, stdin=None, stdout=None):
    """Blocking serve loop: one reply line per request line until EOF."""
    import sys

    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        stdout.write(handle_request_line(oracle, line) + "\n")
        stdout.flush()


def _main(argv=None):
    """Serve a mock oracle over stdio: ``python -m foveate.oracle --echo B``
    or ``--region ref.png X0,Y0,X1,Y1 TAU``."""
    import argparse

    parser = argparse.ArgumentParser(description="serve a mock oracle over stdio")
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--echo", metavar="ANSWER", help="fixed-answer mock")
    group.add_argument(
        "--region", nargs=3, metavar=("REF", "RECT", "TAU"), help="region-fidelity mock"
    )
    args = parser.parse_args(argv)
    if args.echo is not None:
        run_stdio_server(AnswerEchoOracle(args.echo))
    else:
        from .harness import read_image

        ref_path, rect_str, tau = args.region
        rect = tuple(int(x) for x in rect_str.split(","))
        run_stdio_server(RegionFidelityOracle(read_image(ref_path), rect, float(tau)))


if __name__ == "__main__":
    _main()
