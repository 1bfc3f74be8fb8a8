"""Wire schema the bridge serves (newline-delimited JSON, one per line/body).

    request  {"id", "kind": "ask"|"embed"|"metric"|"handshake",
              "image"?, "image2"?: base64 PNG, "question"?, "texts"?}
    reply    {"id", "answer"? | "embeddings"? | "distance"? | "error"?}

Exactly one payload field per reply.  "handshake" is a bridge extension:
the reply carries a single basis vector whose length is the embedding
dimension the encoder produces.
"""

from __future__ import annotations

import base64
import io
import json

import numpy as np

KINDS = ("ask", "embed", "metric", "handshake")


class ProtocolError(Exception):
    pass


def parse_request(line: str) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed request: {exc}") from exc
    if not isinstance(obj, dict) or not isinstance(obj.get("id"), str) or not obj["id"]:
        raise ProtocolError("request must be an object with a nonempty string id")
    kind = obj.get("kind")
    if kind not in KINDS:
        raise ProtocolError(f"unknown request kind {kind!r}")
    if kind == "ask" and (not obj.get("image") or not isinstance(obj.get("question"), str)):
        raise ProtocolError("ask requires image and question")
    if kind == "embed" and not obj.get("texts"):
        raise ProtocolError("embed requires a nonempty text list")
    if kind == "metric" and (not obj.get("image") or not obj.get("image2")):
        raise ProtocolError("metric requires two images")
    return obj


def reply_line(request_id: str, *, answer=None, embeddings=None, distance=None, error=None) -> str:
    msg: dict = {"id": request_id}
    if answer is not None:
        msg["answer"] = answer
    if embeddings is not None:
        msg["embeddings"] = [[float(x) for x in vec] for vec in embeddings]
    if distance is not None:
        msg["distance"] = float(distance)
    if error is not None:
        msg["error"] = error
    if len(msg) != 2:
        raise ProtocolError("reply must populate exactly one payload field")
    return json.dumps(msg, separators=(",", ":"))


def decode_image(payload: str) -> np.ndarray:
    """Base64 PNG to an (H, W, 3) float array in [0, 1]."""
    from PIL import Image

    blob = base64.b64decode(payload)
    with Image.open(io.BytesIO(blob)) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
