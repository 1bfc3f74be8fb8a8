"""Text-side loss: embedding normalization, cosine distance, answer matching.

Embeddings are produced elsewhere (the oracle returns them); this module
only owns the math on them and the answer-correctness policy used when
updating question weights.
"""

from __future__ import annotations

import re

import numpy as np

from .errors import LengthMismatch, ZeroVector

# Free-form answers count as correct above this cosine similarity.
MATCH_SIMILARITY_THRESHOLD = 0.9


def normalize_embedding(values) -> np.ndarray:
    """Scale to unit L2 norm; rejects (near-)zero vectors."""
    vec = np.asarray(values, dtype=np.float64).ravel()
    if vec.size == 0:
        raise ZeroVector("empty vector")
    norm = float(np.linalg.norm(vec))
    if norm <= 1e-12:
        raise ZeroVector(f"norm {norm:.3e} too small to normalize")
    return vec / norm


def text_loss(pred: np.ndarray, gt: np.ndarray) -> float:
    """``1 - cos(pred, gt)`` for unit-norm embeddings; in [0, 2]."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    gt = np.asarray(gt, dtype=np.float64).ravel()
    if pred.shape != gt.shape:
        raise LengthMismatch(f"{pred.shape} vs {gt.shape}")
    return 1.0 - float(np.dot(pred, gt))


def normalize_answer(text: str) -> str:
    """Lowercase, strip punctuation, collapse whitespace."""
    text = re.sub(r"[^\w\s]", "", text.lower().strip())
    return " ".join(text.split())


def answer_matches(
    pred: str,
    gt: str,
    pred_embedding: np.ndarray | None = None,
    gt_embedding: np.ndarray | None = None,
    choices=None,
    threshold: float = MATCH_SIMILARITY_THRESHOLD,
) -> bool:
    """Correctness policy: exact normalized match for multiple choice,
    normalized match or embedding similarity for free-form answers."""
    exact = normalize_answer(pred) == normalize_answer(gt)
    if choices:
        return exact
    if exact:
        return True
    if pred_embedding is not None and gt_embedding is not None:
        return float(np.dot(pred_embedding, gt_embedding)) >= threshold
    return False
