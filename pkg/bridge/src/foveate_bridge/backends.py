"""Model backends: deterministic stubs plus lazily loaded real models.

Every backend family shares one small duck-typed surface:

    answer backend  .answer(image: ndarray, question: str) -> str
    embed backend   .embed(texts: list[str]) -> list[ndarray]   (unit norm)
                    .dimension -> int
    metric backend  .distance(ref: ndarray, dist: ndarray) -> float

The stubs have no model dependencies and are fully deterministic, which
is what CI runs against.  The real backends import torch/transformers
lazily so the bridge package stays importable without them.
"""

from __future__ import annotations

import re

import numpy as np

MULTIPLE_CHOICE_PROMPT = (
    "Question: {question}\n"
    "Answer with the single letter of the best choice only."
)


def extract_choice(text: str, choices: list[str] | None = None, encoder=None) -> str:
    """First standalone choice letter; else the highest-similarity choice."""
    match = re.search(r"\b([A-H])\b", text.upper())
    if match:
        return match.group(1)
    if choices and encoder is not None:
        vectors = encoder.embed([text] + list(choices))
        sims = [float(vectors[0] @ v) for v in vectors[1:]]
        return choices[int(np.argmax(sims))]
    return text.strip()


class StubAnswerBackend:
    """Fixed answer regardless of input; deterministic by construction."""

    def __init__(self, answer: str = "A"):
        self._answer = answer

    def answer(self, image: np.ndarray, question: str) -> str:
        return self._answer


class StubEmbedBackend:
    """Unit vectors seeded by the text bytes; same text, same vector."""

    def __init__(self, dimension: int = 16):
        self.dimension = dimension

    def embed(self, texts):
        out = []
        for text in texts:
            seed = int.from_bytes(text.encode("utf-8")[:8].ljust(8, b"\0"), "little")
            vec = np.random.default_rng(seed).normal(size=self.dimension)
            out.append(vec / np.linalg.norm(vec))
        return out


class StubMetricBackend:
    """Mean absolute difference; zero self-distance."""

    def distance(self, ref: np.ndarray, dist: np.ndarray) -> float:
        if ref.shape != dist.shape:
            raise ValueError(f"shape mismatch {ref.shape} vs {dist.shape}")
        return float(np.abs(ref - dist).mean())


class TransformersVlmBackend:
    """Vision-language answering through a local transformers checkpoint."""

    def __init__(self, model_id: str, device: str = "cpu", max_answer_tokens: int = 32):
        import torch
        from transformers import AutoModelForVision2Seq, AutoProcessor

        self.device = device
        self.max_answer_tokens = max_answer_tokens
        self.processor = AutoProcessor.from_pretrained(model_id, trust_remote_code=True)
        self.model = AutoModelForVision2Seq.from_pretrained(
            model_id,
            trust_remote_code=True,
            torch_dtype=torch.float16 if device == "cuda" else torch.float32,
        ).to(device)
        self.model.eval()

    def answer(self, image: np.ndarray, question: str) -> str:
        import torch
        from PIL import Image

        pil = Image.fromarray(np.clip(np.round(image * 255.0), 0, 255).astype(np.uint8))
        prompt = MULTIPLE_CHOICE_PROMPT.format(question=question)
        inputs = self.processor(images=pil, text=prompt, return_tensors="pt").to(self.device)
        with torch.no_grad():
            output = self.model.generate(**inputs, max_new_tokens=self.max_answer_tokens)
        decoded = self.processor.batch_decode(output, skip_special_tokens=True)[0]
        if prompt in decoded:
            decoded = decoded.split(prompt, 1)[1]
        return extract_choice(decoded)


class SentenceEncoderBackend:
    """Unit-norm sentence embeddings from a sentence-transformers model."""

    def __init__(self, model_id: str, device: str = "cpu"):
        from sentence_transformers import SentenceTransformer

        self.model = SentenceTransformer(model_id, device=device)
        self.dimension = int(self.model.get_sentence_embedding_dimension())

    def embed(self, texts):
        vectors = self.model.encode(list(texts), normalize_embeddings=True)
        return [np.asarray(v, dtype=np.float64) for v in vectors]


class VggFeatureMetricBackend:
    """Structure/texture distance over pretrained VGG16 feature maps.

    Needs torchvision weights on disk; construction fails cleanly when
    they cannot be loaded, and callers fall back to the stub.
    """

    _LAYERS = (3, 8, 15, 22, 29)

    def __init__(self, device: str = "cpu"):
        import torch
        from torchvision.models import VGG16_Weights, vgg16

        self.torch = torch
        self.device = device
        self.features = vgg16(weights=VGG16_Weights.IMAGENET1K_V1).features.to(device).eval()
        for p in self.features.parameters():
            p.requires_grad_(False)

    def _maps(self, image: np.ndarray):
        x = self.torch.as_tensor(image, dtype=self.torch.float32, device=self.device)
        x = x.permute(2, 0, 1).unsqueeze(0)
        outputs = [x]
        for i, layer in enumerate(self.features):
            x = layer(x)
            if i in self._LAYERS:
                outputs.append(x)
        return outputs

    def distance(self, ref: np.ndarray, dist: np.ndarray) -> float:
        eps = 1e-6
        total = 0.0
        for fr, fd in zip(self._maps(ref), self._maps(dist)):
            mu_r = fr.mean(dim=(2, 3))
            mu_d = fd.mean(dim=(2, 3))
            var_r = fr.var(dim=(2, 3))
            var_d = fd.var(dim=(2, 3))
            cov = ((fr - mu_r[..., None, None]) * (fd - mu_d[..., None, None])).mean(dim=(2, 3))
            structure = (2 * cov + eps) / (var_r + var_d + eps)
            texture = (2 * mu_r * mu_d + eps) / (mu_r**2 + mu_d**2 + eps)
            total += float((1.0 - 0.5 * (structure + texture)).mean())
        return max(total / (len(self._LAYERS) + 1), 0.0)
