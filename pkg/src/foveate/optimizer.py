"""Test-time adaptation of the warp coefficients.

The loop minimizes a combined objective over the four Mobius
coefficients without any model gradients: the perceptual term is
differentiated by central finite differences through the full
warp-sample-unwarp pipeline, and the semantic term is differentiated by
simultaneous-perturbation (SPSA) estimates from paired oracle queries.
Questions are drawn for each SPSA step proportionally to weights that
grow exponentially on every wrong answer, focusing queries on what the
current sampling still gets wrong.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import oracle as oracle_mod
from . import semantic
from .errors import DegenerateParams, LengthMismatch, OracleUnavailable
from .geometry import MobiusParams, SphereGeom, normalize
from .metrics import LossWeights, MetricPlugin, PerceptualScorer
from .samplers import PixelBudget, bass_pipeline
from .warp import ImageBuffer

Objective = Callable[[MobiusParams], float]


@dataclass(frozen=True)
class QuestionItem:
    """One question with its reference answer and selection weight."""

    id: str
    question: str
    gt_answer: str
    gt_embedding: Optional[np.ndarray] = None
    weight: float = 1.0
    choices: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if self.weight <= 0.0:
            raise ValueError("question weight must be positive")


@dataclass(frozen=True)
class AdaptConfig:
    """Hyperparameters of the adaptation loop (defaults pinned for tests)."""

    iterations: int = 25
    spsa_delta: float = 0.05
    learning_rate: float = 0.1
    eta: float = 1.0
    beta_grad: float = 1.0
    fd_step: float = 1e-3
    questions_per_spsa: int = 4
    budget: PixelBudget = field(default_factory=lambda: PixelBudget(0.05))
    weights: LossWeights = field(default_factory=LossWeights)
    rng_seed: int = 0
    metric_plugin: Optional[MetricPlugin] = None

    def __post_init__(self):
        if self.iterations <= 0:
            raise ValueError("iterations must be positive")
        for name in ("spsa_delta", "learning_rate", "eta", "beta_grad", "fd_step"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be nonnegative")
        if self.questions_per_spsa < 1:
            raise ValueError("questions_per_spsa must be at least 1")


@dataclass
class AdaptResult:
    theta_star: MobiusParams
    sampled_image: ImageBuffer
    loss_trace: list[tuple[int, float, float, float]]  # (iter, L_img, L_text, |g|)
    oracle_calls: int
    best_loss: float
    iteration_seconds: list[float] = field(default_factory=list)


def spsa_gradient(
    objective: Objective, theta: MobiusParams, delta: float, rng: np.random.Generator
) -> np.ndarray:
    """Two-evaluation simultaneous-perturbation gradient estimate.

    Draws a sign vector from the symmetric Bernoulli distribution and
    returns ``(f(theta + delta s) - f(theta - delta s)) / (2 delta) * s``
    per coordinate (multiplying by the sign equals dividing for +-1).
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    signs = rng.integers(0, 2, size=4) * 2.0 - 1.0
    base = theta.as_array()
    loss_plus = objective(MobiusParams.from_array(base + delta * signs))
    loss_minus = objective(MobiusParams.from_array(base - delta * signs))
    return (loss_plus - loss_minus) / (2.0 * delta) * signs


def fd_perceptual_gradient(
    img: ImageBuffer,
    theta: MobiusParams,
    cfg: AdaptConfig,
    geom: SphereGeom,
    scorer: PerceptualScorer | None = None,
) -> np.ndarray:
    """Central finite differences of the perceptual loss through the pipeline.

    Eight pipeline evaluations (two per coordinate).  Raises
    DegenerateParams when a perturbed coefficient vector degenerates;
    the adaptation loop retries once with a halved step.
    """
    if cfg.fd_step <= 0.0:
        raise ValueError("fd_step must be positive")
    if scorer is None:
        scorer = PerceptualScorer(img, cfg.weights, cfg.metric_plugin)
    base = theta.as_array()
    grad = np.zeros(4)
    for i in range(4):
        offset = np.zeros(4)
        offset[i] = cfg.fd_step
        hi = scorer.loss(bass_pipeline(img, MobiusParams.from_array(base + offset), cfg.budget, geom))
        lo = scorer.loss(bass_pipeline(img, MobiusParams.from_array(base - offset), cfg.budget, geom))
        grad[i] = (hi - lo) / (2.0 * cfg.fd_step)
    return grad


def combine_gradients(g_img: np.ndarray, g_text: np.ndarray, beta_grad: float) -> np.ndarray:
    """Norm-balanced combination ``g_img + beta (|g_img|/|g_text|) g_text``.

    A vanishing text gradient contributes nothing; a vanishing image
    gradient annihilates the text term through the norm ratio.
    """
    if beta_grad <= 0.0:
        raise ValueError("beta_grad must be positive")
    text_norm = float(np.linalg.norm(g_text))
    if text_norm < 1e-12:
        return g_img.copy()
    img_norm = float(np.linalg.norm(g_img))
    return g_img + beta_grad * (img_norm / text_norm) * g_text


def update_question_weights(
    items: Sequence[QuestionItem], wrong: Sequence[bool], eta: float
) -> list[QuestionItem]:
    """Multiply each wrong item's weight by ``exp(eta / N)``; others unchanged."""
    if len(items) != len(wrong):
        raise LengthMismatch(f"{len(items)} items vs {len(wrong)} flags")
    n = len(items)
    return [
        replace(item, weight=item.weight * math.exp(eta / n)) if flag else item
        for item, flag in zip(items, wrong)
    ]


def sample_questions(
    items: Sequence[QuestionItem], k: int, rng: np.random.Generator
) -> list[int]:
    """Draw k distinct indices, each proportional to the remaining weights."""
    if not (1 <= k <= len(items)):
        raise ValueError(f"k must be in [1, {len(items)}]")
    weights = np.array([item.weight for item in items], dtype=np.float64)
    available = list(range(len(items)))
    chosen: list[int] = []
    for _ in range(k):
        probs = weights[available] / weights[available].sum()
        pick = int(rng.choice(len(available), p=probs))
        chosen.append(available.pop(pick))
    return chosen


def adapt(
    img: ImageBuffer,
    items: Sequence[QuestionItem],
    oracle,
    cfg: AdaptConfig,
    geom: SphereGeom | None = None,
    theta_init: MobiusParams | None = None,
) -> AdaptResult:
    """Run the full adaptation loop and return the best-seen coefficients.

    Every iteration descends the finite-difference perceptual gradient;
    on iterations ``i % ceil(t/5) == 0`` (and only when questions exist)
    an SPSA text gradient from ``k`` weighted-sampled questions is mixed
    in, question weights are updated from correctness at the current
    coefficients, and the oracle-call counter advances by ``3 k`` (two
    objective evaluations plus one correctness pass).

    With an empty question list the loop is purely perceptual and never
    contacts the oracle.  Transport failures raise
    :class:`OracleUnavailable` with the partial result attached.
    """
    if geom is None:
        geom = img.geom()
    theta = normalize(theta_init) if theta_init is not None else MobiusParams.identity()
    rng = np.random.default_rng(cfg.rng_seed)
    scorer = PerceptualScorer(img, cfg.weights, cfg.metric_plugin)
    stride = math.ceil(cfg.iterations / 5)
    k = min(cfg.questions_per_spsa, len(items))

    state = {"calls": 0}
    trace: list[tuple[int, float, float, float]] = []
    seconds: list[float] = []
    best_theta = theta
    best_loss = math.inf
    last_text_loss = 0.0

    def query(candidate: ImageBuffer, question: str) -> tuple[str, np.ndarray]:
        state["calls"] += 1
        return oracle_mod.ask(oracle, candidate, question)

    def partial() -> AdaptResult:
        ref = best_theta if best_loss < math.inf else theta
        return AdaptResult(
            ref, bass_pipeline(img, ref, cfg.budget, geom), trace, state["calls"],
            best_loss, seconds,
        )

    items = list(items)
    if items:
        # Reference-answer embeddings are fetched once up front; only the
        # per-image ask queries count toward the oracle-call budget.
        try:
            missing = [i for i, item in enumerate(items) if item.gt_embedding is None]
            if missing:
                vecs = oracle_mod.embed(oracle, [items[i].gt_answer for i in missing])
                for i, vec in zip(missing, vecs):
                    items[i] = replace(items[i], gt_embedding=vec)
        except OracleUnavailable as exc:
            raise OracleUnavailable(str(exc), partial_result=partial()) from exc

    def text_objective(selected: list[int]) -> Objective:
        def objective(candidate_theta: MobiusParams) -> float:
            candidate = bass_pipeline(img, candidate_theta, cfg.budget, geom)
            losses = []
            for idx in selected:
                _, embedding = query(candidate, items[idx].question)
                losses.append(semantic.text_loss(embedding, items[idx].gt_embedding))
            return float(np.mean(losses))

        return objective

    for i in range(cfg.iterations):
        tick = time.perf_counter()
        try:
            g_img, g_total, theta = _adapt_step(
                img, theta, items, i, stride, k, cfg, geom, scorer, rng,
                query, text_objective, state,
            )
        except OracleUnavailable as exc:
            raise OracleUnavailable(str(exc), partial_result=partial()) from exc
        l_img, l_text = state.pop("losses")
        if l_text is not None:
            last_text_loss = l_text
        trace.append((i, l_img, last_text_loss, float(np.linalg.norm(g_total))))
        combined = l_img + last_text_loss
        if combined < best_loss:
            best_loss = combined
            best_theta = state["theta_before"]
        seconds.append(time.perf_counter() - tick)

    return AdaptResult(
        best_theta,
        bass_pipeline(img, best_theta, cfg.budget, geom),
        trace,
        state["calls"],
        best_loss,
        seconds,
    )


def _adapt_step(
    img, theta, items, i, stride, k, cfg, geom, scorer, rng, query, text_objective, state
):
    """One iteration: gradients, optional SPSA mix-in, descent update."""
    try:
        g_img = fd_perceptual_gradient(img, theta, cfg, geom, scorer)
    except DegenerateParams:
        halved = replace(cfg, fd_step=cfg.fd_step / 2.0)
        g_img = fd_perceptual_gradient(img, theta, halved, geom, scorer)
    l_img = scorer.loss(bass_pipeline(img, theta, cfg.budget, geom))
    l_text = None

    if items and i % stride == 0:
        selected = sample_questions(items, k, rng)
        g_text = spsa_gradient(text_objective(selected), theta, cfg.spsa_delta, rng)
        current = bass_pipeline(img, theta, cfg.budget, geom)
        wrong = [False] * len(items)
        text_losses = []
        for idx in selected:
            answer, embedding = query(current, items[idx].question)
            item = items[idx]
            text_losses.append(semantic.text_loss(embedding, item.gt_embedding))
            wrong[idx] = not semantic.answer_matches(
                answer, item.gt_answer, embedding, item.gt_embedding, item.choices
            )
        l_text = float(np.mean(text_losses))
        updated = update_question_weights(items, wrong, cfg.eta)
        items[:] = updated
        g_total = combine_gradients(g_img, g_text, cfg.beta_grad)
    else:
        g_total = g_img

    state["theta_before"] = theta
    state["losses"] = (l_img, l_text)

    step = cfg.learning_rate * g_total
    try:
        theta = normalize(MobiusParams.from_array(theta.as_array() - step))
    except DegenerateParams:
        theta = normalize(MobiusParams.from_array(theta.as_array() - 0.5 * step))
    return g_img, g_total, theta
