"""Experiment orchestration: datasets, scoring, reports, image file IO.

Datasets are JSON Lines, one object per item:

    {"image": "path.png",
     "questions": [{"q": "...", "a": "...", "choices": ["...", ...]?}, ...],
     "region": [x0, y0, x1, y1]?}            # normalized coordinates

``run_experiment`` crosses items with sampling specs, queries the
oracle on every question for the sampled image (running the adaptation
loop for the warp-based strategy), aggregates accuracies, and writes a
CSV with one row per (item, strategy, budget) plus summary rows carrying
accuracy retained (vs. full resolution) and gain over uniform sampling.
Runs are deterministic given the seed and a mock oracle: item rng
streams derive from (seed, item index) and CSV floats are fixed-format.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import oracle as oracle_mod
from . import samplers
from .errors import HarnessError, ZeroBaseline
from .geometry import MobiusParams, SphereGeom, normalize
from .optimizer import AdaptConfig, QuestionItem, adapt
from .samplers import SamplingSpec
from .semantic import answer_matches
from .warp import ImageBuffer

log = logging.getLogger("foveate.harness")


# ----------------------------------------------------------------------
# Image file IO
# ----------------------------------------------------------------------


def read_image(path) -> ImageBuffer:
    """Load an 8-bit image file ([0,255] mapped to [0,1]); PNG via Pillow,
    PPM (P6) natively."""
    path = Path(path)
    if path.suffix.lower() in (".ppm", ".pnm"):
        return _read_ppm(path)
    from PIL import Image

    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return ImageBuffer.from_array(arr)


def write_image(img: ImageBuffer, path) -> None:
    path = Path(path)
    raw = np.clip(np.round(img.data * 255.0), 0, 255).astype(np.uint8)
    if path.suffix.lower() in (".ppm", ".pnm"):
        with open(path, "wb") as fh:
            fh.write(b"P6\n%d %d\n255\n" % (img.width, img.height))
            fh.write(raw.tobytes())
        return
    from PIL import Image

    Image.fromarray(raw, mode="RGB").save(path)


def _read_ppm(path: Path) -> ImageBuffer:
    with open(path, "rb") as fh:
        blob = fh.read()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if blob[pos : pos + 1] == b"#":
            while pos < len(blob) and blob[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        fields.append(blob[start:pos])
    if fields[0] != b"P6":
        raise HarnessError(f"unsupported PPM magic {fields[0]!r} in {path}")
    width, height, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    data = np.frombuffer(blob[pos + 1 :], dtype=np.uint8, count=width * height * 3)
    arr = data.reshape(height, width, 3).astype(np.float64) / maxval
    return ImageBuffer.from_array(arr)


# ----------------------------------------------------------------------
# Dataset
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class DatasetItem:
    image_path: str
    questions: tuple[QuestionItem, ...]
    region: Optional[tuple[float, float, float, float]] = None

    def __post_init__(self):
        if not self.questions:
            raise HarnessError(f"item {self.image_path!r} has no questions")
        if self.region is not None:
            x0, y0, x1, y1 = self.region
            if not (0.0 <= x0 < x1 <= 1.0 and 0.0 <= y0 < y1 <= 1.0):
                raise HarnessError(f"region {self.region} outside [0,1]^4")


def load_dataset(path) -> list[DatasetItem]:
    """Parse a JSONL dataset; paths are resolved relative to the file."""
    base = Path(path).parent
    items = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise HarnessError(f"{path}:{lineno}: bad JSON: {exc}") from exc
            try:
                image = str(obj["image"])
                questions = tuple(
                    QuestionItem(
                        id=f"{lineno}:{qi}",
                        question=str(q["q"]),
                        gt_answer=str(q["a"]),
                        weight=1.0 / len(obj["questions"]),
                        choices=tuple(q["choices"]) if q.get("choices") else None,
                    )
                    for qi, q in enumerate(obj["questions"])
                )
                region = tuple(float(v) for v in obj["region"]) if obj.get("region") else None
            except (KeyError, TypeError, ValueError) as exc:
                raise HarnessError(f"{path}:{lineno}: bad item: {exc}") from exc
            image_path = image if os.path.isabs(image) else str(base / image)
            items.append(DatasetItem(image_path, questions, region))
    if not items:
        raise HarnessError(f"{path}: empty dataset")
    return items


# ----------------------------------------------------------------------
# Table metrics
# ----------------------------------------------------------------------


def accuracy_retained(acc_sampled: float, acc_full: float) -> float:
    """Sampled accuracy as a percentage of the full-resolution accuracy."""
    if acc_full <= 0.0:
        raise ZeroBaseline("full-resolution accuracy must be positive")
    return 100.0 * acc_sampled / acc_full

def delta_gain(acc_method: float, acc_uniform: float) -> float:
    """Relative accuracy gain (percent) over the uniform baseline."""
    if acc_uniform <= 0.0:
        raise ZeroBaseline("uniform accuracy must be positive")
    return 100.0 * (acc_method - acc_uniform) / acc_uniform


# ----------------------------------------------------------------------
# Experiment orchestration
# ----------------------------------------------------------------------


OracleFactory = Callable[[DatasetItem, ImageBuffer], object]


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    fov_deg: float = 90.0
    adapt: AdaptConfig = field(default_factory=AdaptConfig)
    dump_images: Optional[str] = None     # directory for sampled PNGs
    max_failure_fraction: float = 0.1
    workers: int = 1


@dataclass(frozen=True)
class ItemResult:
    item_id: str
    strategy: str
    budget: float
    n_questions: int
    n_correct: int

    @property
    def accuracy(self) -> float:
        return 100.0 * self.n_correct / self.n_questions


@dataclass(frozen=True)
class Summary:
    strategy: str
    budget: float
    n_questions: int
    n_correct: int
    accuracy: float
    accuracy_full: float
    retained: float
    gain_vs_uniform: Optional[float]


@dataclass
class ExperimentReport:
    rows: list[ItemResult]
    summaries: list[Summary]
    accuracy_full: float
    failures: int = 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["row_type", "item_id", "strategy", "budget", "n_questions", "n_correct",
             "accuracy", "accuracy_full", "retained", "gain_vs_uniform"]
        )
        for r in self.rows:
            writer.writerow(
                ["item", r.item_id, r.strategy, f"{r.budget:.4f}", r.n_questions,
                 r.n_correct, f"{r.accuracy:.4f}", "", "", ""]
            )
        for s in self.summaries:
            writer.writerow(
                ["summary", "", s.strategy, f"{s.budget:.4f}", s.n_questions, s.n_correct,
                 f"{s.accuracy:.4f}", f"{s.accuracy_full:.4f}", f"{s.retained:.4f}",
                 "" if s.gain_vs_uniform is None else f"{s.gain_vs_uniform:.4f}"]
            )
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")


def summarize(rows: Sequence[ItemResult], accuracy_full: float) -> list[Summary]:
    """Aggregate per-item rows into per-(strategy, budget) summary rows."""
    keys = sorted({(r.strategy, r.budget) for r in rows})
    uniform_acc = {}
    for strategy, budget in keys:
        sel = [r for r in rows if (r.strategy, r.budget) == (strategy, budget)]
        total = sum(r.n_questions for r in sel)
        correct = sum(r.n_correct for r in sel)
        if strategy == "uniform" and total:
            uniform_acc[budget] = 100.0 * correct / total
    summaries = []
    for strategy, budget in keys:
        sel = [r for r in rows if (r.strategy, r.budget) == (strategy, budget)]
        total = sum(r.n_questions for r in sel)
        correct = sum(r.n_correct for r in sel)
        acc = 100.0 * correct / total if total else 0.0
        retained = accuracy_retained(acc, accuracy_full) if accuracy_full > 0 else 0.0
        gain = None
        base = uniform_acc.get(budget)
        if base is not None and base > 0.0:
            gain = delta_gain(acc, base)
        summaries.append(Summary(strategy, budget, total, correct, acc, accuracy_full, retained, gain))
    return summaries


def region_to_pixels(region, width: int, height: int) -> tuple[int, int, int, int]:
    """Normalized [0,1] region to integer pixel bounds (at least 1x1)."""
    x0 = max(0, int(round(region[0] * width)))
    y0 = max(0, int(round(region[1] * height)))
    x1 = min(width, max(int(round(region[2] * width)), x0 + 1))
    y1 = min(height, max(int(round(region[3] * height)), y0 + 1))
    return x0, y0, x1, y1


def region_init_theta(region, geom: SphereGeom) -> MobiusParams:
    """Pan coefficients placing the region's midpoint on the optical axis."""
    cx = (region[0] + region[2]) / 2.0
    t = geom.half_tangent
    p = t * (2.0 * cx - 1.0)
    w_center = p / (math.sqrt(1.0 + p * p) + 1.0)
    return normalize(MobiusParams(1.0, -w_center, 0.0, 1.0))


def _score_questions(oracle, image: ImageBuffer, questions) -> int:
    correct = 0
    for item in questions:
        answer, embedding = oracle_mod.ask(oracle, image, item.question)
        gt_embedding = item.gt_embedding
        if gt_embedding is None and item.choices is None:
            try:
                gt_embedding = oracle_mod.embed(oracle, [item.gt_answer])[0]
            except Exception:
                gt_embedding = None
        correct += answer_matches(answer, item.gt_answer, embedding, gt_embedding, item.choices)
    return correct


def _sampled_image(img, item, spec, cfg, geom, oracle, item_index):
    if spec.strategy != "bass":
        return samplers.apply_strategy(img, spec, geom)
    theta_init = spec.theta
    if item.region is not None:
        theta_init = region_init_theta(item.region, geom)
    item_seed = np.random.SeedSequence((cfg.seed, item_index)).generate_state(1)[0]
    adapt_cfg = replace(cfg.adapt, budget=spec.budget, rng_seed=int(item_seed))
    result = adapt(img, list(item.questions), oracle, adapt_cfg, geom, theta_init=theta_init)
    return result.sampled_image


def _run_item(index, item, strategies, oracle, cfg, dump_dir):
    """Evaluate one item against all strategies; returns (rows, correct, total)."""
    img = read_image(item.image_path)
    geom = img.geom(cfg.fov_deg)
    item_oracle = oracle(item, img) if callable(oracle) else oracle
    item_id = Path(item.image_path).stem
    full_correct = _score_questions(item_oracle, img, item.questions)
    rows = []
    for spec in strategies:
        sampled = _sampled_image(img, item, spec, cfg, geom, item_oracle, index)
        n_correct = _score_questions(item_oracle, sampled, item.questions)
        rows.append(
            ItemResult(item_id, spec.strategy, spec.budget.fraction,
                       len(item.questions), n_correct)
        )
        if dump_dir:
            name = f"{item_id}_{spec.strategy}_{spec.budget.fraction:.4f}.png"
            write_image(sampled, dump_dir / name)
    return rows, full_correct, len(item.questions)


def run_experiment(
    dataset: Sequence[DatasetItem],
    strategies: Sequence[SamplingSpec],
    oracle,
    cfg: ExperimentConfig = ExperimentConfig(),
) -> ExperimentReport:
    """Evaluate every strategy on every item; ``oracle`` may be an oracle
    instance or a factory ``(item, full_image) -> oracle`` (mocks need the
    per-item reference).

    Items run on a bounded worker pool when ``cfg.workers > 1`` (each
    worker derives its own rng stream and, via the factory, its own
    oracle); results are aggregated in item order either way, so the
    report does not depend on scheduling.
    """
    failures = 0
    dump_dir = Path(cfg.dump_images) if cfg.dump_images else None
    if dump_dir:
        dump_dir.mkdir(parents=True, exist_ok=True)

    outcomes: list = [None] * len(dataset)
    if cfg.workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            futures = {
                pool.submit(_run_item, i, item, strategies, oracle, cfg, dump_dir): i
                for i, item in enumerate(dataset)
            }
            for future, i in futures.items():
                try:
                    outcomes[i] = future.result()
                except Exception as exc:  # noqa: BLE001 - per-item isolation
                    outcomes[i] = exc
    else:
        for i, item in enumerate(dataset):
            try:
                outcomes[i] = _run_item(i, item, strategies, oracle, cfg, dump_dir)
            except Exception as exc:  # noqa: BLE001 - per-item isolation
                outcomes[i] = exc

    rows: list[ItemResult] = []
    full_correct = 0
    full_total = 0
    for item, outcome in zip(dataset, outcomes):
        if isinstance(outcome, Exception):
            failures += 1
            log.warning("item %s failed: %s", item.image_path, outcome)
            if failures > cfg.max_failure_fraction * len(dataset):
                raise HarnessError(f"{failures} of {len(dataset)} items failed; aborting")
            continue
        item_rows, correct, total = outcome
        rows.extend(item_rows)
        full_correct += correct
        full_total += total

    accuracy_full = 100.0 * full_correct / full_total if full_total else 0.0
    return ExperimentReport(rows, summarize(rows, accuracy_full), accuracy_full, failures)


def reaggregate_csv(text: str) -> list[Summary]:
    """Recompute summary rows from the per-item rows of a report CSV."""
    reader = csv.DictReader(io.StringIO(text))
    rows = []
    accuracy_full = 0.0
    for rec in reader:
        if rec["row_type"] == "item":
            rows.append(
                ItemResult(rec["item_id"], rec["strategy"], float(rec["budget"]),
                           int(rec["n_questions"]), int(rec["n_correct"]))
            )
        elif rec["row_type"] == "summary" and rec["accuracy_full"]:
            accuracy_full = float(rec["accuracy_full"])
    return summarize(rows, accuracy_full)
