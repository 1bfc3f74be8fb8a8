"""Command-line front end.

Subcommands:

    warp    apply the forward or inverse Mobius warp to one image
    sample  run one sampling strategy on one image
    adapt   run the full adaptation loop on one dataset item
    sweep   budgets x strategies x dataset -> report CSV
    report  recompute summary tables (and a plot-ready pivot) from a CSV

The oracle is selected by --oracle-cmd (child process over stdio), the
FOVEATE_ORACLE_URL environment variable (HTTP), or --mock-oracle for
the in-process mocks (region[:tau] uses each item's region against its
own full-resolution image; echo[:answer] returns a fixed answer).
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import harness, oracle as oracle_mod, samplers
from .geometry import MobiusParams, normalize
from .harness import ExperimentConfig, load_dataset, read_image, region_to_pixels, write_image
from .metrics import LossWeights
from .optimizer import AdaptConfig, adapt
from .samplers import PixelBudget, SamplingSpec
from .warp import forward_warp, inverse_warp

DEFAULT_MOCK_TAU = 0.1


def _add_oracle_args(parser):
    parser.add_argument("--oracle-cmd", help="child-process oracle command (stdio protocol)")
    parser.add_argument(
        "--mock-oracle",
        help="in-process mock: region[:tau] or echo[:answer]",
    )
    parser.add_argument("--oracle-timeout", type=float, default=60.0)


def _add_adapt_args(parser):
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--iters", type=int, default=25)
    parser.add_argument("--spsa-delta", type=float, default=0.05)
    parser.add_argument("--lr", type=float, default=0.1)
    parser.add_argument("--eta", type=float, default=1.0)
    parser.add_argument("--beta-grad", type=float, default=1.0)
    parser.add_argument("--questions-per-spsa", type=int, default=4)
    parser.add_argument(
        "--weights", default="1,0,1", metavar="A,B,G",
        help="perceptual loss weights: saliency, plugin, mse",
    )
    parser.add_argument("--fov", type=float, default=90.0)


def _parse_weights(text: str) -> LossWeights:
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 3:
        raise SystemExit("--weights expects three comma-separated numbers")
    return LossWeights(*parts)


def _parse_theta(text: str) -> MobiusParams:
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 4:
        raise SystemExit("--theta expects a,b,c,d")
    return normalize(MobiusParams(*parts))


def _adapt_config(args) -> AdaptConfig:
    return AdaptConfig(
        iterations=args.iters,
        spsa_delta=args.spsa_delta,
        learning_rate=args.lr,
        eta=args.eta,
        beta_grad=args.beta_grad,
        questions_per_spsa=args.questions_per_spsa,
        weights=_parse_weights(args.weights),
        rng_seed=args.seed,
    )


def _make_oracle(args):
    """Returns an oracle instance or a per-item factory (mock-region)."""
    if getattr(args, "mock_oracle", None):
        spec = args.mock_oracle
        kind, _, param = spec.partition(":")
        if kind == "echo":
            return oracle_mod.AnswerEchoOracle(param or "A")
        if kind == "region":
            tau = float(param) if param else DEFAULT_MOCK_TAU

            def factory(item, full_image):
                region = item.region or (0.25, 0.25, 0.75, 0.75)
                rect = region_to_pixels(region, full_image.width, full_image.height)
                return oracle_mod.RegionFidelityOracle(full_image, rect, tau)

            return factory
        raise SystemExit(f"unknown mock oracle {spec!r}")
    if getattr(args, "oracle_cmd", None):
        return oracle_mod.StdioOracle(args.oracle_cmd, timeout=args.oracle_timeout)
    url = os.environ.get("FOVEATE_ORACLE_URL")
    if url:
        return oracle_mod.HttpOracle(url, timeout=args.oracle_timeout)
    raise SystemExit("no oracle configured (--oracle-cmd, --mock-oracle, or FOVEATE_ORACLE_URL)")


def cmd_warp(args):
    img = read_image(args.input)
    theta = _parse_theta(args.theta)
    geom = img.geom(args.fov)
    warp_fn = inverse_warp if args.inverse else forward_warp
    out, mask = warp_fn(img, theta, geom)
    write_image(out, args.output)
    print(f"wrote {args.output} (coverage {mask.interior_fraction:.3f})")


def cmd_sample(args):
    img = read_image(args.input)
    theta = _parse_theta(args.theta) if args.strategy == "bass" else None
    spec = SamplingSpec(args.strategy, PixelBudget(args.budget), theta=theta)
    out = samplers.apply_strategy(img, spec, img.geom(args.fov))
    write_image(out, args.output)
    count = samplers.strategy_sample_count(args.strategy, spec.budget, img.width, img.height)
    print(f"wrote {args.output} ({args.strategy}, budget {args.budget}, {count} samples)")


def cmd_adapt(args):
    dataset = load_dataset(args.dataset)
    if not (0 <= args.item < len(dataset)):
        raise SystemExit(f"--item must be in [0, {len(dataset) - 1}]")
    item = dataset[args.item]
    img = read_image(item.image_path)
    geom = img.geom(args.fov)
    oracle = _make_oracle(args)
    if callable(oracle):
        oracle = oracle(item, img)
    from dataclasses import replace

    cfg = replace(_adapt_config(args), budget=PixelBudget(args.budget))
    theta_init = harness.region_init_theta(item.region, geom) if item.region else None
    result = adapt(img, list(item.questions), oracle, cfg, geom, theta_init=theta_init)
    if args.output:
        write_image(result.sampled_image, args.output)
    theta = result.theta_star
    print(f"theta_star = ({theta.a:.6f}, {theta.b:.6f}, {theta.c:.6f}, {theta.d:.6f})")
    print(f"best combined loss = {result.best_loss:.6f}; oracle calls = {result.oracle_calls}")
    mean_s = float(np.mean(result.iteration_seconds)) if result.iteration_seconds else 0.0
    print(f"mean iteration time = {mean_s:.4f} s")
    for i, l_img, l_text, g_norm in result.loss_trace:
        print(f"  iter {i:3d}  L_img={l_img:.6f}  L_text={l_text:.6f}  |g|={g_norm:.6f}")


def cmd_sweep(args):
    dataset = load_dataset(args.dataset)
    budgets = args.budget or [0.05]
    strategies = args.strategy or list(samplers.STRATEGIES)
    specs = []
    for budget in budgets:
        for strategy in strategies:
            theta = MobiusParams.identity() if strategy == "bass" else None
            specs.append(SamplingSpec(strategy, PixelBudget(budget), theta=theta))
    adapt_cfg = _adapt_config(args)
    cfg = ExperimentConfig(
        seed=args.seed,
        fov_deg=args.fov,
        adapt=adapt_cfg,
        dump_images=args.dump_images,
        workers=args.workers,
    )
    report = harness.run_experiment(dataset, specs, _make_oracle(args), cfg)
    report.write_csv(args.out)
    print(f"wrote {args.out} ({len(report.rows)} item rows, "
          f"{len(report.summaries)} summaries, {report.failures} failures)")
    for s in report.summaries:
        gain = "--" if s.gain_vs_uniform is None else f"{s.gain_vs_uniform:+.2f}%"
        print(f"  {s.strategy:16s} B={s.budget:.3f}  acc={s.accuracy:6.2f}%  "
              f"retained={s.retained:6.2f}%  gain={gain}")


def cmd_report(args):
    text = Path(args.input).read_text(encoding="utf-8")
    summaries = harness.reaggregate_csv(text)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["strategy", "budget", "accuracy", "retained", "gain_vs_uniform"])
    for s in summaries:
        writer.writerow(
            [s.strategy, f"{s.budget:.4f}", f"{s.accuracy:.4f}", f"{s.retained:.4f}",
             "" if s.gain_vs_uniform is None else f"{s.gain_vs_uniform:.4f}"]
        )
    if args.plot_csv:
        strategies = sorted({s.strategy for s in summaries})
        budgets = sorted({s.budget for s in summaries})
        with open(args.plot_csv, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["budget"] + strategies)
            for budget in budgets:
                row = [f"{budget:.4f}"]
                for strategy in strategies:
                    match = [s for s in summaries if (s.strategy, s.budget) == (strategy, budget)]
                    row.append(f"{match[0].accuracy:.4f}" if match else "")
                w.writerow(row)
        print(f"wrote {args.plot_csv}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="foveate",
        description="budget-constrained adaptive image sampling experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("warp", help="apply a Mobius warp to an image")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--theta", required=True, metavar="A,B,C,D")
    p.add_argument("--inverse", action="store_true")
    p.add_argument("--fov", type=float, default=90.0)
    p.set_defaults(func=cmd_warp)

    p = sub.add_parser("sample", help="run one sampling strategy on one image")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--strategy", choices=samplers.STRATEGIES, default="uniform")
    p.add_argument("--budget", type=float, default=0.05)
    p.add_argument("--theta", default="1,0,0,1", metavar="A,B,C,D")
    p.add_argument("--fov", type=float, default=90.0)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("adapt", help="adapt warp coefficients on one dataset item")
    p.add_argument("--dataset", required=True)
    p.add_argument("--item", type=int, default=0)
    p.add_argument("--budget", type=float, default=0.05)
    p.add_argument("--output", help="write the final sampled image here")
    _add_adapt_args(p)
    _add_oracle_args(p)
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("sweep", help="budgets x strategies x dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--budget", type=float, action="append")
    p.add_argument("--strategy", choices=samplers.STRATEGIES, action="append")
    p.add_argument("--out", default="report.csv")
    p.add_argument("--dump-images", metavar="DIR")
    p.add_argument("--workers", type=int, default=1)
    _add_adapt_args(p)
    _add_oracle_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="recompute summaries from a report CSV")
    p.add_argument("input")
    p.add_argument("--plot-csv", help="write budget-vs-accuracy pivot table here")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
