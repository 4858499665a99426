"""Command-line frontend.

Subcommands:
  generate   write a synthetic dataset directory
  run        execute an active learning run and write the log CSV
  score      score one image from saved prediction passes or a saved model
  report     print the Dice trajectory of a log, and score histograms

Run settings come from a plain key=value config file (one key per line,
'#' starts a comment, unknown keys are rejected). Missing keys fall back to
the documented defaults. Exit codes: 0 success, 1 runtime failure, 2 usage
or config error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .distance import score_sample
from .imaging import binarize, read_pgm, write_pgm
from .metrics import region_histogram, write_region_csv
from .orchestrator import IterationError, RunConfig, run, write_runlog_csv
from .predictor import (
    ExternalPredictor,
    ProtocolError,
    RefPredictor,
    TrainConfig,
    UmapFormatError,
    load_model,
    read_umap,
    write_umap,
)
from .selection import PseudoPolicy, SelectionQuotas
from .synthdata import SynthParams, generate_dataset, load_dataset
from .uncertainty import McConfig, VarianceAccumulator
from .distance import UncertaintyScore

__all__ = ["main", "parse_config_file", "config_to_text", "CONFIG_DEFAULTS"]

logger = logging.getLogger(__name__)

# Config file schema: key -> (type, default). Defaults marked [paper] follow
# the published heuristics; the rest are engine choices.
CONFIG_DEFAULTS: dict[str, tuple[type, object]] = {
    "labeled_size": (int, 600),        # [paper]
    "unlabeled_size": (int, 1000),     # [paper]
    "test_size": (int, 400),           # [paper]
    "t_steps": (int, 10),              # [paper]
    "dropout_p": (float, 0.5),         # [paper]
    "quota_no_detection": (int, 10),   # [paper]
    "quota_uncertain": (int, 10),      # [paper]
    "quota_random": (int, 15),         # [paper]
    "pseudo_delta0": (float, 6.0),
    "pseudo_decay": (float, 0.0),
    "pseudo_floor": (float, 0.0),
    "iterations": (int, 9),            # [paper]
    "epochs": (int, 2),                # [paper]
    "learning_rate": (float, 0.1),
    "augment": (bool, True),
    "batch_size": (int, 256),
    "max_pixels_per_image": (int, 4096),
    "binarize_threshold": (float, 0.5),
    "warm_start": (bool, True),
    "seed": (int, 42),
}


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_config_file(path: str | Path) -> RunConfig:
    """Read key=value lines into a RunConfig; unknown keys are an error."""
    values = {key: default for key, (_, default) in CONFIG_DEFAULTS.items()}
    for lineno, raw_line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw_line!r}")
        key, _, text = line.partition("=")
        key = key.strip()
        if key not in CONFIG_DEFAULTS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        kind, _ = CONFIG_DEFAULTS[key]
        try:
            values[key] = _parse_bool(text) if kind is bool else kind(text.strip())
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return _config_from_values(values)


def _config_from_values(v: dict) -> RunConfig:
    return RunConfig(
        labeled_size=v["labeled_size"],
        unlabeled_size=v["unlabeled_size"],
        test_size=v["test_size"],
        mc=McConfig(t_steps=v["t_steps"], dropout_p=v["dropout_p"]),
        quotas=SelectionQuotas(
            n_no_detection=v["quota_no_detection"],
            n_most_uncertain=v["quota_uncertain"],
            n_random=v["quota_random"],
        ),
        pseudo=PseudoPolicy(
            delta0=v["pseudo_delta0"],
            decay=v["pseudo_decay"],
            floor=v["pseudo_floor"],
        ),
        train=TrainConfig(
            epochs=v["epochs"],
            learning_rate=v["learning_rate"],
            augment=v["augment"],
            batch_size=v["batch_size"],
            max_pixels_per_image=v["max_pixels_per_image"],
        ),
        iterations=v["iterations"],
        binarize_threshold=v["binarize_threshold"],
        seed=v["seed"],
        warm_start=v["warm_start"],
    )


def config_to_text(config: RunConfig) -> str:
    """Echo a RunConfig as the key=value block the parser accepts."""
    v = {
        "labeled_size": config.labeled_size,
        "unlabeled_size": config.unlabeled_size,
        "test_size": config.test_size,
        "t_steps": config.mc.t_steps,
        "dropout_p": config.mc.dropout_p,
        "quota_no_detection": config.quotas.n_no_detection,
        "quota_uncertain": config.quotas.n_most_uncertain,
        "quota_random": config.quotas.n_random,
        "pseudo_delta0": config.pseudo.delta0,
        "pseudo_decay": config.pseudo.decay,
        "pseudo_floor": config.pseudo.floor,
        "iterations": config.iterations,
        "epochs": config.train.epochs,
        "learning_rate": config.train.learning_rate,
        "augment": config.train.augment,
        "batch_size": config.train.batch_size,
        "max_pixels_per_image": config.train.max_pixels_per_image,
        "binarize_threshold": config.binarize_threshold,
        "warm_start": config.warm_start,
        "seed": config.seed,
    }
    lines = [f"{key}={str(val).lower() if isinstance(val, bool) else val}" for key, val in v.items()]
    return "\n".join(lines) + "\n"


def cmd_generate(args: argparse.Namespace) -> int:
    params = SynthParams(
        image_size=args.size,
        noise_sigma=args.noise,
        empty_fraction=args.empty_frac,
    )
    try:
        manifest = generate_dataset(args.n, params, args.seed, args.out)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(manifest)
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    try:
        config = parse_config_file(args.config)
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.baseline == "random":
        from dataclasses import replace

        config = replace(config, strategy="random")
    try:
        dataset = load_dataset(args.data)
    except (OSError, ValueError) as exc:
        print(f"dataset error: {exc}", file=sys.stderr)
        return 1

    predictor_factory = None
    if args.external_cmd:
        workdir = Path(args.log).parent / (Path(args.log).name + ".external")
        predictor_factory = lambda: ExternalPredictor(args.external_cmd, workdir)  # noqa: E731

    try:
        log = run(
            config,
            dataset,
            predictor_factory,
            collect_final_regions=args.regions is not None,
        )
    except IterationError as exc:
        print(f"run failed at iteration {exc.iteration}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, ProtocolError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    write_runlog_csv(log, args.log)
    sidecar = Path(str(args.log) + ".config.txt")
    sidecar.write_text(config_to_text(config))
    if args.regions is not None:
        write_region_csv(args.regions, log.region_rows or [])
    print(args.log)
    return 0


def _score_from_passes(passes_dir: Path, img_shape) -> tuple[np.ndarray, np.ndarray]:
    files = sorted(passes_dir.glob("*.umap"))
    if len(files) < 2:
        raise ValueError(f"need at least 2 .umap pass files in {passes_dir}")
    acc = None
    for path in files:
        m = read_umap(path.read_bytes())
        if m.shape != img_shape:
            raise ValueError(
                f"{path.name}: shape {m.shape} does not match image {img_shape}"
            )
        if acc is None:
            acc = VarianceAccumulator(m.shape[1], m.shape[0])
        acc.update(m)
    return acc.finalize()


def cmd_score(args: argparse.Namespace) -> int:
    try:
        img = read_pgm(Path(args.image).read_bytes())
        if args.passes:
            mean, variance = _score_from_passes(Path(args.passes), img.shape)
        else:
            model = load_model(args.model)
            rng = np.random.default_rng(args.seed)
            from .uncertainty import mc_predict

            mean, variance = mc_predict(
                model, img, McConfig(t_steps=args.t_steps, dropout_p=args.dropout_p), rng
            )
        predicted = binarize(mean, args.threshold)
        score, degenerate = score_sample(variance, predicted)
        if args.dump_umap:
            Path(args.dump_umap).write_bytes(write_umap(variance))
        if args.dump_dist:
            if degenerate:
                raise ValueError(
                    "prediction is empty or full: no contour distance map to dump"
                )
            from .distance import edt_exact
            from .imaging import extract_contour

            Path(args.dump_dist).write_bytes(
                write_umap(edt_exact(extract_contour(predicted)))
            )
    except (OSError, ValueError, UmapFormatError, ProtocolError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"raw={score.raw!r} normalized={score.normalized!r} degenerate={str(degenerate).lower()}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    try:
        with open(args.log, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows or any(
            key not in rows[0] for key in ("iteration", "mean_test_dice")
        ):
            raise ValueError(f"{args.log} is not a run log CSV")
        print("iteration  n_labeled  n_pseudo  mean_test_dice  median_test_dice")
        for row in rows:
            print(
                f"{int(row['iteration']):>9}  {int(row['n_labeled']):>9}  "
                f"{int(row['n_pseudo']):>8}  {float(row['mean_test_dice']):>14.6f}  "
                f"{float(row['median_test_dice']):>16.6f}"
            )
        if args.regions:
            with open(args.regions, newline="") as fh:
                region_rows = list(csv.DictReader(fh))
            if region_rows and "raw_score" not in region_rows[0]:
                raise ValueError(f"{args.regions} is not a region table CSV")
            scores = [
                UncertaintyScore(raw=float(r["raw_score"]), normalized=0.0)
                for r in region_rows
            ]
            counts, edges = region_histogram(scores, args.bins)
            print("score_bin_lo,score_bin_hi,count")
            for i, count in enumerate(counts):
                print(f"{edges[i]!r},{edges[i + 1]!r},{count}")
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alseg",
        description="Active learning engine for binary image segmentation.",
        epilog=(
            "Config file keys and defaults: "
            + ", ".join(f"{k}={d}" for k, (_, d) in CONFIG_DEFAULTS.items())
        ),
    )
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n", type=int, required=True, help="number of samples")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--size", type=int, default=32, help="image side in pixels")
    p.add_argument("--noise", type=float, default=SynthParams().noise_sigma)
    p.add_argument("--empty-frac", type=float, default=SynthParams().empty_fraction)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="execute an active learning run")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--config", required=True, help="key=value config file")
    p.add_argument("--log", required=True, help="output CSV path")
    p.add_argument("--baseline", choices=["ceal", "random"], default="ceal")
    p.add_argument("--external-cmd", default=None, help="external predictor command")
    p.add_argument("--regions", default=None, help="also write a final region table CSV")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("score", help="score a single image")
    p.add_argument("--image", required=True, help="input PGM")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--passes", help="directory of .umap prediction passes")
    group.add_argument("--model", help="saved predictor model (JSON)")
    p.add_argument("--t-steps", type=int, default=10)
    p.add_argument("--dropout-p", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--dump-umap", default=None, help="write the variance map here")
    p.add_argument("--dump-dist", default=None, help="write the distance map here")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("report", help="summarize a run log")
    p.add_argument("--log", required=True)
    p.add_argument("--regions", default=None, help="region table CSV to histogram")
    p.add_argument("--bins", type=int, default=10)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
