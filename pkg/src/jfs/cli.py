"""Command-line entry point: ``jfs {synth,refine,judge,eval}``.

Every subcommand is deterministic given its flags. Machine-readable output
goes to stdout or files; diagnostics go to stderr, gated by the JFS_LOG
environment variable (error, info, debug). Exit codes: 0 success, 1 runtime
failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import dataio, evaluation, synth
from .errors import DimensionError, JfsError
from .fss import (
    EchoBackend,
    ExternalBackend,
    FssBackend,
    PrototypeBackend,
    PrototypeConfig,
    SupportPair,
)
from .judge import JudgeCase, judge
from .maskcore import BinaryMask
from .refine import RefineConfig
from .refine import refine as run_refine

log = logging.getLogger("jfs")


def _configure_logging():
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    level = levels.get(os.environ.get("JFS_LOG", "error").lower(), logging.ERROR)
    logging.basicConfig(stream=sys.stderr, level=level, format="jfs: %(message)s")


def _fraction(text: str) -> float:
    try:
        value = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must be in [0,1], got {value}")
    return value


def _build_backend(spec: str, spatial_weight: float, timeout: float) -> FssBackend | None:
    if spec == "oracle":
        return None
    if spec == "builtin:prototype":
        return PrototypeBackend(PrototypeConfig(spatial_weight=spatial_weight))
    if spec == "builtin:echo":
        return EchoBackend()
    if spec.startswith("external:"):
        argv = [part for part in spec[len("external:"):].split(",") if part]
        if not argv:
            raise JfsError("external backend spec has an empty command")
        return ExternalBackend(argv, timeout=timeout)
    raise JfsError(
        f"unknown backend {spec!r}; use builtin:prototype, builtin:echo, "
        f"external:<comma-separated argv>, or oracle"
    )


def _parse_groups(text: str, seed: int, class_count: int) -> list[evaluation.GroupSpec]:
    groups = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        kind, _, arg = token.partition(":")
        name = token.replace(":", "")
        if kind == "top":
            groups.append(evaluation.GroupSpec.top(int(arg), name))
        elif kind == "bottom":
            groups.append(evaluation.GroupSpec.bottom(int(arg), name))
        elif kind == "topbottom":
            groups.append(evaluation.GroupSpec.top_bottom(int(arg), name))
        elif kind == "random":
            per_class, _, expected = arg.partition("x")
            if expected and int(expected) != class_count:
                raise JfsError(
                    f"group {token!r} expects {expected} classes, dataset has {class_count}"
                )
            groups.append(evaluation.GroupSpec.random_stratified(int(per_class), seed, name))
        else:
            raise JfsError(f"unknown group kind {kind!r} in {token!r}")
    if not groups:
        raise JfsError("no groups given")
    return groups


# ---------------------------------------------------------------------------
# Subcommands


def cmd_synth(args) -> int:
    scene = synth.SceneConfig(
        width=args.width,
        height=args.height,
        num_classes=args.classes,
        shapes_per_image=(args.min_shapes, args.max_shapes),
    )
    improve = synth.default_improve_config()
    corrupt = synth.default_corrupt_config()
    synth.generate_benchmark(
        args.seed,
        args.n,
        scene,
        improve,
        corrupt,
        args.corrupt_fraction,
        args.out,
        n_val=args.n_val,
        with_candidates=args.candidates,
        granularity=args.granularity,
    )
    print(Path(args.out) / "manifest.json")
    return 0


def _load_coarse_masks(directory: Path, image_id: str) -> dict[int, BinaryMask]:
    masks: dict[int, BinaryMask] = {}
    prefix = f"{image_id}_"
    if directory.is_dir():
        for p in sorted(directory.glob(f"{prefix}*.png")):
            suffix = p.stem[len(prefix):]
            if suffix.isdigit():
                masks[int(suffix)] = dataio.load_mask_png(p)
    return masks


def cmd_refine(args) -> int:
    root = Path(args.dataset)
    index = dataio.load_dataset(root, args.split)
    coarse_dir = Path(args.coarse) if args.coarse else root / "coarse"
    cand_dir = Path(args.candidates) if args.candidates else root / "candidates"
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = RefineConfig(min_overlap_fraction=args.min_overlap)
    refined_count = 0
    for entry in index.entries:
        coarse = _load_coarse_masks(coarse_dir, entry.image_id)
        if not coarse:
            log.debug("no coarse masks for %s, skipping", entry.image_id)
            continue
        label_map = dataio.load_labelmap_png(entry.labelmap_path)
        for class_id, mask in coarse.items():
            if mask.size != label_map.size:
                raise DimensionError(
                    f"{coarse_dir / f'{entry.image_id}_{class_id}.png'}: "
                    f"mask {mask.size} does not match image {label_map.size}"
                )
        bank = dataio.load_candidate_bank(cand_dir, entry.image_id, expected_size=label_map.size)
        refined = run_refine(coarse, bank, config)
        for class_id, mask in refined.items():
            dataio.save_mask_png(mask, out_dir / f"{entry.image_id}_{class_id}.png")
            refined_count += 1
        log.info("refined %s (%d classes, %d candidates)", entry.image_id, len(coarse), len(bank))
    print(f"wrote {refined_count} refined masks to {out_dir}")
    return 0


def cmd_judge(args) -> int:
    query = dataio.load_image(args.query)
    coarse = dataio.load_mask_png(args.coarse)
    refined = dataio.load_mask_png(args.refined)
    supports = []
    for token in args.support:
        image_path, sep, mask_path = token.rpartition(":")
        if not sep:
            raise JfsError(f"support {token!r} must be <image.png>:<mask.png>")
        supports.append(
            SupportPair(dataio.load_image(image_path), dataio.load_mask_png(mask_path))
        )
    backend = _build_backend(args.backend, args.spatial_weight, args.timeout)
    if backend is None:
        raise JfsError("the oracle judge needs ground truth; use a real backend here")
    try:
        case = JudgeCase(query, coarse, refined, tuple(supports), class_id=args.class_id)
        result = judge(backend, case)
    finally:
        if isinstance(backend, ExternalBackend):
            backend.close()
    print(
        json.dumps(
            {
                "e_coarse": result.e_coarse,
                "e_refined": result.e_refined,
                "verdict": result.verdict.value,
            }
        )
    )
    return 0


def cmd_eval(args) -> int:
    dataset = evaluation.load_judging_dataset(args.dataset)
    class_count = len({class_id for _, class_id in dataset.samples})
    groups = _parse_groups(args.groups, args.seed, class_count)
    backend = _build_backend(args.backend, args.spatial_weight, args.timeout)
    jobs = args.jobs
    if jobs > 1 and backend is not None and not backend.concurrency_safe:
        log.warning("backend %s is not concurrency-safe; forcing --jobs 1", backend.name)
        jobs = 1
    try:
        report = evaluation.evaluate(
            dataset,
            backend,
            groups,
            shots=args.shots,
            seed=args.seed,
            details_path=args.details,
            jobs=jobs,
        )
    finally:
        if isinstance(backend, ExternalBackend):
            backend.close()
    dataio.write_report(report, args.report, format="csv")
    if args.report_json:
        dataio.write_report(report, args.report_json, format="json")
    for row in report.rows:
        log.info(
            "%s: n=%d coarse=%.4f refined=%.4f picked=%.4f success=%.4f",
            row.group, row.n, row.miou_coarse, row.miou_refined, row.miou_jfs, row.success_rate,
        )
    print(args.report)
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jfs",
        description="Judge segmentation refinement with a few-shot-segmentation oracle.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a seeded synthetic benchmark tree")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=int, required=True, help="number of train samples")
    p.add_argument("--corrupt-fraction", type=_fraction, default=0.5)
    p.add_argument("--out", required=True)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--min-shapes", type=int, default=3)
    p.add_argument("--max-shapes", type=int, default=5)
    p.add_argument("--n-val", type=int, default=8, help="size of the support pool")
    p.add_argument("--candidates", action="store_true", help="also write candidate banks")
    p.add_argument("--granularity", type=int, default=3)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("refine", help="merge candidate masks into refined masks")
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--coarse", help="coarse mask dir (default <dataset>/coarse)")
    p.add_argument("--candidates", help="candidate dir (default <dataset>/candidates)")
    p.add_argument("--out", required=True)
    p.add_argument("--min-overlap", type=_fraction, default=0.0)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("judge", help="judge one coarse/refined pair")
    p.add_argument("--backend", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--coarse", required=True)
    p.add_argument("--refined", required=True)
    p.add_argument(
        "--support", action="append", required=True, metavar="IMAGE.png:MASK.png"
    )
    p.add_argument("--class-id", type=int, default=1)
    p.add_argument("--spatial-weight", type=float, default=0.0)
    p.add_argument("--timeout", type=float, default=30.0)
    p.set_defaults(func=cmd_judge)

    p = sub.add_parser("eval", help="run the full judging harness over a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--backend", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--shots", type=int, default=1)
    p.add_argument("--groups", default="top:20,bottom:20")
    p.add_argument("--report", required=True, help="report CSV path")
    p.add_argument("--report-json", help="also write the report as JSON")
    p.add_argument("--details", help="per-sample CSV path")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--spatial-weight", type=float, default=0.0)
    p.add_argument("--timeout", type=float, default=30.0)
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (JfsError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
