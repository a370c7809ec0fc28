"""The experiment harness: support pairing, group selection, the exclusion
rule, judged-pick mIoU, and success-rate computation.

Queries come from the train split, supports from the val split, mirroring
the held-out-pool design. A sample is excluded when both its coarse and
refined masks have a true IoU of exactly 0 (nothing to judge); exclusions
apply uniformly to every report column including n.

Passing ``backend=None`` to evaluate() substitutes a perfect oracle judge
whose verdict is the sign of the true IoU difference; this is the reference
upper bound (its picked mIoU is exactly the mean per-sample max).
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import dataio
from .dataio import DatasetIndex, EvalReport, ReportRow
from .errors import GroupError, SupportPoolError
from .fss import FssBackend, SupportPair
from .judge import JudgeCase, JudgeResult, Verdict, judge
from .maskcore import extract_class, masked_iou
from .synth import seeded_rng


@dataclass(frozen=True)
class SampleRecord:
    image_id: str
    class_id: int
    iou_coarse_true: float
    iou_refined_true: float
    judge: JudgeResult | None  # None for excluded samples
    picked_iou_true: float | None

    @property
    def excluded(self) -> bool:
        return self.judge is None

    @property
    def key(self) -> tuple[str, int]:
        return (self.image_id, self.class_id)


@dataclass(frozen=True)
class GroupSpec:
    """One report row: which samples it aggregates and under what name."""

    kind: str  # random_stratified | top_k | bottom_k | top_bottom
    name: str
    k: int = 0
    per_class: int = 0
    seed: int = 0

    @classmethod
    def top(cls, k: int, name: str | None = None) -> "GroupSpec":
        if k < 1:
            raise GroupError(f"k must be >= 1, got {k}")
        return cls("top_k", name or f"top{k}", k=k)

    @classmethod
    def bottom(cls, k: int, name: str | None = None) -> "GroupSpec":
        if k < 1:
            raise GroupError(f"k must be >= 1, got {k}")
        return cls("bottom_k", name or f"bottom{k}", k=k)

    @classmethod
    def top_bottom(cls, k: int, name: str | None = None) -> "GroupSpec":
        if k < 1:
            raise GroupError(f"k must be >= 1, got {k}")
        return cls("top_bottom", name or f"topbottom{k}", k=k)

    @classmethod
    def random_stratified(cls, per_class: int, seed: int, name: str | None = None) -> "GroupSpec":
        if per_class < 1:
            raise GroupError(f"per_class must be >= 1, got {per_class}")
        return cls("random_stratified", name or f"random{per_class}", per_class=per_class, seed=seed)


def improvement(record: SampleRecord) -> float:
    """Signed true-IoU gain of the refined mask over the coarse one."""
    return record.iou_refined_true - record.iou_coarse_true


def success(judge_result: JudgeResult, record: SampleRecord) -> bool:
    """Did the verdict match the true sign of improvement?

    A nonpositive improvement counts as correctly handled by both
    CoarseBetter and Tie (refinement must demonstrably help to deserve a
    RefinedBetter call).
    """
    delta = improvement(record)
    if judge_result.verdict is Verdict.REFINED_BETTER:
        return delta > 0
    return delta <= 0


def _sort_key(record: SampleRecord):
    return (record.image_id, record.class_id)


def select_group(samples: list[SampleRecord], spec: GroupSpec) -> list[SampleRecord]:
    """Pick the sample subset a report row aggregates."""
    if spec.kind == "top_k" or spec.kind == "bottom_k":
        if spec.k > len(samples):
            raise GroupError(f"{spec.name}: need {spec.k} samples, have {len(samples)}")
        reverse = spec.kind == "top_k"
        ordered = sorted(
            samples,
            key=lambda r: ((-improvement(r)) if reverse else improvement(r), r.image_id, r.class_id),
        )
        return ordered[: spec.k]
    if spec.kind == "top_bottom":
        top = select_group(samples, GroupSpec("top_k", spec.name, k=spec.k))
        bottom = select_group(samples, GroupSpec("bottom_k", spec.name, k=spec.k))
        seen = set()
        union = []
        for r in top + bottom:
            if r.key not in seen:
                seen.add(r.key)
                union.append(r)
        return union
    if spec.kind == "random_stratified":
        by_class: dict[int, list[SampleRecord]] = {}
        for r in sorted(samples, key=_sort_key):
            by_class.setdefault(r.class_id, []).append(r)
        chosen = []
        for class_id in sorted(by_class):
            pool = by_class[class_id]
            if len(pool) < spec.per_class:
                raise GroupError(
                    f"{spec.name}: class {class_id} has {len(pool)} samples, "
                    f"need {spec.per_class}"
                )
            rng = seeded_rng(spec.seed, class_id)
            idx = rng.choice(len(pool), size=spec.per_class, replace=False)
            chosen.extend(pool[int(i)] for i in sorted(idx))
        return chosen
    raise GroupError(f"unknown group kind {spec.kind!r}")


# ---------------------------------------------------------------------------
# Support pairing


def _stable_hash(image_id: str, class_id: int) -> int:
    digest = hashlib.sha256(f"{image_id}:{class_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def pair_support(
    sample: tuple[str, int],
    pool: DatasetIndex,
    shots: int,
    seed: int,
) -> list[SupportPair]:
    """Seeded sample of ``shots`` support pairs containing the sample's class.

    The sample's own image id is never selected. Deterministic for a given
    (seed, sample) regardless of evaluation order.
    """
    image_id, class_id = sample
    eligible = sorted(
        (e for e in pool.entries if class_id in e.classes and e.image_id != image_id),
        key=lambda e: e.image_id,
    )
    if len(eligible) < shots:
        raise SupportPoolError(
            f"sample {image_id}/{class_id}: {len(eligible)} eligible supports, need {shots}"
        )
    rng = seeded_rng(seed, _stable_hash(image_id, class_id))
    idx = rng.choice(len(eligible), size=shots, replace=False)
    pairs = []
    for i in idx:
        entry = eligible[int(i)]
        image = dataio.load_image(entry.image_path)
        label_map = dataio.load_labelmap_png(entry.labelmap_path)
        mask, _ = extract_class(label_map, class_id)
        pairs.append(SupportPair(image, mask))
    return pairs


# ---------------------------------------------------------------------------
# Full evaluation


@dataclass(frozen=True)
class JudgingDataset:
    """A benchmark tree opened for evaluation."""

    root: Path
    train: DatasetIndex
    val: DatasetIndex
    samples: tuple[tuple[str, int], ...]  # (image_id, class_id), sorted


def load_judging_dataset(root: Path | str) -> JudgingDataset:
    """Open a tree produced by the generator (or laid out by hand).

    Samples come from manifest.json when present, otherwise from the
    coarse/ directory contents matched against the train split.
    """
    root = Path(root)
    train = dataio.load_dataset(root, "train")
    val = dataio.load_dataset(root, "val")
    manifest = root / "manifest.json"
    samples: list[tuple[str, int]] = []
    if manifest.is_file():
        payload = json.loads(manifest.read_text(encoding="utf-8"))
        samples = [(s["image_id"], int(s["class_id"])) for s in payload["samples"]]
    else:
        for entry in train.entries:
            prefix = f"{entry.image_id}_"
            for p in sorted((root / "coarse").glob(f"{prefix}*.png")):
                suffix = p.stem[len(prefix):]
                if suffix.isdigit():
                    samples.append((entry.image_id, int(suffix)))
    return JudgingDataset(root, train, val, tuple(sorted(samples)))


def _oracle_result(iou_coarse: float, iou_refined: float) -> JudgeResult:
    if iou_refined > iou_coarse:
        verdict = Verdict.REFINED_BETTER
    elif iou_coarse > iou_refined:
        verdict = Verdict.COARSE_BETTER
    else:
        verdict = Verdict.TIE
    return JudgeResult(iou_coarse, iou_refined, verdict, ((iou_coarse, iou_refined),))


def _judge_sample(
    dataset: JudgingDataset,
    backend: FssBackend | None,
    sample: tuple[str, int],
    shots: int,
    seed: int,
) -> SampleRecord:
    image_id, class_id = sample
    entry = dataset.train.entry(image_id)
    label_map = dataio.load_labelmap_png(entry.labelmap_path)
    gt_mask, valid = extract_class(label_map, class_id)
    coarse = dataio.load_mask_png(dataset.root / "coarse" / f"{image_id}_{class_id}.png")
    refined = dataio.load_mask_png(dataset.root / "refined" / f"{image_id}_{class_id}.png")
    iou_coarse = masked_iou(coarse, gt_mask, valid)
    iou_refined = masked_iou(refined, gt_mask, valid)
    if iou_coarse == 0.0 and iou_refined == 0.0:
        return SampleRecord(image_id, class_id, iou_coarse, iou_refined, None, None)
    if backend is None:
        result = _oracle_result(iou_coarse, iou_refined)
    else:
        query = dataio.load_image(entry.image_path)
        supports = pair_support(sample, dataset.val, shots, seed)
        case = JudgeCase(query, coarse, refined, tuple(supports), class_id=class_id)
        result = judge(backend, case)
    picked = iou_refined if result.verdict is Verdict.REFINED_BETTER else iou_coarse
    return SampleRecord(image_id, class_id, iou_coarse, iou_refined, result, picked)


def judge_all(
    dataset: JudgingDataset,
    backend: FssBackend | None,
    shots: int = 1,
    seed: int = 0,
    jobs: int = 1,
) -> list[SampleRecord]:
    """Judge every sample; the result is sorted by (image_id, class_id).

    Parallelism is only engaged for concurrency-safe backends; scheduling
    never changes the output because records are keyed and re-sorted.
    """
    samples = list(dataset.samples)
    parallel = jobs > 1 and (backend is None or backend.concurrency_safe)
    if parallel:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(
                pool.map(lambda s: _judge_sample(dataset, backend, s, shots, seed), samples)
            )
    else:
        records = [_judge_sample(dataset, backend, s, shots, seed) for s in samples]
    return sorted(records, key=_sort_key)


def summarize(name: str, records: list[SampleRecord]) -> ReportRow:
    """Fold records into one report row; excluded records drop out first."""
    kept = [r for r in records if not r.excluded]
    if not kept:
        raise GroupError(f"group {name!r} has no samples after exclusion")
    n = len(kept)
    return ReportRow(
        group=name,
        n=n,
        miou_coarse=sum(r.iou_coarse_true for r in kept) / n,
        miou_refined=sum(r.iou_refined_true for r in kept) / n,
        miou_jfs=sum(r.picked_iou_true for r in kept) / n,
        success_rate=sum(1 for r in kept if success(r.judge, r)) / n,
    )


def evaluate(
    dataset: JudgingDataset,
    backend: FssBackend | None,
    groups: list[GroupSpec],
    shots: int = 1,
    seed: int = 0,
    *,
    details_path: Path | str | None = None,
    jobs: int = 1,
) -> EvalReport:
    """Run the whole harness and assemble the report.

    Row order follows ``groups``. With ``details_path`` set, a per-sample CSV
    (post-exclusion, sorted by image id and class) is written alongside.
    """
    records = judge_all(dataset, backend, shots=shots, seed=seed, jobs=jobs)
    judged = [r for r in records if not r.excluded]
    rows = [summarize(spec.name, select_group(judged, spec)) for spec in groups]
    if details_path is not None:
        _write_details(judged, Path(details_path))
    return EvalReport(tuple(rows))


def _write_details(records: list[SampleRecord], path: Path):
    lines = ["image_id,class_id,iou_coarse,iou_refined,e_coarse,e_refined,verdict,picked_iou,success"]
    for r in records:
        ok = success(r.judge, r)
        lines.append(
            f"{r.image_id},{r.class_id},{r.iou_coarse_true:.6f},{r.iou_refined_true:.6f},"
            f"{r.judge.e_coarse:.6f},{r.judge.e_refined:.6f},{r.judge.verdict.value},"
            f"{r.picked_iou_true:.6f},{int(ok)}"
        )
    path.write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
