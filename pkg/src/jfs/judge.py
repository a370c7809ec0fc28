"""Decide whether refinement helped by prompting an FSS oracle with each
candidate mask and scoring its segmentation of a held-out support image.

Roles invert relative to ordinary few-shot segmentation: the (query image,
candidate mask) pair becomes the prompt, and the trusted support image with
its ground-truth mask becomes the image to segment. Whichever candidate
prompts the oracle into reproducing the support ground truth better wins.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import BackendError, DimensionError
from .fss import FssBackend, SupportPair, predict
from .maskcore import BinaryMask, iou, mean_iou


class Verdict(Enum):
    REFINED_BETTER = "RefinedBetter"
    COARSE_BETTER = "CoarseBetter"
    TIE = "Tie"


@dataclass(frozen=True)
class JudgeCase:
    """One (query image, class) judging unit."""

    query_image: np.ndarray  # uint8 (H, W, 3)
    coarse: BinaryMask
    refined: BinaryMask
    supports: tuple[SupportPair, ...]
    class_id: int = 0

    def __post_init__(self):
        img = np.asarray(self.query_image, dtype=np.uint8)
        if img.ndim != 3 or img.shape[2] != 3:
            raise DimensionError(f"query image must be (H, W, 3), got {img.shape}")
        for name, mask in (("coarse", self.coarse), ("refined", self.refined)):
            if mask.pixels.shape != img.shape[:2]:
                raise DimensionError(
                    f"{name} mask {mask.pixels.shape} does not match query {img.shape[:2]}"
                )
        if not self.supports:
            raise ValueError("supports must be nonempty")
        for pair in self.supports:
            if pair.image.shape == img.shape and np.array_equal(pair.image, img):
                raise ValueError("a support image is identical to the query image")
        img = np.ascontiguousarray(img)
        img.setflags(write=False)
        object.__setattr__(self, "query_image", img)
        object.__setattr__(self, "supports", tuple(self.supports))


@dataclass(frozen=True)
class JudgeResult:
    e_coarse: float
    e_refined: float
    verdict: Verdict
    per_support_scores: tuple[tuple[float, float], ...]


def _verdict(e_coarse: float, e_refined: float) -> Verdict:
    if e_refined > e_coarse:
        return Verdict.REFINED_BETTER
    if e_coarse > e_refined:
        return Verdict.COARSE_BETTER
    return Verdict.TIE


def judge(backend: FssBackend, case: JudgeCase) -> JudgeResult:
    """Score both candidate masks through the oracle and emit a verdict.

    For each support i the oracle segments the support image twice, prompted
    by (query, coarse) and (query, refined); each prediction is scored by IoU
    against the support's ground-truth mask. Scores are averaged over the
    supports and the verdict follows the sign of e_refined - e_coarse.
    """
    scores = []
    for i, pair in enumerate(case.supports):
        try:
            smp_c = predict(backend, pair.image, [SupportPair(case.query_image, case.coarse)])
            smp_r = predict(backend, pair.image, [SupportPair(case.query_image, case.refined)])
        except BackendError as exc:
            exc.support_index = i
            raise
        scores.append((iou(smp_c, pair.mask), iou(smp_r, pair.mask)))
    e_coarse = mean_iou([s[0] for s in scores])
    e_refined = mean_iou([s[1] for s in scores])
    return JudgeResult(e_coarse, e_refined, _verdict(e_coarse, e_refined), tuple(scores))


def pick(verdict: Verdict, coarse: BinaryMask, refined: BinaryMask) -> BinaryMask:
    """Keep the refined mask only on a strict win; ties keep the coarse mask."""
    return refined if verdict is Verdict.REFINED_BETTER else coarse
