"""Overlap-driven mask refinement: assign candidate segments to classes,
then merge the survivors into per-class refined masks.

Each candidate mask is assigned to the class whose coarse mask it overlaps
the most (ties to the lowest class id); candidates overlapping nothing are
discarded. Selection keeps a candidate for class k only if at least a
``min_overlap_fraction`` share of the candidate lies inside the class's
coarse mask. A class whose candidates all drop out falls back to its coarse
mask, so refinement never silently outputs an empty class.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataio import CandidateBank
from .errors import DimensionError
from .maskcore import BinaryMask


@dataclass(frozen=True)
class Assignment:
    """Where one candidate mask landed during assignment."""

    candidate_index: int
    assigned_class: int | None  # None means discarded (zero overlap everywhere)
    overlap_by_class: dict[int, int] = field(compare=False)

    def __post_init__(self):
        if self.assigned_class is not None:
            best = max(self.overlap_by_class.values(), default=0)
            if self.overlap_by_class.get(self.assigned_class) != best:
                raise ValueError("assigned class must maximize overlap")


@dataclass(frozen=True)
class RefineConfig:
    """Selection threshold: minimum |candidate ∩ coarse_k| / |candidate|."""

    min_overlap_fraction: float = 0.0
    tie_break: str = "lowest_class_id"

    def __post_init__(self):
        if not 0.0 <= self.min_overlap_fraction <= 1.0:
            raise ValueError(
                f"min_overlap_fraction must be in [0,1], got {self.min_overlap_fraction}"
            )
        if self.tie_break != "lowest_class_id":
            raise ValueError(f"unsupported tie_break {self.tie_break!r}")


def assign_candidates(
    coarse: dict[int, BinaryMask], bank: CandidateBank
) -> list[Assignment]:
    """Assign every candidate to the class it overlaps most, or discard it."""
    class_ids = sorted(coarse)
    if bank.candidates and class_ids:
        first = bank.candidates[0]
        for k in class_ids:
            if coarse[k].size != first.size:
                raise DimensionError(
                    f"coarse mask for class {k} is {coarse[k].size}, "
                    f"candidates are {first.size}"
                )
    assignments = []
    for idx, cand in enumerate(bank.candidates):
        overlaps = {
            k: int(np.count_nonzero(cand.pixels & coarse[k].pixels)) for k in class_ids
        }
        best = max(overlaps.values(), default=0)
        if best == 0:
            assigned = None
        else:
            assigned = min(k for k, v in overlaps.items() if v == best)
        assignments.append(Assignment(idx, assigned, overlaps))
    return assignments


def select_and_merge(
    assignments: list[Assignment],
    bank: CandidateBank,
    coarse: dict[int, BinaryMask],
    config: RefineConfig = RefineConfig(),
) -> dict[int, BinaryMask]:
    """Union the surviving candidates per class; fall back to the coarse mask.

    A candidate assigned to class k survives when
    |candidate ∩ coarse_k| / |candidate| >= min_overlap_fraction.
    """
    if len(assignments) != len(bank.candidates):
        raise ValueError("assignments do not match the candidate bank")
    tau = config.min_overlap_fraction
    refined: dict[int, BinaryMask] = {}
    for k, coarse_mask in coarse.items():
        merged = None
        for a in assignments:
            if a.assigned_class != k:
                continue
            cand = bank.candidates[a.candidate_index]
            if a.overlap_by_class[k] < tau * cand.area:
                continue
            merged = cand.pixels if merged is None else (merged | cand.pixels)
        if merged is None:
            refined[k] = coarse_mask
        else:
            refined[k] = BinaryMask(merged)
    return refined


def refine(
    coarse: dict[int, BinaryMask],
    bank: CandidateBank,
    config: RefineConfig = RefineConfig(),
) -> dict[int, BinaryMask]:
    """assign_candidates followed by select_and_merge."""
    return select_and_merge(assign_candidates(coarse, bank), bank, coarse, config)
