"""Candidate-mask refinement: assignment by overlap, merging, and the
large-segment failure mode that makes judging necessary.

Run: python demos/03_refinement.py
"""

import numpy as np

from jfs import (
    BinaryMask,
    CandidateBank,
    RefineConfig,
    SceneConfig,
    assign_candidates,
    extract_class,
    generate_scene,
    iou,
    oversegment,
    refine,
)

# Build a scene and oversegment its ground truth into candidate parts --------
config = SceneConfig(width=48, height=48, num_classes=3)
image, gt = generate_scene(seed=8, config=config)
bank = oversegment(gt, seed=0, granularity=2)
print(f"scene classes {gt.present_classes()}, candidate bank of {len(bank)} parts")

# Degraded coarse masks still overlap the right parts -------------------------
coarse = {}
for k in gt.present_classes():
    mask, _ = extract_class(gt, k)
    shifted = np.roll(mask.pixels, 3, axis=1)  # a sloppy, offset coarse mask
    coarse[k] = BinaryMask(shifted)

assignments = assign_candidates(coarse, bank)
kept = sum(a.assigned_class is not None for a in assignments)
print(f"assigned {kept}/{len(assignments)} candidates (the rest overlap nothing)")

refined = refine(coarse, bank)
for k in sorted(coarse):
    gt_mask, _ = extract_class(gt, k)
    print(f"class {k}: coarse IoU {iou(coarse[k], gt_mask):.3f} -> "
          f"refined IoU {iou(refined[k], gt_mask):.3f}")

# The failure mode: a huge background candidate touching the coarse mask ------
print("\nthe large-segment failure:")
obj = BinaryMask(np.pad(np.ones((6, 6), dtype=bool), ((2, 8), (2, 8))))
coarse_arr = obj.pixels.copy()
coarse_arr[8, 2] = True  # one sloppy pixel into the background
sloppy_coarse = {1: BinaryMask(coarse_arr)}
background = BinaryMask(np.pad(np.ones((8, 16), dtype=bool), ((8, 0), (0, 0))))
trap_bank = CandidateBank("trap", (obj, background))

greedy = refine(sloppy_coarse, trap_bank, RefineConfig(min_overlap_fraction=0.0))
strict = refine(sloppy_coarse, trap_bank, RefineConfig(min_overlap_fraction=0.5))
print(f"object area {obj.area}; refined area with tau=0.0: {greedy[1].area} "
      f"(engulfed the background blob)")
print(f"refined area with tau=0.5: {strict[1].area} (the blob fails the overlap test)")
