"""One judging case, step by step: role-inverted few-shot segmentation.

The (query image, candidate mask) pair becomes the oracle's prompt; the
held-out support image with trusted ground truth is what it must segment.
Whichever prompt reproduces the support ground truth better wins.

Run: python demos/04_judging.py
"""

from jfs import (
    BinaryMask,
    JudgeCase,
    PrototypeBackend,
    SceneConfig,
    SupportPair,
    Verdict,
    extract_class,
    generate_scene,
    iou,
    judge,
    pick,
    predict,
)

config = SceneConfig(width=64, height=64, num_classes=3)
query_image, query_gt = generate_scene(seed=3, config=config)
support_image, support_gt = generate_scene(seed=4, config=config)

class_id = 1
gt_mask, _ = extract_class(query_gt, class_id)
support_mask, _ = extract_class(support_gt, class_id)
print(f"judging class {class_id}: query object {gt_mask.area}px, "
      f"support object {support_mask.area}px")

# Fabricate the two candidates: refined is faithful, coarse bleeds ------------
coarse_arr = gt_mask.pixels.copy()
coarse_arr[48:60, :] = True  # absorbed a background slab
coarse = BinaryMask(coarse_arr)
refined = gt_mask
print(f"true quality: coarse IoU {iou(coarse, gt_mask):.3f}, refined IoU 1.000")

backend = PrototypeBackend()
pair = SupportPair(support_image, support_mask)

# Peek at the oracle's two support-mask predictions ---------------------------
smp_coarse = predict(backend, support_image, [SupportPair(query_image, coarse)])
smp_refined = predict(backend, support_image, [SupportPair(query_image, refined)])
print(f"support prediction vs support GT: coarse prompt {iou(smp_coarse, support_mask):.3f}, "
      f"refined prompt {iou(smp_refined, support_mask):.3f}")

case = JudgeCase(query_image, coarse, refined, (pair,), class_id=class_id)
result = judge(backend, case)
print(f"judge scores: e_coarse={result.e_coarse:.3f} e_refined={result.e_refined:.3f} "
      f"-> {result.verdict.value}")

chosen = pick(result.verdict, coarse, refined)
print(f"picked mask IoU vs query GT: {iou(chosen, gt_mask):.3f}")

# Symmetry: swapping the candidates flips the verdict -------------------------
swapped = judge(backend, JudgeCase(query_image, refined, coarse, (pair,), class_id=class_id))
assert swapped.e_coarse == result.e_refined and swapped.e_refined == result.e_coarse
print(f"swapped case verdict: {swapped.verdict.value} (scores exchanged exactly)")

# A tie keeps the coarse mask (conservative default) --------------------------
tie = judge(backend, JudgeCase(query_image, coarse, coarse, (pair,), class_id=class_id))
assert tie.verdict is Verdict.TIE
print(f"identical candidates: {tie.verdict.value}, pick keeps the coarse mask")
