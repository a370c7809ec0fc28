"""Mask fundamentals: algebra, IoU, run-length storage, morphology.

Run: python demos/01_mask_basics.py
"""

import numpy as np

from jfs import (
    BinaryMask,
    LabelMap,
    extract_class,
    iou,
    mask_algebra,
    masked_iou,
    morph,
    rle_decode,
    rle_encode,
    rle_from_bytes,
    rle_to_bytes,
)


def show(mask, title):
    print(f"{title}:")
    for row in mask.pixels:
        print("   " + "".join("#" if v else "." for v in row))


# Two overlapping bands on a 6x6 grid -------------------------------------
a = BinaryMask(np.arange(6)[:, None].repeat(6, 1) < 3)   # top half
b = BinaryMask((np.arange(6)[:, None].repeat(6, 1) >= 2)
               & (np.arange(6)[:, None].repeat(6, 1) < 5))  # middle band
show(a, "mask a (rows 0-2)")
show(b, "mask b (rows 2-4)")

algebra = mask_algebra(a, b)
print(f"areas: |a|={algebra['a_area']} |b|={algebra['b_area']} "
      f"|a&b|={algebra['intersection_area']} |a|b|={algebra['union_area']}")
print(f"identity |a|+|b| == |a&b|+|a|b|: "
      f"{algebra['a_area'] + algebra['b_area']} == "
      f"{algebra['intersection_area'] + algebra['union_area']}")
print(f"iou(a, b) = {iou(a, b):.4f}")
print(f"iou of two empty masks (agreement on absence) = "
      f"{iou(BinaryMask.empty(4, 4), BinaryMask.empty(4, 4))}")

# Ignore regions ------------------------------------------------------------
labels = np.zeros((6, 6), dtype=np.uint8)
labels[:3] = 1
labels[:, 5] = 255  # a border column nobody is graded on
label_map = LabelMap(labels)
cat, valid = extract_class(label_map, 1)
print(f"\nclass-1 area {cat.area}, valid pixels {valid.area} of 36")
pred = BinaryMask(np.arange(6)[:, None].repeat(6, 1) < 3)
print(f"masked IoU ignoring the 255 column: {masked_iou(pred, cat, valid):.4f}")

# Run-length storage ---------------------------------------------------------
rle = rle_encode(a)
print(f"\nRLE runs for a: {rle.runs}")
blob = rle_to_bytes(rle)
print(f"container: {len(blob)} bytes, magic {blob[:4]!r}, version {blob[4]}")
assert rle_decode(rle_from_bytes(blob)) == a
print("round-trip through the binary container is exact")

# Morphology -----------------------------------------------------------------
dot = np.zeros((7, 7), dtype=bool)
dot[3, 3] = True
grown = morph(BinaryMask(dot), "dilate", 1)
show(grown, "\nsingle pixel dilated by r=1")
print(f"erode back: area {morph(grown, 'erode', 1).area} (the original dot)")
