import numpy as np
import pytest

from jfs.errors import (
    DimensionError,
    EmptyAggregateError,
    InvalidClassError,
    RleFormatError,
    UndefinedRegionError,
)
from jfs.maskcore import (
    BinaryMask,
    LabelMap,
    Rle,
    extract_class,
    iou,
    mask_algebra,
    masked_iou,
    mean_iou,
    morph,
    rle_decode,
    rle_encode,
    rle_from_bytes,
    rle_to_bytes,
)


def rows_mask(rows, size=4):
    arr = np.zeros((size, size), dtype=bool)
    for r in rows:
        arr[r] = True
    return BinaryMask(arr)


def naive_iou(a: BinaryMask, b: BinaryMask) -> float:
    """Per-pixel counting oracle, no numpy set ops."""
    inter = union = 0
    for r in range(a.height):
        for c in range(a.width):
            pa = bool(a.pixels[r, c])
            pb = bool(b.pixels[r, c])
            inter += pa and pb
            union += pa or pb
    return 1.0 if union == 0 else inter / union


class TestBinaryMask:
    def test_requires_2d_positive(self):
        with pytest.raises(DimensionError):
            BinaryMask(np.zeros((0, 4), dtype=bool))
        with pytest.raises(DimensionError):
            BinaryMask(np.zeros(4, dtype=bool))

    def test_immutable(self):
        m = BinaryMask.full(3, 3)
        with pytest.raises(ValueError):
            m.pixels[0, 0] = False

    def test_area_and_size(self):
        m = rows_mask([0, 1])
        assert m.area == 8
        assert m.size == (4, 4)
        assert m.width == 4 and m.height == 4

    def test_equality(self):
        assert rows_mask([0]) == rows_mask([0])
        assert rows_mask([0]) != rows_mask([1])
        assert rows_mask([0]) != BinaryMask.empty(5, 5)


class TestMaskAlgebra:
    def test_hand_counted_overlap(self):
        # rows 0-1 vs rows 1-2 on a 4x4 grid: overlap is one full row
        out = mask_algebra(rows_mask([0, 1]), rows_mask([1, 2]))
        assert out["intersection_area"] == 4
        assert out["union_area"] == 12
        assert out["a_area"] == 8 and out["b_area"] == 8

    def test_idempotence(self):
        a = rows_mask([0, 2])
        out = mask_algebra(a, a)
        assert out["intersection"] == a
        assert out["union"] == a

    def test_absorbing_cases(self):
        out = mask_algebra(BinaryMask.full(4, 4), BinaryMask.empty(4, 4))
        assert out["intersection_area"] == 0
        assert out["union_area"] == 16

    def test_area_consistency(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            a = BinaryMask(rng.random((5, 7)) < 0.5)
            b = BinaryMask(rng.random((5, 7)) < 0.5)
            out = mask_algebra(a, b)
            assert out["a_area"] + out["b_area"] == out["intersection_area"] + out["union_area"]

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            mask_algebra(BinaryMask.empty(4, 4), BinaryMask.empty(4, 5))


class TestIou:
    def test_hand_counted(self):
        assert iou(rows_mask([0, 1]), rows_mask([1, 2])) == pytest.approx(4 / 12)

    def test_identity(self):
        m = rows_mask([1, 3])
        assert iou(m, m) == 1.0

    def test_disjoint(self):
        assert iou(rows_mask([0]), rows_mask([2])) == 0.0

    def test_empty_empty_is_one(self):
        assert iou(BinaryMask.empty(4, 4), BinaryMask.empty(4, 4)) == 1.0

    def test_symmetry_and_bounds(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            a = BinaryMask(rng.random((6, 6)) < rng.random())
            b = BinaryMask(rng.random((6, 6)) < rng.random())
            v = iou(a, b)
            assert v == iou(b, a)
            assert 0.0 <= v <= 1.0
            assert (v == 1.0) == (a == b)

    def test_matches_counting_oracle_exhaustive_2x2(self):
        masks = [
            BinaryMask(np.array([(bits >> i) & 1 for i in range(4)]).reshape(2, 2).astype(bool))
            for bits in range(16)
        ]
        for a in masks:
            for b in masks:
                assert iou(a, b) == naive_iou(a, b)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            iou(BinaryMask.empty(4, 4), BinaryMask.empty(5, 4))


class TestMaskedIou:
    def test_identity_on_valid_region(self):
        rng = np.random.default_rng(3)
        pred = BinaryMask(rng.random((5, 5)) < 0.5)
        valid = BinaryMask(rng.random((5, 5)) < 0.7)
        assert masked_iou(pred, pred, valid) == 1.0

    def test_disagreement_only_on_invalid(self):
        pred = rows_mask([0, 1])
        gt = rows_mask([0, 1, 3])
        valid = rows_mask([0, 1, 2])  # row 3 is not evaluated
        assert masked_iou(pred, gt, valid) == 1.0

    def test_hand_count_within_valid(self):
        pred = rows_mask([0, 1])
        gt = rows_mask([1, 2])
        valid = rows_mask([0, 1, 2])
        assert masked_iou(pred, gt, valid) == pytest.approx(4 / 12)

    def test_all_true_valid_equals_iou(self):
        rng = np.random.default_rng(5)
        full = BinaryMask.full(6, 6)
        for _ in range(100):
            a = BinaryMask(rng.random((6, 6)) < 0.5)
            b = BinaryMask(rng.random((6, 6)) < 0.5)
            assert masked_iou(a, b, full) == iou(a, b)

    def test_empty_valid_raises(self):
        with pytest.raises(UndefinedRegionError):
            masked_iou(rows_mask([0]), rows_mask([0]), BinaryMask.empty(4, 4))


class TestMeanIou:
    def test_two_point_mean(self):
        assert mean_iou([0.5, 1.0]) == 0.75

    def test_singleton(self):
        assert mean_iou([0.123]) == 0.123

    def test_empty_raises(self):
        with pytest.raises(EmptyAggregateError):
            mean_iou([])

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            mean_iou([0.5, 1.2])


class TestExtractClass:
    def test_two_by_two_enumeration(self):
        lm = LabelMap(np.array([[1, 1], [255, 0]], dtype=np.uint8))
        mask, valid = extract_class(lm, 1)
        assert mask.pixels.tolist() == [[True, True], [False, False]]
        assert valid.pixels.tolist() == [[True, True], [False, True]]

    def test_absent_class(self):
        lm = LabelMap(np.array([[0, 255], [0, 0]], dtype=np.uint8))
        mask, valid = extract_class(lm, 3)
        assert mask.area == 0
        assert valid.pixels.tolist() == [[True, False], [True, True]]

    def test_ignore_class_rejected(self):
        lm = LabelMap(np.zeros((2, 2), dtype=np.uint8))
        with pytest.raises(InvalidClassError):
            extract_class(lm, 255)

    def test_present_classes_skips_bg_and_ignore(self):
        lm = LabelMap(np.array([[0, 3], [255, 3]], dtype=np.uint8))
        assert lm.present_classes() == (3,)


class TestRle:
    def test_empty_mask_single_run(self):
        assert rle_encode(BinaryMask.empty(3, 3)).runs == (9,)

    def test_full_mask_leading_zero(self):
        assert rle_encode(BinaryMask.full(3, 3)).runs == (0, 9)

    def test_roundtrip_seeded(self):
        rng = np.random.default_rng(13)
        for _ in range(300):
            w = int(rng.integers(1, 17))
            h = int(rng.integers(1, 17))
            m = BinaryMask(rng.random((h, w)) < rng.random())
            assert rle_decode(rle_encode(m)) == m

    def test_corrupt_sum_rejected(self):
        with pytest.raises(RleFormatError):
            rle_decode(Rle(3, 3, (4, 4)))

    def test_zero_interior_run_rejected(self):
        with pytest.raises(RleFormatError):
            rle_decode(Rle(3, 3, (4, 0, 5)))

    def test_container_roundtrip(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            m = BinaryMask(rng.random((9, 5)) < 0.4)
            rle = rle_encode(m)
            again = rle_from_bytes(rle_to_bytes(rle))
            assert again == rle
            assert rle_decode(again) == m

    def test_container_magic_and_version(self):
        data = rle_to_bytes(rle_encode(BinaryMask.empty(2, 2)))
        with pytest.raises(RleFormatError):
            rle_from_bytes(b"XXXX" + data[4:])
        with pytest.raises(RleFormatError):
            rle_from_bytes(data[:4] + b"\x07" + data[5:])
        with pytest.raises(RleFormatError):
            rle_from_bytes(data[:-2])

    def test_container_sum_validated(self):
        bad = Rle(3, 3, (4, 4))
        with pytest.raises(RleFormatError):
            rle_from_bytes(rle_to_bytes(bad))


class TestMorph:
    def test_dilate_center_pixel(self):
        arr = np.zeros((5, 5), dtype=bool)
        arr[2, 2] = True
        out = morph(BinaryMask(arr), "dilate", 1)
        expect = np.zeros((5, 5), dtype=bool)
        expect[1:4, 1:4] = True
        assert out.pixels.tolist() == expect.tolist()

    def test_erode_single_pixel_annihilates(self):
        arr = np.zeros((5, 5), dtype=bool)
        arr[2, 2] = True
        assert morph(BinaryMask(arr), "erode", 1).area == 0

    def test_closing_contains_original_away_from_borders(self):
        # fg confined to the central block so dilation never reaches the edge
        rng = np.random.default_rng(23)
        for _ in range(50):
            arr = np.zeros((6, 6), dtype=bool)
            arr[2:4, 2:4] = rng.random((2, 2)) < 0.6
            m = BinaryMask(arr)
            closed = morph(morph(m, "dilate", 1), "erode", 1)
            assert np.all(closed.pixels[m.pixels])

    def test_erode_shrinks_at_borders(self):
        out = morph(BinaryMask.full(5, 5), "erode", 1)
        assert out.area == 9  # only the 3x3 interior survives

    def test_bad_args(self):
        with pytest.raises(ValueError):
            morph(BinaryMask.full(3, 3), "dilate", 0)
        with pytest.raises(ValueError):
            morph(BinaryMask.full(3, 3), "open", 1)
