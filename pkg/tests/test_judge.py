import numpy as np
import pytest

from jfs.errors import BackendError, DimensionError
from jfs.fss import EchoBackend, FssBackend, PrototypeBackend, SupportPair
from jfs.judge import JudgeCase, Verdict, judge, pick
from jfs.maskcore import BinaryMask, extract_class, iou
from jfs.synth import DegradeConfig, SceneConfig, degrade_mask, generate_scene

CONFIG = SceneConfig(width=48, height=48, num_classes=3)


def scene_case(query_seed, support_seed, coarse, refined, class_id=1):
    query_img, _ = generate_scene(query_seed, CONFIG)
    support_img, support_gt = generate_scene(support_seed, CONFIG)
    support_mask, _ = extract_class(support_gt, class_id)
    return JudgeCase(
        query_img,
        coarse,
        refined,
        (SupportPair(support_img, support_mask),),
        class_id=class_id,
    )


def query_gt_mask(query_seed, class_id=1):
    _, gt = generate_scene(query_seed, CONFIG)
    mask, _ = extract_class(gt, class_id)
    return mask


class TestJudge:
    def test_identical_masks_tie(self):
        gt = query_gt_mask(1)
        case = scene_case(1, 2, gt, gt)
        result = judge(PrototypeBackend(), case)
        assert result.verdict is Verdict.TIE
        assert result.e_coarse == result.e_refined

    def test_good_refinement_wins(self):
        # coarse mask bleeds into a background slab (prompt prototype drifts
        # toward the background color); refined equals the ground truth
        gt = query_gt_mask(3)
        bled = gt.pixels.copy()
        bled[38:46, :] = True
        case = scene_case(3, 4, BinaryMask(bled), gt)
        result = judge(PrototypeBackend(), case)
        assert result.verdict is Verdict.REFINED_BETTER
        assert result.e_refined > result.e_coarse

    def test_background_engulfing_refinement_loses(self):
        # the classic refinement failure: refined mask swallows a large
        # background region, dragging the prompt's prototype off the object
        gt = query_gt_mask(3)
        engulfed = gt.pixels.copy()
        engulfed[30:, :] = True
        case = scene_case(3, 4, gt, BinaryMask(engulfed))
        result = judge(PrototypeBackend(), case)
        assert result.verdict is Verdict.COARSE_BETTER

    def test_swap_symmetry(self):
        rng = np.random.default_rng(0)
        backend = PrototypeBackend()
        for trial in range(10):
            q_seed, s_seed = 100 + trial, 200 + trial
            gt = query_gt_mask(q_seed)
            a = degrade_mask(gt, trial, DegradeConfig(mode="marginal", target_gap=(0.0, 0.3)))
            b = degrade_mask(gt, trial + 50, DegradeConfig(mode="marginal", target_gap=(0.0, 0.3)))
            fwd = judge(backend, scene_case(q_seed, s_seed, a, b))
            rev = judge(backend, scene_case(q_seed, s_seed, b, a))
            assert fwd.e_coarse == rev.e_refined
            assert fwd.e_refined == rev.e_coarse
            flips = {
                Verdict.REFINED_BETTER: Verdict.COARSE_BETTER,
                Verdict.COARSE_BETTER: Verdict.REFINED_BETTER,
                Verdict.TIE: Verdict.TIE,
            }
            assert rev.verdict is flips[fwd.verdict]

    def test_judge_is_repeatable(self):
        gt = query_gt_mask(7)
        coarse = degrade_mask(gt, 1, DegradeConfig(mode="corrupt", target_gap=(0.2, 0.3)))
        case = scene_case(7, 8, coarse, gt)
        backend = PrototypeBackend()
        first = judge(backend, case)
        second = judge(backend, case)
        assert first == second

    def test_echo_closed_form(self):
        # with the echo backend, E scores equal iou(resampled prompt, support
        # mask); the reference resample here is an independent per-pixel loop
        gt = query_gt_mask(9)
        coarse = degrade_mask(gt, 2, DegradeConfig(mode="corrupt", target_gap=(0.3, 0.4)))
        case = scene_case(9, 10, coarse, gt)
        result = judge(EchoBackend(), case)
        support = case.supports[0]
        sh, sw = support.image.shape[:2]

        def reference_resample(mask):
            out = np.zeros((sh, sw), dtype=bool)
            for r in range(sh):
                for c in range(sw):
                    out[r, c] = mask.pixels[(r * mask.height) // sh, (c * mask.width) // sw]
            return BinaryMask(out)

        assert result.e_coarse == iou(reference_resample(coarse), support.mask)
        assert result.e_refined == iou(reference_resample(gt), support.mask)

    def test_identical_supports_equal_single_score(self):
        gt = query_gt_mask(11)
        coarse = degrade_mask(gt, 3, DegradeConfig(mode="corrupt", target_gap=(0.2, 0.4)))
        query_img, _ = generate_scene(11, CONFIG)
        support_img, support_gt = generate_scene(12, CONFIG)
        support_mask, _ = extract_class(support_gt, 1)
        pair = SupportPair(support_img, support_mask)
        single = judge(PrototypeBackend(), JudgeCase(query_img, coarse, gt, (pair,)))
        triple = judge(PrototypeBackend(), JudgeCase(query_img, coarse, gt, (pair, pair, pair)))
        assert triple.e_coarse == single.e_coarse
        assert triple.e_refined == single.e_refined
        assert len(triple.per_support_scores) == 3

    def test_backend_error_carries_support_index(self):
        class Exploding(FssBackend):
            name = "exploding"
            concurrency_safe = True

            def predict(self, query, support):
                raise BackendError("no gpu today")

        gt = query_gt_mask(1)
        case = scene_case(1, 2, gt, gt)
        with pytest.raises(BackendError) as info:
            judge(Exploding(), case)
        assert info.value.support_index == 0


class TestJudgeCaseValidation:
    def test_mask_dims_must_match_query(self):
        query_img, _ = generate_scene(1, CONFIG)
        support_img, support_gt = generate_scene(2, CONFIG)
        support_mask, _ = extract_class(support_gt, 1)
        with pytest.raises(DimensionError):
            JudgeCase(
                query_img,
                BinaryMask.empty(4, 4),
                BinaryMask.empty(4, 4),
                (SupportPair(support_img, support_mask),),
            )

    def test_supports_nonempty(self):
        query_img, _ = generate_scene(1, CONFIG)
        gt = query_gt_mask(1)
        with pytest.raises(ValueError):
            JudgeCase(query_img, gt, gt, ())

    def test_support_equal_to_query_rejected(self):
        query_img, _ = generate_scene(1, CONFIG)
        gt = query_gt_mask(1)
        with pytest.raises(ValueError):
            JudgeCase(query_img, gt, gt, (SupportPair(query_img, gt),))


class TestPick:
    def test_all_verdicts(self):
        coarse, refined = BinaryMask.empty(2, 2), BinaryMask.full(2, 2)
        assert pick(Verdict.REFINED_BETTER, coarse, refined) is refined
        assert pick(Verdict.COARSE_BETTER, coarse, refined) is coarse
        assert pick(Verdict.TIE, coarse, refined) is coarse
