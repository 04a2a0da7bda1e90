import math
import random

import pytest

from noisecurve.analytics import (
    Curve,
    CurvePoint,
    area_under_curve,
    build_curve,
    cleaning_effectiveness,
    margin_of_error,
    noise_tolerance_point,
)


def _curve(*triples):
    return Curve(
        label="c",
        points=tuple(CurvePoint(wer=w, score=s, moe=m, n=5) for w, s, m in triples),
    )


class TestMarginOfError:
    def test_pinned_two_point_value(self):
        # sigma of {0, 1} is 0.5; 1.96 * 0.5 / sqrt(2)
        assert margin_of_error([0.0, 1.0]) == pytest.approx(
            0.6929646455628166, rel=1e-12
        )

    def test_single_score_is_zero(self):
        assert margin_of_error([0.7]) == 0.0

    def test_constant_scores(self):
        assert margin_of_error([0.4] * 10) == pytest.approx(0.0, abs=1e-15)

    def test_shrinks_with_n(self):
        wide = margin_of_error([0.0, 1.0] * 2)
        narrow = margin_of_error([0.0, 1.0] * 8)
        assert narrow == pytest.approx(wide / 2.0, rel=1e-12)

    def test_empty(self):
        with pytest.raises(ValueError):
            margin_of_error([])


class TestCurvePoint:
    def test_bounds(self):
        p = CurvePoint(wer=0.1, score=0.6, moe=0.05, n=3)
        assert p.upper == pytest.approx(0.65)
        assert p.lower == pytest.approx(0.55)

    def test_validation(self):
        with pytest.raises(ValueError):
            CurvePoint(wer=0.1, score=0.5, moe=0.0, n=0)
        with pytest.raises(ValueError):
            CurvePoint(wer=0.1, score=0.5, moe=-0.1, n=2)


class TestCurve:
    def test_requires_points(self):
        with pytest.raises(ValueError):
            Curve(label="c", points=())

    def test_requires_strictly_increasing_wer(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            _curve((0.0, 1.0, 0.0), (0.0, 0.9, 0.0))


class TestBuildCurve:
    def test_reference_anchors_at_zero(self):
        curve = build_curve("m", [0.8, 0.9], [(0.2, [0.5, 0.6])])
        assert [p.wer for p in curve.points] == [0.0, 0.2]
        assert curve.points[0].score == pytest.approx(0.85)
        assert curve.points[0].n == 2
        assert curve.points[1].moe == pytest.approx(margin_of_error([0.5, 0.6]))

    def test_equal_wer_points_pool(self):
        curve = build_curve(
            "m",
            [1.0],
            [(0.3, [0.4]), (0.3, [0.6]), (0.0, [0.8])],
        )
        assert len(curve.points) == 2
        anchor, noisy = curve.points
        # the WER-0 noisy point pooled into the anchor
        assert anchor.n == 2
        assert anchor.score == pytest.approx(0.9)
        assert noisy.n == 2
        assert noisy.score == pytest.approx(0.5)
        assert noisy.moe == pytest.approx(margin_of_error([0.4, 0.6]))

    def test_points_sorted_by_wer(self):
        curve = build_curve("m", [1.0, 1.0], [(0.4, [0.1, 0.2]), (0.1, [0.7, 0.8])])
        assert [p.wer for p in curve.points] == [0.0, 0.1, 0.4]

    def test_single_score_warns(self):
        curve = build_curve("m", [1.0], [(0.5, [0.5, 0.6])])
        assert curve.points[0].moe == 0.0
        assert len(curve.warnings) == 1
        assert "single score at WER 0" in curve.warnings[0]
        assert "margin of error is 0" in curve.warnings[0]

    def test_validation(self):
        with pytest.raises(ValueError, match="non-empty"):
            build_curve("m", [], [(0.1, [0.5])])
        with pytest.raises(ValueError, match="negative WER"):
            build_curve("m", [1.0], [(-0.1, [0.5])])
        with pytest.raises(ValueError, match="no scores"):
            build_curve("m", [1.0], [(0.1, [])])


class TestNoiseTolerancePoint:
    def test_interpolated_crossing(self):
        curve = _curve((0.0, 1.0, 0.1), (0.2, 0.95, 0.05), (0.4, 0.75, 0.05))
        # threshold 0.9; uppers 1.1, 1.0, 0.8: crossing between 0.2 and 0.4
        assert noise_tolerance_point(curve) == pytest.approx(0.3, abs=1e-9)

    def test_crossing_lands_on_a_point(self):
        curve = _curve((0.0, 1.0, 0.1), (0.2, 0.85, 0.05), (0.4, 0.75, 0.05))
        # second point's upper bound is exactly the threshold
        assert noise_tolerance_point(curve) == pytest.approx(0.2, abs=1e-9)

    def test_never_crosses(self):
        curve = _curve((0.0, 1.0, 0.1), (0.5, 0.95, 0.05), (1.0, 0.92, 0.05))
        assert noise_tolerance_point(curve) is None

    def test_first_crossing_wins(self):
        curve = _curve(
            (0.0, 1.0, 0.1),
            (0.2, 0.6, 0.0),  # dips below 0.9
            (0.4, 1.2, 0.0),  # recovers
            (0.6, 0.5, 0.0),  # dips again
        )
        ntp = noise_tolerance_point(curve)
        # crossing interpolates inside the first dip
        assert 0.0 < ntp < 0.2
        expected = 0.0 + 0.2 * (1.1 - 0.9) / (1.1 - 0.6)
        assert ntp == pytest.approx(expected, rel=1e-12)

    def test_single_point_curve(self):
        curve = _curve((0.0, 1.0, 0.1))
        assert noise_tolerance_point(curve) is None


class TestAreaUnderCurve:
    def test_pinned_value(self):
        curve = _curve((0.0, 1.0, 0.0), (0.5, 0.75, 0.0), (1.0, 0.0, 0.0))
        result = area_under_curve(curve)
        assert result.value == pytest.approx(0.625, abs=1e-12)
        assert result.moe == 0.0

    def test_moe_is_mean_margin_times_span(self):
        # constant margin m: upper and lower areas differ by 2*m*span
        curve = _curve((0.0, 1.0, 0.1), (0.4, 0.8, 0.1), (1.0, 0.3, 0.1))
        result = area_under_curve(curve)
        assert result.moe == pytest.approx(0.1 * 1.0, rel=1e-12)

    def test_single_point_has_zero_area(self):
        result = area_under_curve(_curve((0.0, 0.9, 0.2)))
        assert result.value == 0.0
        assert result.moe == 0.0

    def test_translation_and_scaling(self):
        rng = random.Random(17)
        for _ in range(25):
            n = rng.randrange(2, 6)
            wers = sorted(rng.sample(range(1, 100), n))
            triples = [(w / 100.0, rng.uniform(0.0, 1.0), rng.uniform(0.0, 0.2)) for w in wers]
            base = area_under_curve(_curve(*triples))
            span = triples[-1][0] - triples[0][0]
            shifted = area_under_curve(
                _curve(*[(w, s + 1.0, m) for w, s, m in triples])
            )
            assert shifted.value == pytest.approx(base.value + span, rel=1e-9, abs=1e-12)
            assert shifted.moe == pytest.approx(base.moe, rel=1e-9, abs=1e-12)
            scaled = area_under_curve(
                _curve(*[(w, 3.0 * s, 3.0 * m) for w, s, m in triples])
            )
            assert scaled.value == pytest.approx(3.0 * base.value, rel=1e-9, abs=1e-12)
            assert scaled.moe == pytest.approx(3.0 * base.moe, rel=1e-9, abs=1e-12)


class TestCleaningEffectiveness:
    def test_no_effect_is_zero(self):
        assert cleaning_effectiveness(1.0, [(0.3, 0.5)], [(0.3, 0.5)]) == pytest.approx(
            0.0, abs=1e-9
        )

    def test_pinned_single_level(self):
        value = cleaning_effectiveness(1.0, [(0.3, 0.5)], [(0.1, 0.6)])
        assert value == pytest.approx(0.1 / math.sqrt(0.2 + 1e-9), rel=1e-12)
        assert value == pytest.approx(0.22360679719096194, rel=1e-12)

    def test_mean_over_levels(self):
        one = cleaning_effectiveness(1.0, [(0.3, 0.5)], [(0.1, 0.6)])
        two = cleaning_effectiveness(1.0, [(0.5, 0.4)], [(0.2, 0.7)])
        both = cleaning_effectiveness(
            1.0, [(0.3, 0.5), (0.5, 0.4)], [(0.1, 0.6), (0.2, 0.7)]
        )
        assert both == pytest.approx((one + two) / 2.0, rel=1e-12)

    def test_pairs_by_index_not_order(self):
        # swapping the level order changes nothing because pairing is positional
        forward = cleaning_effectiveness(
            1.0, [(0.3, 0.5), (0.6, 0.2)], [(0.1, 0.6), (0.4, 0.5)]
        )
        reversed_levels = cleaning_effectiveness(
            1.0, [(0.6, 0.2), (0.3, 0.5)], [(0.4, 0.5), (0.1, 0.6)]
        )
        assert forward == pytest.approx(reversed_levels, rel=1e-12)

    def test_reference_scale_normalizes(self):
        small = cleaning_effectiveness(1.0, [(0.3, 0.5)], [(0.1, 0.6)])
        large = cleaning_effectiveness(2.0, [(0.3, 1.0)], [(0.1, 1.2)])
        assert large == pytest.approx(small, rel=1e-12)

    def test_harmful_cleaning_is_negative(self):
        value = cleaning_effectiveness(1.0, [(0.3, 0.5)], [(0.1, 0.4)])
        assert value < 0

    def test_increased_wer_rejected(self):
        with pytest.raises(ValueError, match="level 0: cleaned WER"):
            cleaning_effectiveness(1.0, [(0.1, 0.5)], [(0.3, 0.6)])
        with pytest.raises(ValueError, match="level 1"):
            cleaning_effectiveness(
                1.0, [(0.3, 0.5), (0.1, 0.5)], [(0.1, 0.6), (0.4, 0.6)]
            )

    def test_equal_wer_is_tolerated_via_epsilon(self):
        value = cleaning_effectiveness(1.0, [(0.3, 0.5)], [(0.3, 0.6)])
        assert value == pytest.approx(0.1 / math.sqrt(1e-9), rel=1e-9)

    def test_validation(self):
        with pytest.raises(ValueError, match="levels"):
            cleaning_effectiveness(1.0, [(0.3, 0.5)], [])
        with pytest.raises(ValueError, match="at least one level"):
            cleaning_effectiveness(1.0, [], [])
        with pytest.raises(ValueError, match="non-zero"):
            cleaning_effectiveness(0.0, [(0.3, 0.5)], [(0.1, 0.6)])
        with pytest.raises(ValueError, match="epsilon"):
            cleaning_effectiveness(1.0, [(0.3, 0.5)], [(0.1, 0.6)], epsilon=0.0)
