"""Degradation-curve analytics.

A curve plots a task score against the measured word error rate of the
transcripts the task ran on, one point per noise level plus the clean
reference at WER 0.  Margins of error use the normal approximation
(1.96 * sigma / sqrt(n), population sigma over the per-instance scores).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

Z_95 = 1.96
CES_EPSILON = 1e-9


@dataclass(frozen=True)
class CurvePoint:
    wer: float
    score: float
    moe: float
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("a curve point needs at least one score")
        if self.moe < 0:
            raise ValueError("margin of error cannot be negative")

    @property
    def upper(self) -> float:
        return self.score + self.moe

    @property
    def lower(self) -> float:
        return self.score - self.moe


@dataclass(frozen=True)
class Curve:
    label: str
    points: tuple[CurvePoint, ...]
    warnings: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if not self.points:
            raise ValueError("a curve needs at least one point")
        for a, b in zip(self.points, self.points[1:]):
            if not a.wer < b.wer:
                raise ValueError("curve points must have strictly increasing WER")


def margin_of_error(scores: Sequence[float]) -> float:
    """1.96 * population standard deviation / sqrt(n); 0 for a single score."""
    n = len(scores)
    if n == 0:
        raise ValueError("margin_of_error needs at least one score")
    if n == 1:
        return 0.0
    mean = sum(scores) / n
    variance = sum((s - mean) ** 2 for s in scores) / n
    return Z_95 * math.sqrt(variance) / math.sqrt(n)


def build_curve(
    label: str,
    reference_scores: Sequence[float],
    noisy_points: Sequence[tuple[float, Sequence[float]]],
) -> Curve:
    """Assemble a curve from per-instance scores.

    The reference scores become the WER-0 anchor point.  Points that land on
    exactly the same WER (including a noisy point at 0) are pooled into one
    point over the union of their scores.  Single-score points get a zero
    margin and a recorded warning, since no spread is measurable.
    """
    if not reference_scores:
        raise ValueError("reference_scores must be non-empty")
    pools: dict[float, list[float]] = {0.0: list(reference_scores)}
    for wer, scores in noisy_points:
        if wer < 0:
            raise ValueError(f"negative WER {wer}")
        if not scores:
            raise ValueError(f"no scores for the point at WER {wer}")
        pools.setdefault(float(wer), []).extend(scores)

    warnings = []
    points = []
    for wer in sorted(pools):
        scores = pools[wer]
        if len(scores) == 1:
            warnings.append(
                f"curve {label!r}: single score at WER {wer:g}, margin of error is 0"
            )
        points.append(
            CurvePoint(
                wer=wer,
                score=sum(scores) / len(scores),
                moe=margin_of_error(scores),
                n=len(scores),
            )
        )
    return Curve(label=label, points=tuple(points), warnings=tuple(warnings))


def noise_tolerance_point(curve: Curve) -> float | None:
    """WER at which the curve's upper confidence bound falls below the
    reference point's lower bound, linearly interpolated between points.

    Scanning consecutive points, the first pair whose upper bounds straddle
    the threshold (at or above, then below) marks the crossing; None means
    the curve never drops below the threshold.
    """
    threshold = curve.points[0].lower
    for a, b in zip(curve.points, curve.points[1:]):
        if a.upper >= threshold and b.upper < threshold:
            # interpolate along the upper-bound polyline
            return a.wer + (b.wer - a.wer) * (a.upper - threshold) / (a.upper - b.upper)
    return None


def _trapezoid(xs: Sequence[float], ys: Sequence[float]) -> float:
    area = 0.0
    for i in range(1, len(xs)):
        area += 0.5 * (ys[i - 1] + ys[i]) * (xs[i] - xs[i - 1])
    return area


@dataclass(frozen=True)
class AucResult:
    value: float
    moe: float


def area_under_curve(curve: Curve) -> AucResult:
    """Trapezoidal area under the score polyline over the curve's WER span.

    The margin is half the spread between the areas under the upper and lower
    confidence polylines.
    """
    xs = [p.wer for p in curve.points]
    value = _trapezoid(xs, [p.score for p in curve.points])
    upper = _trapezoid(xs, [p.upper for p in curve.points])
    lower = _trapezoid(xs, [p.lower for p in curve.points])
    return AucResult(value=value, moe=(upper - lower) / 2.0)


def cleaning_effectiveness(
    reference_score: float,
    baseline: Sequence[tuple[float, float]],
    cleaned: Sequence[tuple[float, float]],
    epsilon: float = CES_EPSILON,
) -> float:
    """Mean per-level efficiency of a cleaning technique.

    baseline[i] and cleaned[i] are (wer, score) for noise level i before and
    after cleaning; pairing is by index, not by sorted order.  Each level
    contributes

        ((cleaned_score - baseline_score) / reference_score)
            / sqrt(baseline_wer - cleaned_wer + epsilon)

    so score gained per unit of WER repaired; positive means cleaning helped.
    Cleaning cannot raise WER, so a negative WER delta is rejected as a data
    error rather than silently clamped.
    """
    if len(baseline) != len(cleaned):
        raise ValueError(
            f"baseline has {len(baseline)} levels but cleaned has {len(cleaned)}"
        )
    if not baseline:
        raise ValueError("cleaning_effectiveness needs at least one level")
    if reference_score == 0:
        raise ValueError("reference_score must be non-zero")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")

    total = 0.0
    for i, ((base_wer, base_score), (clean_wer, clean_score)) in enumerate(
        zip(baseline, cleaned)
    ):
        delta_wer = base_wer - clean_wer
        if delta_wer + epsilon <= 0:
            raise ValueError(
                f"level {i}: cleaned WER {clean_wer} exceeds baseline WER {base_wer}"
            )
        delta_score = (clean_score - base_score) / reference_score
        total += delta_score / math.sqrt(delta_wer + epsilon)
    return total / len(baseline)
