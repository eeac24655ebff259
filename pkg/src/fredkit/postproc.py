"""Post-processing of frame scores into detections.

Two independent reducers: a class-independent running median, and
change-detection-based event boxes.  The box extractor works per class on
the confidence curve: smooth, apply a symmetric step filter, pick change
points at its thresholded extrema, score the segments in between, merge
events across confident gaps, and emit the surviving events.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import ClassVocabulary, EventBox, ScoreMatrix

__all__ = ["CSebbSpec", "MedianSpec", "csebb_extract", "median_filter"]


@dataclass(frozen=True)
class MedianSpec:
    window: int = 7

    def __post_init__(self) -> None:
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError("median window must be odd and >= 1")


@dataclass(frozen=True)
class CSebbSpec:
    """Knobs of the change-detection box extractor.

    ``step_window`` is the half-window of the step filter; onset/offset
    thresholds gate its extrema.  A gap between two events is absorbed when
    its score reaches ``merge_ratio`` times the weaker neighbour's score.
    """

    avg_window: int = 3
    step_window: int = 7
    onset_threshold: float = 0.1
    offset_threshold: float = 0.1
    merge_ratio: float = 0.75
    score_floor: float = 0.01
    score_mode: str = "mean"

    def __post_init__(self) -> None:
        if self.avg_window < 1:
            raise ValueError("avg_window must be >= 1")
        if self.step_window < 1:
            raise ValueError("step_window must be >= 1")
        if self.onset_threshold < 0 or self.offset_threshold < 0:
            raise ValueError("thresholds must be >= 0")
        if not 0.0 <= self.merge_ratio <= 1.0:
            raise ValueError("merge_ratio must lie in [0, 1]")
        if self.score_floor < 0:
            raise ValueError("score_floor must be >= 0")
        if self.score_mode not in ("mean", "max"):
            raise ValueError("score_mode must be 'mean' or 'max'")


def median_filter(matrix: ScoreMatrix, spec: MedianSpec = MedianSpec()) -> ScoreMatrix:
    """Centered running median per class with edge replication."""
    if spec.window == 1:
        return matrix.with_values(matrix.values.copy())
    half = spec.window // 2
    padded = np.pad(matrix.values, ((half, half), (0, 0)), mode="edge")
    filtered = np.median(sliding_window_view(padded, spec.window, axis=0), axis=-1)
    return matrix.with_values(filtered)


def _moving_average(col: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average, truncated at the clip edges."""
    n = col.size
    left = (window - 1) // 2
    right = window // 2
    csum = np.concatenate(([0.0], np.cumsum(col)))
    lo = np.maximum(np.arange(n) - left, 0)
    hi = np.minimum(np.arange(n) + right + 1, n)
    return (csum[hi] - csum[lo]) / (hi - lo)


def _step_response(smoothed: np.ndarray, half_window: int) -> np.ndarray:
    """Mean of the next L frames minus mean of the previous L frames.

    Evaluated at the T + 1 frame boundaries; windows truncate at the clip
    edges and empty windows contribute 0.
    """
    n = smoothed.size
    csum = np.concatenate(([0.0], np.cumsum(smoothed)))
    t = np.arange(n + 1)
    right_lo, right_hi = t, np.minimum(t + half_window, n)
    left_lo, left_hi = np.maximum(t - half_window, 0), t
    right_len = right_hi - right_lo
    left_len = left_hi - left_lo
    right_mean = np.where(right_len > 0, (csum[right_hi] - csum[right_lo]) / np.maximum(right_len, 1), 0.0)
    left_mean = np.where(left_len > 0, (csum[left_hi] - csum[left_lo]) / np.maximum(left_len, 1), 0.0)
    return right_mean - left_mean


def _local_maxima(d: np.ndarray, threshold: float) -> list[int]:
    """Indices of strict-left local maxima exceeding the threshold."""
    peaks = []
    n = d.size
    for t in range(n):
        left_ok = t == 0 or d[t] > d[t - 1]
        right_ok = t == n - 1 or d[t] >= d[t + 1]
        if left_ok and right_ok and d[t] > threshold:
            peaks.append(t)
    return peaks


def _segment_score(col: np.ndarray, start: int, end: int, mode: str) -> float:
    window = col[start:end]
    return float(window.mean() if mode == "mean" else window.max())


def _extract_column(col: np.ndarray, spec: CSebbSpec) -> list[tuple[int, int, float]]:
    """Event segments (start frame, end frame, score) for one class column."""
    n = col.size
    smoothed = _moving_average(col, spec.avg_window)
    step = _step_response(smoothed, spec.step_window)
    rises = set(_local_maxima(step, spec.onset_threshold))
    falls = set(_local_maxima(-step, spec.offset_threshold))
    points = sorted({0, n} | rises | falls)

    # Segments delimited by a rise on the left or a fall on the right are
    # event candidates; everything else is a gap.  A clip with no interior
    # change points is one whole-clip candidate.
    segments: list[list] = []  # [start, end, score, is_event]
    for start, end in zip(points[:-1], points[1:]):
        is_event = start in rises or end in falls or len(points) == 2
        segments.append([start, end, _segment_score(col, start, end, spec.score_mode), is_event])

    # Absorb gaps bounded by two events when the gap stays confident enough,
    # merging leftmost-first until stable.
    merged = True
    while merged:
        merged = False
        for i in range(1, len(segments) - 1):
            prev_seg, gap, next_seg = segments[i - 1], segments[i], segments[i + 1]
            if gap[3] or not (prev_seg[3] and next_seg[3]):
                continue
            if gap[2] >= spec.merge_ratio * min(prev_seg[2], next_seg[2]):
                start, end = prev_seg[0], next_seg[1]
                fused = [start, end, _segment_score(col, start, end, spec.score_mode), True]
                segments[i - 1 : i + 2] = [fused]
                merged = True
                break

    return [(s, e, score) for s, e, score, is_event in segments
            if is_event and score > spec.score_floor]


def csebb_extract(
    matrix: ScoreMatrix,
    spec: CSebbSpec = CSebbSpec(),
    vocabulary: ClassVocabulary | None = None,
) -> list[EventBox]:
    """Change-detection bounding boxes for every class of one clip.

    Boxes of one class are disjoint and time sorted; classes never couple.
    Without a vocabulary, classes are named by column index.
    """
    if vocabulary is not None and matrix.num_classes != len(vocabulary):
        raise ValueError("matrix width does not match the vocabulary")
    boxes: list[EventBox] = []
    for c in range(matrix.num_classes):
        name = vocabulary.names[c] if vocabulary is not None else str(c)
        for start, end, score in _extract_column(matrix.values[:, c], spec):
            boxes.append(
                EventBox(
                    matrix.clip_id,
                    name,
                    start * matrix.frame_period,
                    end * matrix.frame_period,
                    score,
                )
            )
    boxes.sort(key=EventBox.sort_key)
    return boxes
