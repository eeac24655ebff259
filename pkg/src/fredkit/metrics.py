"""Threshold-independent evaluation: PSDS1, segment MPAUC and the sum score.

PSDS1 matches detections to ground truth with intersection criteria: a
detection is valid when enough of it overlaps same-class ground truth
(DTC), and a ground-truth event counts as detected when enough of it is
covered by valid detections (GTC).  Sweeping the detection scores yields
per-class operating points; the score is the normalized exact integral of
max(0, mean - alpha_st * std) of the per-class TPR staircases over
effective FP per hour, up to e_max.

MPAUC is the macro average over classes of the partial ROC area up to
max_fpr on pooled fixed-length segments, optionally standardized so that
chance level maps to 0.5 and a perfect ranking to 1.
"""

from __future__ import annotations

import warnings
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .core import ClassVocabulary, EventBox, ScoreMatrix

__all__ = [
    "MpaucSpec",
    "OperatingPoint",
    "PsdsSpec",
    "match_detections",
    "mpauc",
    "psd_roc",
    "psds1",
    "staircase_points",
    "sum_score",
]


@dataclass(frozen=True)
class PsdsSpec:
    """PSDS1 constants; cross-trigger weighting is structurally disabled."""

    rho_dtc: float = 0.7
    rho_gtc: float = 0.7
    alpha_st: float = 1.0
    alpha_ct: float = 0.0
    e_max: float = 100.0

    def __post_init__(self) -> None:
        if not 0.0 < self.rho_dtc <= 1.0 or not 0.0 < self.rho_gtc <= 1.0:
            raise ValueError("intersection ratios must lie in (0, 1]")
        if self.alpha_st < 0:
            raise ValueError("alpha_st must be >= 0")
        if self.alpha_ct != 0.0:
            raise ValueError("cross-trigger cost is not supported (alpha_ct must be 0)")
        if not self.e_max > 0:
            raise ValueError("e_max must be positive")


@dataclass(frozen=True)
class OperatingPoint:
    """One threshold's per-class counts and rates."""

    threshold: float
    tp_count: int
    fp_count: int
    tpr: float
    efpr: float


@dataclass(frozen=True)
class MpaucSpec:
    max_fpr: float = 0.1
    segment_length: float = 1.0
    gt_binarize: float = 0.5
    standardized: bool = True

    def __post_init__(self) -> None:
        if not 0.0 < self.max_fpr <= 1.0:
            raise ValueError("max_fpr must lie in (0, 1]")
        if not self.segment_length > 0:
            raise ValueError("segment_length must be positive")
        if not 0.0 <= self.gt_binarize <= 1.0:
            raise ValueError("gt_binarize must lie in [0, 1]")


def _intersection(a: EventBox, b: EventBox) -> float:
    return max(0.0, min(a.offset, b.offset) - max(a.onset, b.onset))


def match_detections(
    detections: Sequence[EventBox],
    ground_truth: Sequence[EventBox],
    spec: PsdsSpec = PsdsSpec(),
) -> dict[str, tuple[int, int]]:
    """Per-class (tp, fp) counts under the intersection criteria.

    A detection failing the DTC test counts as exactly one false positive;
    a ground-truth event covered at ratio >= rho_gtc by DTC-valid same-class
    detections counts as one true positive.  Intersections never cross clips
    or classes.
    """
    classes = sorted({e.class_name for e in detections} | {e.class_name for e in ground_truth})
    result: dict[str, tuple[int, int]] = {}
    for cls in classes:
        dets = [d for d in detections if d.class_name == cls]
        gts = [g for g in ground_truth if g.class_name == cls]
        valid: list[EventBox] = []
        fp = 0
        for det in dets:
            covered = sum(_intersection(det, g) for g in gts if g.clip_id == det.clip_id)
            if covered / det.duration >= spec.rho_dtc:
                valid.append(det)
            else:
                fp += 1
        tp = 0
        for gt in gts:
            covered = sum(_intersection(gt, d) for d in valid if d.clip_id == gt.clip_id)
            if covered / gt.duration >= spec.rho_gtc:
                tp += 1
        result[cls] = (tp, fp)
    return result


def psd_roc(
    detections: Sequence[EventBox],
    ground_truth: Sequence[EventBox],
    dataset_duration_hours: float,
    spec: PsdsSpec = PsdsSpec(),
) -> dict[str, list[OperatingPoint]]:
    """Operating points per class over all distinct detection-score thresholds.

    A sentinel threshold above 1 contributes the empty-detection point, so
    every class has an operating point at eFPR 0.

    Equivalent to running match_detections at every threshold, but computed
    incrementally: DTC validity does not depend on the threshold, and a
    ground-truth event's coverage only grows as the threshold drops, so each
    event has one critical score at which it turns into a true positive.
    """
    if not dataset_duration_hours > 0:
        raise ValueError("dataset duration must be positive")
    classes = sorted({e.class_name for e in detections} | {e.class_name for e in ground_truth})
    thresholds = sorted({d.score for d in detections}) + [2.0]
    curves: dict[str, list[OperatingPoint]] = {}
    for cls in classes:
        dets = [d for d in detections if d.class_name == cls]
        gts = [g for g in ground_truth if g.class_name == cls]
        gts_by_clip: dict[str, list[EventBox]] = {}
        for g in gts:
            gts_by_clip.setdefault(g.clip_id, []).append(g)
        valid_by_clip: dict[str, list[EventBox]] = {}
        fp_scores: list[float] = []
        for det in dets:
            covered = sum(
                _intersection(det, g) for g in gts_by_clip.get(det.clip_id, ())
            )
            if covered / det.duration >= spec.rho_dtc:
                valid_by_clip.setdefault(det.clip_id, []).append(det)
            else:
                fp_scores.append(det.score)
        # Critical score of a GT event: the largest threshold at which the
        # DTC-valid detections scoring at least that much cover it to rho_gtc.
        tp_scores: list[float] = []
        for gt in gts:
            overlaps = [
                (d.score, _intersection(gt, d))
                for d in valid_by_clip.get(gt.clip_id, ())
            ]
            overlaps.sort(key=lambda pair: -pair[0])
            covered = 0.0
            i = 0
            while i < len(overlaps):
                score = overlaps[i][0]
                while i < len(overlaps) and overlaps[i][0] == score:
                    covered += overlaps[i][1]
                    i += 1
                if covered / gt.duration >= spec.rho_gtc:
                    tp_scores.append(score)
                    break
        fp_sorted = np.sort(np.asarray(fp_scores))
        tp_sorted = np.sort(np.asarray(tp_scores))
        ops = []
        for threshold in thresholds:
            fp = int(fp_sorted.size - np.searchsorted(fp_sorted, threshold, side="left"))
            tp = int(tp_sorted.size - np.searchsorted(tp_sorted, threshold, side="left"))
            ops.append(
                OperatingPoint(
                    threshold=threshold,
                    tp_count=tp,
                    fp_count=fp,
                    tpr=tp / max(1, len(gts)),
                    efpr=fp / dataset_duration_hours,
                )
            )
        curves[cls] = ops
    return curves


def staircase_points(ops: Sequence[OperatingPoint]) -> tuple[np.ndarray, np.ndarray]:
    """Monotone upper staircase: at eFPR e, the best TPR among points with efpr <= e.

    Returns breakpoint positions and values; the function is right continuous
    and starts at eFPR 0.
    """
    pairs = sorted((op.efpr, op.tpr) for op in ops)
    xs: list[float] = []
    ys: list[float] = []
    best = 0.0
    for efpr, tpr in pairs:
        best = max(best, tpr)
        if xs and xs[-1] == efpr:
            ys[-1] = best
        else:
            xs.append(efpr)
            ys.append(best)
    return np.asarray(xs), np.asarray(ys)


def _staircase_value(xs: np.ndarray, ys: np.ndarray, e: float) -> float:
    idx = int(np.searchsorted(xs, e, side="right")) - 1
    return float(ys[idx]) if idx >= 0 else 0.0


def psds1(
    detections: Sequence[EventBox],
    ground_truth: Sequence[EventBox],
    dataset_duration_hours: float,
    spec: PsdsSpec = PsdsSpec(),
) -> float:
    """Normalized area under the effective-TPR curve up to e_max FP/hour.

    The effective TPR at e is max(0, mean - alpha_st * std) over the
    per-class staircases, using the population standard deviation; classes
    without ground-truth events are excluded.  The integral is exact over
    the merged breakpoints.
    """
    gt_classes = sorted({g.class_name for g in ground_truth})
    if not gt_classes:
        raise ValueError("cannot evaluate PSDS1 without ground-truth events")
    curves = psd_roc(detections, ground_truth, dataset_duration_hours, spec)
    staircases = [staircase_points(curves[cls]) for cls in gt_classes]
    breakpoints = {0.0, spec.e_max}
    for xs, _ in staircases:
        breakpoints.update(float(x) for x in xs if x < spec.e_max)
    grid = sorted(breakpoints)
    area = 0.0
    for left, right in zip(grid[:-1], grid[1:]):
        tprs = np.array([_staircase_value(xs, ys, left) for xs, ys in staircases])
        effective = max(0.0, float(tprs.mean()) - spec.alpha_st * float(tprs.std()))
        area += effective * (right - left)
    return area / spec.e_max


def _roc_curve(scores: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """ROC polyline vertices (fpr, tpr), one vertex per distinct score."""
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    n_pos = int(sorted_labels.sum())
    n_neg = sorted_labels.size - n_pos
    tps = np.cumsum(sorted_labels)
    fps = np.cumsum(1 - sorted_labels)
    # Keep the last index of each tie group so tied scores form one vertex.
    last_of_group = np.nonzero(np.diff(sorted_scores, append=-np.inf))[0]
    tpr = np.concatenate(([0.0], tps[last_of_group] / n_pos))
    fpr = np.concatenate(([0.0], fps[last_of_group] / n_neg))
    return fpr, tpr


def _partial_auc_raw(scores: np.ndarray, labels: np.ndarray, max_fpr: float) -> float:
    """Trapezoidal area under the ROC polyline from fpr 0 to max_fpr."""
    fpr, tpr = _roc_curve(scores, labels)
    cut = int(np.searchsorted(fpr, max_fpr, side="right"))
    if cut < fpr.size:
        # Interpolate the polyline at the cut.
        x0, x1 = fpr[cut - 1], fpr[cut]
        y0, y1 = tpr[cut - 1], tpr[cut]
        y_cut = y0 if x1 == x0 else y0 + (y1 - y0) * (max_fpr - x0) / (x1 - x0)
        fpr = np.concatenate((fpr[:cut], [max_fpr]))
        tpr = np.concatenate((tpr[:cut], [y_cut]))
    widths = np.diff(fpr)
    return float(np.sum(widths * (tpr[1:] + tpr[:-1]) / 2.0))


def mpauc(
    scores: Mapping[str, ScoreMatrix],
    soft_ground_truth: Mapping[str, ScoreMatrix],
    spec: MpaucSpec = MpaucSpec(),
    vocabulary: ClassVocabulary | None = None,
    class_names: Sequence[str] | None = None,
) -> float:
    """Macro-averaged partial ROC AUC over pooled per-segment scores.

    Segments pair up by frame index per clip; ground truth is binarized at
    ``gt_binarize``.  Classes with a single ground-truth polarity are
    skipped with a warning; the default class subset is the vocabulary's
    MAESTRO classes.
    """
    if set(scores) != set(soft_ground_truth):
        raise ValueError("scores and ground truth must cover the same clips")
    if not scores:
        raise ValueError("no clips to evaluate")
    if class_names is None:
        if vocabulary is None:
            raise ValueError("need a vocabulary or an explicit class subset")
        class_names = vocabulary.dataset_classes("maestro")
    if vocabulary is not None:
        indices = [vocabulary.index(name) for name in class_names]
        width = len(vocabulary)
    else:
        indices = [int(name) for name in class_names]
        width = None
    clip_ids = sorted(scores)
    for clip_id in clip_ids:
        s, g = scores[clip_id], soft_ground_truth[clip_id]
        if s.num_frames != g.num_frames:
            raise ValueError(f"segment count mismatch for clip {clip_id!r}")
        if width is not None and (s.num_classes != width or g.num_classes != width):
            raise ValueError(f"class count mismatch for clip {clip_id!r}")
    pooled_scores = np.concatenate([scores[c].values for c in clip_ids], axis=0)
    pooled_gt = np.concatenate([soft_ground_truth[c].values for c in clip_ids], axis=0)
    partial_areas: list[float] = []
    for name, col in zip(class_names, indices):
        labels = (pooled_gt[:, col] >= spec.gt_binarize).astype(np.float64)
        if labels.min() == labels.max():
            warnings.warn(
                f"class {name!r} has a single ground-truth polarity; skipped",
                stacklevel=2,
            )
            continue
        raw = _partial_auc_raw(pooled_scores[:, col], labels, spec.max_fpr)
        if spec.standardized:
            chance = 0.5 * spec.max_fpr**2
            best = spec.max_fpr
            partial_areas.append(0.5 * (1.0 + (raw - chance) / (best - chance)))
        else:
            partial_areas.append(raw / spec.max_fpr)
    if not partial_areas:
        raise ValueError("every class was skipped: no class has both polarities")
    return float(np.mean(partial_areas))


def sum_score(psds1_value: float, mpauc_value: float) -> float:
    """The model-selection objective: PSDS1 + MPAUC."""
    if not 0.0 <= psds1_value <= 1.0:
        raise ValueError("psds1 must lie in [0, 1]")
    if not 0.0 <= mpauc_value <= 1.0:
        raise ValueError("mpauc must lie in [0, 1]")
    return psds1_value + mpauc_value
