"""Independent brute-force reference implementations used by the tests.

Everything here is deliberately written as plain loops over Python floats,
with no code shared with the package, so agreement with the package is
meaningful.
"""

from __future__ import annotations

import math

import numpy as np


def brute_coarse_pool(values: np.ndarray, pad: int, window: int, stride: int) -> np.ndarray:
    """Max pooling over zero-padded frames, one window at a time."""
    n_frames, n_classes = values.shape
    padded = np.concatenate(
        [np.zeros((pad, n_classes)), values, np.zeros((pad, n_classes))]
    )
    n_out = (n_frames + 2 * pad - window) // stride + 1
    out = np.zeros((n_out, n_classes))
    for j in range(n_out):
        for c in range(n_classes):
            best = 0.0
            for t in range(j * stride, j * stride + window):
                if padded[t, c] > best:
                    best = padded[t, c]
            out[j, c] = best
    return out


def brute_clip_confidence(values: np.ndarray) -> list[float]:
    n_frames, n_classes = values.shape
    out = []
    for c in range(n_classes):
        best = 0.0
        for t in range(n_frames):
            if values[t, c] > best:
                best = values[t, c]
        out.append(best)
    return out


def _interval_overlap(a_on, a_off, b_on, b_off) -> float:
    return max(0.0, min(a_off, b_off) - max(a_on, b_on))


def brute_match(dets, gts, cls, rho_dtc, rho_gtc) -> tuple[int, int]:
    """(tp, fp) for one class using explicit interval loops."""
    dets_c = [d for d in dets if d.class_name == cls]
    gts_c = [g for g in gts if g.class_name == cls]
    valid = []
    fp = 0
    for d in dets_c:
        covered = 0.0
        for g in gts_c:
            if g.clip_id == d.clip_id:
                covered += _interval_overlap(d.onset, d.offset, g.onset, g.offset)
        if covered / (d.offset - d.onset) >= rho_dtc:
            valid.append(d)
        else:
            fp += 1
    tp = 0
    for g in gts_c:
        covered = 0.0
        for d in valid:
            if d.clip_id == g.clip_id:
                covered += _interval_overlap(d.onset, d.offset, g.onset, g.offset)
        if covered / (g.offset - g.onset) >= rho_gtc:
            tp += 1
    return tp, fp


def brute_psds1(
    dets,
    gts,
    duration_hours: float,
    rho_dtc: float = 0.7,
    rho_gtc: float = 0.7,
    alpha_st: float = 1.0,
    e_max: float = 100.0,
) -> float:
    """Exhaustive threshold enumeration plus exact staircase integration."""
    classes = sorted({g.class_name for g in gts})
    thresholds = sorted({d.score for d in dets}) + [1.5]
    points: dict[str, list[tuple[float, float]]] = {c: [] for c in classes}
    for threshold in thresholds:
        kept = [d for d in dets if d.score >= threshold]
        for cls in classes:
            tp, fp = brute_match(kept, gts, cls, rho_dtc, rho_gtc)
            n_gt = sum(1 for g in gts if g.class_name == cls)
            points[cls].append((fp / duration_hours, tp / n_gt))
    breakpoints = sorted(
        {0.0, e_max} | {e for cls in classes for e, _ in points[cls] if e < e_max}
    )
    total = 0.0
    for i in range(len(breakpoints) - 1):
        e = breakpoints[i]
        tprs = []
        for cls in classes:
            best = 0.0
            for point_e, point_t in points[cls]:
                if point_e <= e and point_t > best:
                    best = point_t
            tprs.append(best)
        mean = sum(tprs) / len(tprs)
        var = sum((t - mean) ** 2 for t in tprs) / len(tprs)
        effective = mean - alpha_st * math.sqrt(var)
        if effective > 0.0:
            total += effective * (breakpoints[i + 1] - e)
    return total / e_max


def brute_partial_auc(scores, labels, max_fpr: float) -> float:
    """Partial ROC area by explicit threshold enumeration and trapezoids."""
    scores = [float(s) for s in scores]
    labels = [int(round(float(l))) for l in labels]
    n_pos = sum(1 for l in labels if l == 1)
    n_neg = len(labels) - n_pos
    points = [(0.0, 0.0)]
    for threshold in sorted(set(scores), reverse=True):
        tp = sum(1 for s, l in zip(scores, labels) if s >= threshold and l == 1)
        fp = sum(1 for s, l in zip(scores, labels) if s >= threshold and l == 0)
        points.append((fp / n_neg, tp / n_pos))
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points[:-1], points[1:]):
        if x1 <= max_fpr:
            area += (x1 - x0) * (y0 + y1) / 2.0
        elif x0 < max_fpr:
            y_cut = y0 + (y1 - y0) * (max_fpr - x0) / (x1 - x0)
            area += (max_fpr - x0) * (y0 + y_cut) / 2.0
            break
        else:
            break
    return area


def pairwise_partial_auc(scores, labels, max_fpr: float) -> float:
    """Column-by-column partial area for tie-free scores and an integral cut.

    Column j of the ROC staircase (width 1/N) has height equal to the
    fraction of positives ranked above the j-th highest negative.
    """
    pos = [float(s) for s, l in zip(scores, labels) if int(round(float(l))) == 1]
    neg = sorted(
        (float(s) for s, l in zip(scores, labels) if int(round(float(l))) == 0),
        reverse=True,
    )
    k_float = max_fpr * len(neg)
    k = round(k_float)
    assert abs(k - k_float) < 1e-12, "cut must fall on a column boundary"
    assert len(set(pos) | set(neg)) == len(pos) + len(neg), "scores must be tie-free"
    area = 0.0
    for j in range(1, k + 1):
        frac = sum(1 for p in pos if p > neg[j - 1]) / len(pos)
        area += frac / len(neg)
    return area


def scipy_dilated_conv(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray, dilation: int) -> np.ndarray:
    """Standard dilated 3x3 convolution reference built on scipy.signal."""
    from scipy.signal import correlate2d

    c_out, c_in = kernel.shape[0], kernel.shape[1]
    span = 2 * dilation + 1
    out = np.zeros((c_out,) + x.shape[1:])
    for co in range(c_out):
        acc = np.zeros(x.shape[1:])
        for ci in range(c_in):
            dense = np.zeros((3, span))
            dense[:, ::dilation] = kernel[co, ci]
            acc += correlate2d(x[ci], dense, mode="same", boundary="fill")
        out[co] = acc + bias[co]
    return out
