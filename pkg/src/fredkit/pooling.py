"""Coarse prediction pooling: 64 ms frame scores down to ~1 s frames.

The default scheme zero-pads 2 frames on each side and max-pools with
window and stride 16, turning 156 frames into 10.  The first and last
windows therefore include padding and the output frame period is stride
times the input period (1.024 s for 64 ms input); both quirks are kept
deliberately, with every constant exposed for alternatives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import ScoreMatrix

__all__ = ["PoolingSpec", "coarse_pool"]


@dataclass(frozen=True)
class PoolingSpec:
    pad_frames: int = 2
    window: int = 16
    stride: int = 16

    def __post_init__(self) -> None:
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.pad_frames < 0:
            raise ValueError("pad_frames must be >= 0")


def coarse_pool(matrix: ScoreMatrix, spec: PoolingSpec = PoolingSpec()) -> ScoreMatrix:
    """Zero-pad along time and max-pool each class column.

    Output length is floor((T + 2*pad - window) / stride) + 1; the frame
    period is multiplied by the stride.
    """
    n_frames = matrix.num_frames
    padded_len = n_frames + 2 * spec.pad_frames
    if spec.window > padded_len:
        raise ValueError(
            f"window {spec.window} exceeds padded length {padded_len}"
        )
    padded = np.pad(matrix.values, ((spec.pad_frames, spec.pad_frames), (0, 0)))
    windows = sliding_window_view(padded, spec.window, axis=0)
    n_out = (padded_len - spec.window) // spec.stride + 1
    starts = np.arange(n_out) * spec.stride
    pooled = windows[starts].max(axis=-1)
    return matrix.with_values(pooled, frame_period=matrix.frame_period * spec.stride)
