"""Frequency-dependent augmentation of dB-scaled log-mel feature maps.

The chain applies, in this fixed order: mixup, frequency warping (random
resize crop along frequency only), then an additive piecewise-linear dB
filter curve.  All randomness flows through per-clip substreams so results
never depend on batch composition or worker count.
"""

from __future__ import annotations

import hashlib
import re
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import FormatError

__all__ = [
    "AugmentConfig",
    "RngStream",
    "SpectroFeature",
    "augment_chain",
    "filter_augment",
    "freq_warp",
    "mixup",
    "read_feature_dir",
    "sample_filter_curve",
    "write_feature_dir",
]

_CHANNEL_FILE_RE = re.compile(r"^(?P<clip>.+)\.ch(?P<index>\d+)\.csv$")


@dataclass(frozen=True, eq=False)
class SpectroFeature:
    """A channels x time x frequency feature map (dB-scaled log-mel)."""

    clip_id: str
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        # F >= 2 is the hard floor needed by frequency interpolation; real
        # mel features are far wider.
        if v.ndim != 3 or v.shape[1] < 1 or v.shape[2] < 2:
            raise ValueError("values must be channels x time x freq with T >= 1, F >= 2")
        if not np.isfinite(v).all():
            raise ValueError("feature values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def num_channels(self) -> int:
        return self.values.shape[0]

    @property
    def num_frames(self) -> int:
        return self.values.shape[1]

    @property
    def num_bins(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class AugmentConfig:
    """Parameters of the augmentation chain.

    ``mixup_lambda`` pins the mixup coefficient instead of sampling it from
    Beta(mixup_alpha, mixup_alpha); ``None`` means sample.
    """

    mixup_alpha: float = 0.2
    mixup_lambda: float | None = None
    warp_ratio_range: tuple[float, float] = (0.75, 1.0)
    filter_db_range: tuple[float, float] = (-3.0, 3.0)
    filter_bands_range: tuple[int, int] = (3, 6)
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.mixup_alpha > 0:
            raise ValueError("mixup_alpha must be positive")
        if self.mixup_lambda is not None and not 0.0 <= self.mixup_lambda <= 1.0:
            raise ValueError("mixup_lambda must lie in [0, 1]")
        lo, hi = self.warp_ratio_range
        if not (0.0 < lo <= hi <= 1.0):
            raise ValueError("warp_ratio_range must satisfy 0 < lo <= hi <= 1")
        db_lo, db_hi = self.filter_db_range
        if not db_lo <= db_hi:
            raise ValueError("filter_db_range must be ordered")
        n_lo, n_hi = self.filter_bands_range
        if not (1 <= n_lo <= n_hi):
            raise ValueError("filter_bands_range must satisfy 1 <= lo <= hi")

    @property
    def max_filter_db(self) -> float:
        return max(abs(self.filter_db_range[0]), abs(self.filter_db_range[1]))


@dataclass(frozen=True)
class RngStream:
    """Deterministic per-clip random substream.

    The same (seed, stream_key) pair always yields the same draw sequence,
    regardless of process or thread layout.
    """

    seed: int
    stream_key: str

    def generator(self) -> np.random.Generator:
        digest = hashlib.sha256(self.stream_key.encode("utf-8")).digest()
        key_words = np.frombuffer(digest, dtype=np.uint32).tolist()
        entropy = [self.seed & 0xFFFFFFFFFFFFFFFF, *key_words]
        return np.random.default_rng(np.random.SeedSequence(entropy))


def _as_generator(rng: RngStream | np.random.Generator) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    return rng


def mixup(
    a: SpectroFeature,
    b: SpectroFeature,
    labels_a: np.ndarray | None,
    labels_b: np.ndarray | None,
    lam: float,
) -> tuple[SpectroFeature, np.ndarray | None]:
    """Convex combination ``lam * a + (1 - lam) * b`` of features and labels.

    The result keeps the clip_id of ``a``.
    """
    if a.values.shape != b.values.shape:
        raise ValueError(
            f"feature shapes differ: {a.values.shape} vs {b.values.shape}"
        )
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    mixed = lam * a.values + (1.0 - lam) * b.values
    labels: np.ndarray | None = None
    if labels_a is not None or labels_b is not None:
        if labels_a is None or labels_b is None:
            raise ValueError("labels must be supplied for both inputs or neither")
        la = np.asarray(labels_a, dtype=np.float64)
        lb = np.asarray(labels_b, dtype=np.float64)
        if la.shape != lb.shape:
            raise ValueError("label shapes differ")
        labels = lam * la + (1.0 - lam) * lb
    return SpectroFeature(a.clip_id, mixed), labels


def _crop_resize_freq(x: SpectroFeature, cropped_bins: int, offset: int) -> SpectroFeature:
    n_bins = x.num_bins
    if cropped_bins < 2:
        raise ValueError(f"crop of {cropped_bins} bins is too narrow (need >= 2)")
    if not 0 <= offset <= n_bins - cropped_bins:
        raise ValueError(f"offset {offset} out of bounds for crop width {cropped_bins}")
    crop = x.values[:, :, offset : offset + cropped_bins]
    positions = np.arange(n_bins) * (cropped_bins - 1) / (n_bins - 1)
    lower = np.floor(positions).astype(np.intp)
    upper = np.minimum(lower + 1, cropped_bins - 1)
    frac = positions - lower
    warped = crop[:, :, lower] * (1.0 - frac) + crop[:, :, upper] * frac
    return SpectroFeature(x.clip_id, warped)


def freq_warp(x: SpectroFeature, rho: float, offset: int) -> SpectroFeature:
    """Crop ``round(rho * F)`` frequency bins at ``offset`` and stretch back to F.

    Linear interpolation along frequency only; time and channel axes are
    untouched.  ``rho=1, offset=0`` is the exact identity.
    """
    if not 0.0 < rho <= 1.0:
        raise ValueError("rho must lie in (0, 1]")
    return _crop_resize_freq(x, int(round(rho * x.num_bins)), offset)


def sample_filter_curve(
    rng: RngStream | np.random.Generator, n_bins: int, cfg: AugmentConfig
) -> np.ndarray:
    """Draw one piecewise-linear dB gain curve over ``n_bins`` frequency bins.

    Draws a band count n, n - 1 distinct interior node bins, and n + 1 node
    gains uniform in the configured dB range; the curve interpolates linearly
    between consecutive nodes, so its magnitude never exceeds the range.
    """
    if n_bins < 2:
        raise ValueError("need at least two frequency bins")
    g = _as_generator(rng)
    # At most F - 2 interior nodes exist, so the band count is capped at F - 1.
    n_lo = min(cfg.filter_bands_range[0], n_bins - 1)
    n_hi = min(cfg.filter_bands_range[1], n_bins - 1)
    n_bands = int(g.integers(n_lo, n_hi + 1))
    if n_bands > 1:
        interior = np.sort(g.choice(np.arange(1, n_bins - 1), size=n_bands - 1, replace=False))
    else:
        interior = np.empty(0, dtype=np.intp)
    nodes = np.concatenate(([0], interior, [n_bins - 1]))
    gains = g.uniform(cfg.filter_db_range[0], cfg.filter_db_range[1], size=n_bands + 1)
    return np.interp(np.arange(n_bins), nodes, gains)


def filter_augment(x: SpectroFeature, curve: np.ndarray) -> SpectroFeature:
    """Add a per-bin dB gain curve (features are dB-scaled, so gain is additive)."""
    curve = np.asarray(curve, dtype=np.float64)
    if curve.shape != (x.num_bins,):
        raise ValueError(f"curve length {curve.shape} does not match F={x.num_bins}")
    return SpectroFeature(x.clip_id, x.values + curve[None, None, :])


def augment_chain(
    a: SpectroFeature,
    b: SpectroFeature,
    labels_a: np.ndarray | None,
    labels_b: np.ndarray | None,
    rng: RngStream | np.random.Generator,
    cfg: AugmentConfig,
) -> tuple[SpectroFeature, np.ndarray | None]:
    """Apply mixup, frequency warping and FilterAugment in that order.

    Draw order is part of the contract: (1) the mixup lambda (skipped when
    cfg.mixup_lambda pins it), (2) the warp ratio then its offset, (3) the
    filter curve.
    """
    g = _as_generator(rng)
    if cfg.mixup_lambda is not None:
        lam = cfg.mixup_lambda
    else:
        lam = float(g.beta(cfg.mixup_alpha, cfg.mixup_alpha))
    mixed, labels = mixup(a, b, labels_a, labels_b, lam)

    n_bins = mixed.num_bins
    rho = float(g.uniform(cfg.warp_ratio_range[0], cfg.warp_ratio_range[1]))
    cropped_bins = max(2, min(n_bins, int(round(rho * n_bins))))
    offset = int(g.integers(0, n_bins - cropped_bins + 1))
    warped = _crop_resize_freq(mixed, cropped_bins, offset)

    curve = sample_filter_curve(g, n_bins, cfg)
    return filter_augment(warped, curve), labels


def read_feature_dir(directory: str | Path) -> dict[str, SpectroFeature]:
    """Read per-clip features stored as ``<clip_id>.ch<k>.csv`` (T rows, F cols)."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"{directory}: not a directory")
    channels: dict[str, dict[int, np.ndarray]] = {}
    for path in sorted(directory.glob("*.csv")):
        match = _CHANNEL_FILE_RE.match(path.name)
        if match is None:
            continue
        data = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
        channels.setdefault(match["clip"], {})[int(match["index"])] = data
    if not channels:
        raise FormatError(f"{directory}: no feature CSV files found")
    features: dict[str, SpectroFeature] = {}
    for clip_id in sorted(channels):
        by_index = channels[clip_id]
        if sorted(by_index) != list(range(len(by_index))):
            raise FormatError(f"{directory}: non-contiguous channel indices for {clip_id!r}")
        stack = np.stack([by_index[i] for i in range(len(by_index))])
        features[clip_id] = SpectroFeature(clip_id, stack)
    return features


def write_feature_dir(
    features: Mapping[str, SpectroFeature] | list[SpectroFeature],
    directory: str | Path,
) -> None:
    if isinstance(features, Mapping):
        features = list(features.values())
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for feature in sorted(features, key=lambda f: f.clip_id):
        for ch in range(feature.num_channels):
            path = directory / f"{feature.clip_id}.ch{ch}.csv"
            # %.17g round-trips float64 exactly through the CSV.
            np.savetxt(path, feature.values[ch], fmt="%.17g", delimiter=",")
