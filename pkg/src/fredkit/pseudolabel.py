"""Self-training label plumbing: confidence pooling, file filtering,
weak-label masking and hard-label generation.

All thresholds here are inclusive: a value exactly at a threshold passes.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import ClassVocabulary, FormatError, ScoreMatrix

__all__ = [
    "PseudoFilterSpec",
    "WeakLabel",
    "clip_confidence",
    "filter_audioset",
    "format_weak_labels_tsv",
    "harden",
    "mask_weak",
    "parse_weak_labels_tsv",
]

_WEAK_HEADER = ("clip_id", "event_labels")

DEFAULT_SPEECH_LIKE = frozenset({"Speech", "people talking", "children voices"})


@dataclass(frozen=True)
class WeakLabel:
    """Clip-level tags: the classes known to occur somewhere in the clip."""

    clip_id: str
    present_classes: frozenset[str]

    def __post_init__(self) -> None:
        object.__setattr__(self, "present_classes", frozenset(self.present_classes))


@dataclass(frozen=True)
class PseudoFilterSpec:
    """Thresholds of the pseudo-label filter.

    A clip is kept when some class reaches ``keep_threshold`` and the
    reaching classes are not all speech-like; kept clips then drop label
    entries below ``floor_threshold``.
    """

    keep_threshold: float = 0.7
    floor_threshold: float = 0.01
    hard_threshold: float = 0.5
    speech_like: frozenset[str] = field(default_factory=lambda: DEFAULT_SPEECH_LIKE)

    def __post_init__(self) -> None:
        if not 0.0 <= self.floor_threshold <= self.hard_threshold <= self.keep_threshold <= 1.0:
            raise ValueError("thresholds must satisfy 0 <= floor <= hard <= keep <= 1")
        object.__setattr__(self, "speech_like", frozenset(self.speech_like))


def clip_confidence(matrix: ScoreMatrix) -> np.ndarray:
    """Clip-level confidence per class: the maximum over frames."""
    return matrix.values.max(axis=0)


def filter_audioset(
    confidences: Mapping[str, np.ndarray],
    spec: PseudoFilterSpec,
    vocabulary: ClassVocabulary,
) -> tuple[list[str], dict[str, dict[str, float]]]:
    """Keep high-confidence, non-speech-only clips and prune tiny label entries.

    Returns the kept clip ids (sorted) and, for each kept clip, its label map
    restricted to entries at or above the floor threshold.  Filtering always
    looks at the raw confidences; pruning happens afterwards.
    """
    unknown = sorted(name for name in spec.speech_like if name not in vocabulary)
    if unknown:
        raise ValueError(f"speech_like contains unknown classes: {unknown}")
    speech_indices = {vocabulary.index(name) for name in spec.speech_like}
    kept: list[str] = []
    pruned: dict[str, dict[str, float]] = {}
    for clip_id in sorted(confidences):
        conf = np.asarray(confidences[clip_id], dtype=np.float64)
        if conf.shape != (len(vocabulary),):
            raise ValueError(
                f"confidence vector for {clip_id!r} has shape {conf.shape}, "
                f"expected ({len(vocabulary)},)"
            )
        above = {int(i) for i in np.flatnonzero(conf >= spec.keep_threshold)}
        if not above:
            continue
        if above <= speech_indices:
            continue
        kept.append(clip_id)
        pruned[clip_id] = {
            vocabulary.names[i]: float(conf[i])
            for i in range(len(vocabulary))
            if conf[i] >= spec.floor_threshold
        }
    return kept, pruned


def mask_weak(
    matrix: ScoreMatrix, weak: WeakLabel, vocabulary: ClassVocabulary
) -> ScoreMatrix:
    """Zero every class column not present in the clip's weak label."""
    if matrix.num_classes != len(vocabulary):
        raise ValueError("matrix width does not match the vocabulary")
    unknown = sorted(name for name in weak.present_classes if name not in vocabulary)
    if unknown:
        raise ValueError(f"weak label contains unknown classes: {unknown}")
    keep = np.zeros(len(vocabulary), dtype=bool)
    for name in weak.present_classes:
        keep[vocabulary.index(name)] = True
    values = matrix.values.copy()
    values[:, ~keep] = 0.0
    return matrix.with_values(values)


def harden(matrix: ScoreMatrix, threshold: float) -> ScoreMatrix:
    """Binarize: 1 where the score is at or above the threshold, else 0."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    return matrix.with_values((matrix.values >= threshold).astype(np.float64))


def parse_weak_labels_tsv(
    path: str | Path, vocabulary: ClassVocabulary | None = None
) -> dict[str, WeakLabel]:
    """Parse ``clip_id<TAB>class1,class2,...``; an empty field means no tags."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise FormatError(f"{path}: empty file")
    if tuple(lines[0].split("\t")) != _WEAK_HEADER:
        raise FormatError(f"{path}: expected header 'clip_id\\tevent_labels'")
    labels: dict[str, WeakLabel] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != 2:
            raise FormatError(f"{path}: malformed row at line {lineno}")
        clip_id, joined = parts
        if clip_id in labels:
            raise FormatError(f"{path}: duplicate clip_id {clip_id!r} at line {lineno}")
        names = [n for n in joined.split(",") if n]
        if vocabulary is not None:
            unknown = sorted(n for n in names if n not in vocabulary)
            if unknown:
                raise FormatError(
                    f"{path}: unknown classes {unknown} at line {lineno}"
                )
        labels[clip_id] = WeakLabel(clip_id, frozenset(names))
    return labels


def format_weak_labels_tsv(labels: Mapping[str, WeakLabel]) -> str:
    lines = ["\t".join(_WEAK_HEADER)]
    for clip_id in sorted(labels):
        names = ",".join(sorted(labels[clip_id].present_classes))
        lines.append(f"{clip_id}\t{names}")
    return "\n".join(lines) + "\n"
