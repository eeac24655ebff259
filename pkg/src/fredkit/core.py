"""Data model, class vocabulary and file I/O shared by every pipeline stage.

All value types are immutable and all operations are pure, so instances can
be shared freely across worker threads or processes.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

__all__ = [
    "ClassVocabulary",
    "ClipManifest",
    "EventBox",
    "FormatError",
    "ScoreMatrix",
    "apply_dataset_mask",
    "format_events_tsv",
    "format_manifest_tsv",
    "format_score_csv",
    "parse_events_tsv",
    "parse_manifest_tsv",
    "parse_score_csv",
    "read_score_dir",
    "write_score_dir",
]

MANIFEST_FILENAME = "manifest.tsv"

_EVENTS_HEADER = ("filename", "onset", "offset", "event_label")
_MANIFEST_HEADER = ("clip_id", "duration_seconds")
_VOCAB_HEADER = ("class_name", "in_desed", "in_maestro")


class FormatError(ValueError):
    """An input file violates its declared format."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ClassVocabulary:
    """Ordered class labels with per-dataset membership masks.

    The two masks may overlap: a class can belong to both datasets.
    """

    names: tuple[str, ...]
    desed_mask: tuple[bool, ...]
    maestro_mask: tuple[bool, ...]

    def __post_init__(self) -> None:
        if not self.names:
            raise ValueError("vocabulary must contain at least one class")
        if len(set(self.names)) != len(self.names):
            raise ValueError("vocabulary class names must be unique")
        if len(self.desed_mask) != len(self.names) or len(self.maestro_mask) != len(self.names):
            raise ValueError("mask length must equal the number of classes")

    def __len__(self) -> int:
        return len(self.names)

    @property
    def num_classes(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown class {name!r}") from None

    def __contains__(self, name: object) -> bool:
        return name in self.names

    def mask_array(self, dataset: str) -> np.ndarray:
        """Boolean column mask for ``dataset`` ("desed" or "maestro")."""
        if dataset == "desed":
            return np.asarray(self.desed_mask, dtype=bool)
        if dataset == "maestro":
            return np.asarray(self.maestro_mask, dtype=bool)
        raise ValueError(f"unknown dataset {dataset!r}")

    def dataset_classes(self, dataset: str) -> tuple[str, ...]:
        mask = self.mask_array(dataset)
        return tuple(n for n, keep in zip(self.names, mask) if keep)

    @classmethod
    def from_tsv(cls, path: str | Path) -> "ClassVocabulary":
        """Read a ``class_name<TAB>in_desed<TAB>in_maestro`` table."""
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines:
            raise FormatError(f"{path}: empty vocabulary file")
        if tuple(lines[0].split("\t")) != _VOCAB_HEADER:
            raise FormatError(f"{path}: expected header 'class_name\\tin_desed\\tin_maestro'")
        names: list[str] = []
        desed: list[bool] = []
        maestro: list[bool] = []
        for lineno, line in enumerate(lines[1:], start=2):
            parts = line.split("\t")
            if len(parts) != 3:
                raise FormatError(f"{path}: malformed row at line {lineno}")
            if parts[1] not in ("0", "1") or parts[2] not in ("0", "1"):
                raise FormatError(f"{path}: mask flags must be 0 or 1 at line {lineno}")
            names.append(parts[0])
            desed.append(parts[1] == "1")
            maestro.append(parts[2] == "1")
        return cls(tuple(names), tuple(desed), tuple(maestro))

    @classmethod
    def default(cls) -> "ClassVocabulary":
        """The bundled 27-class vocabulary (10 DESED + 17 MAESTRO)."""
        path = resources.files("fredkit").joinpath("data/default_vocabulary.tsv")
        with resources.as_file(path) as p:
            vocab = cls.from_tsv(p)
        if (len(vocab), sum(vocab.desed_mask), sum(vocab.maestro_mask)) != (27, 10, 17):
            raise RuntimeError("bundled vocabulary must have 27 classes (10 DESED, 17 MAESTRO)")
        return vocab


@dataclass(frozen=True, eq=False)
class ScoreMatrix:
    """Per-clip frame-by-class matrix of confidences in [0, 1].

    ``frame_period`` is the duration of one frame in seconds; the clip spans
    ``num_frames * frame_period`` seconds.
    """

    clip_id: str
    frame_period: float
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError("values must be a T x C matrix with T >= 1 and C >= 1")
        if not np.isfinite(v).all():
            raise ValueError("confidences must be finite")
        if (v < 0.0).any() or (v > 1.0).any():
            raise ValueError("confidences must lie in [0, 1]")
        if not (np.isfinite(self.frame_period) and self.frame_period > 0):
            raise ValueError("frame_period must be a positive real")
        object.__setattr__(self, "values", _readonly(v))

    @property
    def num_frames(self) -> int:
        return self.values.shape[0]

    @property
    def num_classes(self) -> int:
        return self.values.shape[1]

    @property
    def duration(self) -> float:
        return self.num_frames * self.frame_period

    def with_values(self, values: np.ndarray, frame_period: float | None = None) -> "ScoreMatrix":
        """Copy of this matrix with new values (and optionally frame period)."""
        return replace(
            self,
            values=values,
            frame_period=self.frame_period if frame_period is None else frame_period,
        )


@dataclass(frozen=True)
class EventBox:
    """A detection or ground-truth interval for one class in one clip."""

    clip_id: str
    class_name: str
    onset: float
    offset: float
    score: float = 1.0

    def __post_init__(self) -> None:
        if not (np.isfinite(self.onset) and np.isfinite(self.offset)):
            raise ValueError("onset/offset must be finite")
        if self.onset < 0:
            raise ValueError("onset must be >= 0")
        if not self.onset < self.offset:
            raise ValueError("onset must be < offset")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError("score must lie in [0, 1]")

    @property
    def duration(self) -> float:
        return self.offset - self.onset

    def sort_key(self) -> tuple:
        return (self.clip_id, self.onset, self.class_name, self.offset, self.score)


@dataclass(frozen=True)
class ClipManifest:
    """Clip inventory: (clip_id, duration seconds) pairs."""

    entries: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        ids = [clip_id for clip_id, _ in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("manifest clip_ids must be unique")
        for clip_id, duration in self.entries:
            if not (np.isfinite(duration) and duration > 0):
                raise ValueError(f"duration for {clip_id!r} must be positive")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def clip_ids(self) -> tuple[str, ...]:
        return tuple(clip_id for clip_id, _ in self.entries)

    @property
    def total_duration_hours(self) -> float:
        return sum(duration for _, duration in self.entries) / 3600.0


def parse_events_tsv(
    path: str | Path, vocabulary: ClassVocabulary | None = None
) -> list[EventBox]:
    """Parse an events table: ``filename onset offset event_label [score]``.

    Rows without a score column get score 1.0.  Class names are only checked
    when a vocabulary is supplied.
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise FormatError(f"{path}: empty file")
    header = tuple(lines[0].split("\t"))
    if header == _EVENTS_HEADER:
        with_scores = False
    elif header == _EVENTS_HEADER + ("score",):
        with_scores = True
    else:
        raise FormatError(
            f"{path}: expected header 'filename\\tonset\\toffset\\tevent_label[\\tscore]'"
        )
    n_fields = 5 if with_scores else 4
    events: list[EventBox] = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != n_fields:
            raise FormatError(
                f"{path}: malformed row at line {lineno}: "
                f"expected {n_fields} fields, got {len(parts)}"
            )
        clip_id, label = parts[0], parts[3]
        try:
            onset = float(parts[1])
            offset = float(parts[2])
            score = float(parts[4]) if with_scores else 1.0
        except ValueError:
            raise FormatError(f"{path}: non-numeric field at line {lineno}") from None
        if not (np.isfinite(onset) and np.isfinite(offset) and onset >= 0):
            raise FormatError(f"{path}: invalid times at line {lineno}")
        if onset >= offset:
            raise FormatError(f"{path}: onset >= offset at line {lineno}")
        if not 0.0 <= score <= 1.0:
            raise FormatError(f"{path}: score outside [0, 1] at line {lineno}")
        if vocabulary is not None and label not in vocabulary:
            raise FormatError(f"{path}: unknown class {label!r} at line {lineno}")
        events.append(EventBox(clip_id, label, onset, offset, score))
    return events


def format_events_tsv(events: Iterable[EventBox], with_scores: bool = False) -> str:
    """Render events deterministically: sorted, millisecond precision."""
    header = "\t".join(_EVENTS_HEADER + (("score",) if with_scores else ()))
    lines = [header]
    for e in sorted(events, key=EventBox.sort_key):
        row = f"{e.clip_id}\t{e.onset:.3f}\t{e.offset:.3f}\t{e.class_name}"
        if with_scores:
            row += f"\t{e.score:.6f}"
        lines.append(row)
    return "\n".join(lines) + "\n"


def parse_score_csv(
    path: str | Path, frame_period: float, vocabulary: ClassVocabulary
) -> ScoreMatrix:
    """Parse one per-clip score CSV; the clip_id is the file stem.

    The header must list the vocabulary classes in order.  Values outside
    [0, 1] are rejected, not clamped.
    """
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise FormatError(f"{path}: empty file")
    header = tuple(lines[0].split(","))
    if header != vocabulary.names:
        raise FormatError(f"{path}: header does not match the vocabulary class order")
    if len(lines) == 1:
        raise FormatError(f"{path}: no frames")
    n_classes = len(vocabulary)
    rows = np.empty((len(lines) - 1, n_classes), dtype=np.float64)
    for i, line in enumerate(lines[1:]):
        lineno = i + 2
        cells = line.split(",")
        if len(cells) != n_classes:
            raise FormatError(
                f"{path}: malformed row at line {lineno}: "
                f"expected {n_classes} columns, got {len(cells)}"
            )
        for j, cell in enumerate(cells):
            try:
                value = float(cell)
            except ValueError:
                raise FormatError(
                    f"{path}: non-numeric value {cell!r} at line {lineno}, "
                    f"column {header[j]!r}"
                ) from None
            if not (0.0 <= value <= 1.0):
                raise FormatError(
                    f"{path}: value {cell} outside [0, 1] at line {lineno}, "
                    f"column {header[j]!r}"
                )
            rows[i, j] = value
    return ScoreMatrix(path.stem, frame_period, rows)


def format_score_csv(matrix: ScoreMatrix, vocabulary: ClassVocabulary) -> str:
    if matrix.num_classes != len(vocabulary):
        raise ValueError("matrix width does not match the vocabulary")
    lines = [",".join(vocabulary.names)]
    for row in matrix.values:
        lines.append(",".join(f"{x:.6f}" for x in row))
    return "\n".join(lines) + "\n"


def read_score_dir(
    directory: str | Path, frame_period: float, vocabulary: ClassVocabulary
) -> dict[str, ScoreMatrix]:
    """Read every ``<clip_id>.csv`` in a directory, keyed by clip_id."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"{directory}: not a directory")
    paths = sorted(directory.glob("*.csv"))
    if not paths:
        raise FormatError(f"{directory}: no score CSV files found")
    return {p.stem: parse_score_csv(p, frame_period, vocabulary) for p in paths}


def write_score_dir(
    matrices: Iterable[ScoreMatrix] | Mapping[str, ScoreMatrix],
    directory: str | Path,
    vocabulary: ClassVocabulary,
    with_manifest: bool = True,
) -> None:
    """Write per-clip score CSVs plus a manifest listing T * frame_period."""
    if isinstance(matrices, Mapping):
        matrices = matrices.values()
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ordered = sorted(matrices, key=lambda m: m.clip_id)
    for m in ordered:
        (directory / f"{m.clip_id}.csv").write_text(
            format_score_csv(m, vocabulary), encoding="utf-8"
        )
    if with_manifest:
        manifest = ClipManifest(tuple((m.clip_id, m.duration) for m in ordered))
        (directory / MANIFEST_FILENAME).write_text(
            format_manifest_tsv(manifest), encoding="utf-8"
        )


def parse_manifest_tsv(path: str | Path) -> ClipManifest:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise FormatError(f"{path}: empty file")
    if tuple(lines[0].split("\t")) != _MANIFEST_HEADER:
        raise FormatError(f"{path}: expected header 'clip_id\\tduration_seconds'")
    entries: list[tuple[str, float]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != 2:
            raise FormatError(f"{path}: malformed row at line {lineno}")
        try:
            duration = float(parts[1])
        except ValueError:
            raise FormatError(f"{path}: non-numeric duration at line {lineno}") from None
        if not duration > 0:
            raise FormatError(f"{path}: non-positive duration at line {lineno}")
        entries.append((parts[0], duration))
    return ClipManifest(tuple(entries))


def format_manifest_tsv(manifest: ClipManifest) -> str:
    lines = ["\t".join(_MANIFEST_HEADER)]
    for clip_id, duration in sorted(manifest.entries):
        lines.append(f"{clip_id}\t{duration:.3f}")
    return "\n".join(lines) + "\n"


def apply_dataset_mask(matrix: ScoreMatrix, mask: Sequence[bool] | np.ndarray) -> ScoreMatrix:
    """Zero out the columns whose mask entry is false; keep the rest bitwise."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (matrix.num_classes,):
        raise ValueError(
            f"mask length {mask.shape} does not match {matrix.num_classes} classes"
        )
    values = matrix.values.copy()
    values[:, ~mask] = 0.0
    return matrix.with_values(values)
