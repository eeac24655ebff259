"""Prediction averaging across model runs and best-run selection."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import FormatError, ScoreMatrix

__all__ = ["ModelRun", "average_scores", "parse_runs_tsv", "select_best"]

_RUNS_HEADER = ("model_id", "psds1", "mpauc")


@dataclass(frozen=True)
class ModelRun:
    model_id: str
    scores_dir: str | None = None
    psds1: float | None = None
    mpauc: float | None = None

    def __post_init__(self) -> None:
        for name, value in (("psds1", self.psds1), ("mpauc", self.mpauc)):
            if value is not None and not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")

    @property
    def sum_score(self) -> float:
        if self.psds1 is None or self.mpauc is None:
            raise ValueError(f"model {self.model_id!r} is missing a metric")
        return self.psds1 + self.mpauc


def average_scores(runs: Sequence[ScoreMatrix]) -> ScoreMatrix:
    """Unweighted elementwise mean of per-model score matrices for one clip."""
    if not runs:
        raise ValueError("cannot average an empty list of score matrices")
    first = runs[0]
    for m in runs[1:]:
        if m.clip_id != first.clip_id:
            raise ValueError(f"clip mismatch: {m.clip_id!r} vs {first.clip_id!r}")
        if m.values.shape != first.values.shape:
            raise ValueError("shape mismatch across runs")
        if m.frame_period != first.frame_period:
            raise ValueError("frame_period mismatch across runs")
    stack = np.stack([m.values for m in runs])
    # Sorting each cell's values fixes the summation order, so the result is
    # exactly invariant to run order; equal cells short-circuit so averaging
    # N identical matrices reproduces them bit for bit.
    stack.sort(axis=0)
    mean = stack.sum(axis=0) / len(runs)
    mean = np.where(stack[0] == stack[-1], stack[0], mean)
    return first.with_values(mean)


def select_best(candidates: Sequence[ModelRun]) -> ModelRun:
    """The run with the highest psds1 + mpauc; ties go to the smaller model_id."""
    if not candidates:
        raise ValueError("no candidate runs")
    return min(candidates, key=lambda run: (-run.sum_score, run.model_id))


def parse_runs_tsv(path: str | Path) -> list[ModelRun]:
    """Parse a ``model_id<TAB>psds1<TAB>mpauc`` table."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise FormatError(f"{path}: empty file")
    if tuple(lines[0].split("\t")) != _RUNS_HEADER:
        raise FormatError(f"{path}: expected header 'model_id\\tpsds1\\tmpauc'")
    runs: list[ModelRun] = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != 3:
            raise FormatError(f"{path}: malformed row at line {lineno}")
        try:
            psds1, mpauc = float(parts[1]), float(parts[2])
        except ValueError:
            raise FormatError(f"{path}: non-numeric metric at line {lineno}") from None
        runs.append(ModelRun(parts[0], psds1=psds1, mpauc=mpauc))
    return runs
