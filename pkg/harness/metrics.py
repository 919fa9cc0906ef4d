"""Learning-curve metrics and their CSV files."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TextIO

import numpy as np

from core.errors import CheckpointError, EmptyDatasetError

METRICS_HEADER = ["step", "eval_score", "teacher_queries", "reuse_firings"]
TRACE_HEADER = ["step", "distance", "threshold", "advised"]


@dataclass(frozen=True)
class EvalPoint:
    step: int
    score: float
    teacher_queries: int
    reuse_firings: int


@dataclass
class RunMetrics:
    """Evaluation curve of one run plus its advice usage."""

    points: list[EvalPoint] = field(default_factory=list)
    teacher_score: float = 1.0

    def add(self, point: EvalPoint) -> None:
        if self.points and point.step <= self.points[-1].step:
            raise ValueError(
                f"eval step {point.step} does not follow {self.points[-1].step}"
            )
        self.points.append(point)

    @property
    def teacher_queries(self) -> int:
        return self.points[-1].teacher_queries if self.points else 0

    @property
    def reuse_firings(self) -> int:
        return self.points[-1].reuse_firings if self.points else 0

    @property
    def best_score(self) -> float:
        """Highest evaluation score seen, or nan before any evaluation."""
        return max((p.score for p in self.points), default=float("nan"))

    @property
    def auc(self) -> float:
        """Normalized AUC, or nan with fewer than two eval points."""
        if len(self.points) < 2:
            return float("nan")
        return compute_auc(self.points, self.teacher_score)


def compute_auc(points: list[EvalPoint], teacher_score: float) -> float:
    """Trapezoidal area under score/teacher_score, divided by the step span.

    Scores are clipped to [0, teacher_score] first, so the result lies in [0, 1].
    """
    if len(points) < 2:
        raise EmptyDatasetError(f"AUC needs at least 2 eval points, got {len(points)}")
    if teacher_score <= 0.0:
        raise ValueError(f"teacher_score must be positive, got {teacher_score}")
    steps = np.array([p.step for p in points], dtype=np.float64)
    scores = np.clip([p.score for p in points], 0.0, teacher_score) / teacher_score
    span = steps[-1] - steps[0]
    if span <= 0:
        raise ValueError("eval points must span a positive number of steps")
    area = float(np.sum((scores[1:] + scores[:-1]) * np.diff(steps) / 2.0))
    return area / float(span)


def _format_auc(value: float) -> str:
    return "nan" if math.isnan(value) else repr(value)


def write_metrics(metrics: RunMetrics, path: Path) -> None:
    """Header, one row per eval point, then ``auc,<value>``."""
    try:
        with path.open("w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(METRICS_HEADER)
            for p in metrics.points:
                writer.writerow([p.step, repr(float(p.score)), p.teacher_queries, p.reuse_firings])
            writer.writerow(["auc", _format_auc(metrics.auc)])
    except OSError as e:
        raise CheckpointError(f"cannot write metrics {path}: {e}") from e


def read_metrics(path: Path) -> tuple[list[EvalPoint], float]:
    """Eval points and the recorded AUC of a metrics file."""
    try:
        with path.open(newline="") as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise CheckpointError(f"cannot read metrics {path}: {e}") from e
    if not rows or rows[0] != METRICS_HEADER:
        raise CheckpointError(f"{path}: not a metrics file")
    points: list[EvalPoint] = []
    auc = float("nan")
    for row in rows[1:]:
        if row and row[0] == "auc":
            auc = float(row[1])
            continue
        points.append(EvalPoint(int(row[0]), float(row[1]), int(row[2]), int(row[3])))
    return points, auc


class TraceWriter:
    """Per-step advise decisions: ``step,distance,threshold,advised``."""

    def __init__(self, stream: TextIO) -> None:
        self._stream = stream
        self._writer = csv.writer(stream, lineterminator="\n")
        self._writer.writerow(TRACE_HEADER)

    @classmethod
    def open(cls, path: Path) -> TraceWriter:
        try:
            return cls(path.open("w", newline=""))
        except OSError as e:
            raise CheckpointError(f"cannot write trace {path}: {e}") from e

    def write(
        self, step: int, distance: float | None, threshold: float | None, advised: bool,
    ) -> None:
        self._writer.writerow([
            step,
            "" if distance is None else repr(float(distance)),
            "" if threshold is None else repr(float(threshold)),
            int(advised),
        ])

    def close(self) -> None:
        self._stream.close()
