"""Multi-seed, multi-strategy sweeps of isolated training runs."""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from core.config import LOG_FILE, ExperimentConfig, StrategyName, apply_overrides
from core.errors import CheckpointError, ConfigError
from core.logging import setup_logging
from harness.runner import run_training

log = logging.getLogger("a7.sweep")

SUMMARY_HEADER = [
    "strategy", "runs", "auc_mean", "auc_std", "best_score_mean", "best_score_std",
    "teacher_queries_mean", "reuse_firings_mean",
]


@dataclass(frozen=True)
class RunResult:
    strategy: str
    seed: int
    auc: float
    teacher_queries: int
    reuse_firings: int
    best_score: float


@dataclass(frozen=True)
class SummaryRow:
    strategy: str
    runs: int
    auc_mean: float
    auc_std: float
    best_score_mean: float
    best_score_std: float
    teacher_queries_mean: float
    reuse_firings_mean: float


def parse_seed_range(text: str) -> list[int]:
    """``a..b`` (inclusive), a comma list, or a single seed."""
    text = text.strip()
    try:
        if ".." in text:
            lo, _, hi = text.partition("..")
            first, last = int(lo), int(hi)
            if last < first:
                raise ConfigError(f"empty seed range {text!r}")
            return list(range(first, last + 1))
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise ConfigError(f"bad seed range {text!r}: {e}") from e


def parse_strategies(text: str) -> list[StrategyName]:
    try:
        return [StrategyName(part.strip()) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise ConfigError(f"unknown strategy in {text!r}") from e


def _run_one(config: ExperimentConfig) -> RunResult:
    run_dir = config.run_dir()
    setup_logging(log_file=run_dir / LOG_FILE)
    metrics = run_training(config, run_dir)
    return RunResult(
        config.advising.strategy.value,
        config.run.seed,
        metrics.auc,
        metrics.teacher_queries,
        metrics.reuse_firings,
        metrics.best_score,
    )


def run_sweep(
    base: ExperimentConfig,
    seeds: list[int],
    strategies: list[StrategyName],
    workers: int = 1,
) -> list[RunResult]:
    """Run every (strategy, seed) pair; each writes its own run directory."""
    configs = [
        apply_overrides(base, {"advising": {"strategy": s}, "run": {"seed": seed}})
        for s in strategies
        for seed in seeds
    ]
    log.info("sweep of %d runs on %d workers", len(configs), workers)
    if workers <= 1:
        return [_run_one(c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, configs))


def summarize(results: list[RunResult]) -> list[SummaryRow]:
    """Per strategy, in first-seen order: mean/std of AUC and best score, mean advice usage."""
    grouped: dict[str, list[RunResult]] = {}
    for r in results:
        grouped.setdefault(r.strategy, []).append(r)
    rows = []
    for strategy, runs in grouped.items():
        aucs = np.array([r.auc for r in runs])
        best = np.array([r.best_score for r in runs])
        rows.append(SummaryRow(
            strategy=strategy,
            runs=len(runs),
            auc_mean=float(aucs.mean()),
            auc_std=float(aucs.std()),
            best_score_mean=float(best.mean()),
            best_score_std=float(best.std()),
            teacher_queries_mean=float(np.mean([r.teacher_queries for r in runs])),
            reuse_firings_mean=float(np.mean([r.reuse_firings for r in runs])),
        ))
    return rows


def write_summary(rows: list[SummaryRow], path: Path) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(SUMMARY_HEADER)
            for row in rows:
                writer.writerow([
                    row.strategy,
                    row.runs,
                    repr(row.auc_mean),
                    repr(row.auc_std),
                    repr(row.best_score_mean),
                    repr(row.best_score_std),
                    repr(row.teacher_queries_mean),
                    repr(row.reuse_firings_mean),
                ])
    except OSError as e:
        raise CheckpointError(f"cannot write summary {path}: {e}") from e
