"""Shared fixtures: a configuration small enough to train in well under a second."""

from __future__ import annotations

import logging
from collections.abc import Iterator
from typing import Any

import pytest

from core.config import ExperimentConfig, build_config

TINY: dict[str, dict[str, Any]] = {
    "env": {"layout": "open", "width": 5, "height": 5, "max_steps": 20},
    "agent": {
        "hidden_sizes": [16], "replay_min_size": 32, "replay_max_size": 200,
        "batch_size": 32, "target_update_interval": 10, "epsilon_anneal_steps": 100,
    },
    "advising": {"budget": 60, "queue_length": 20},
    "selector": {
        "retrain_interval": 50, "epochs": 2, "queue_length": 20, "encoder_hidden": 16,
        "feature_dim": 8, "projector_hidden": 8, "projection_dim": 8, "predictor_hidden": 8,
    },
    "reuse": {
        "hidden_sizes": [16], "mc_passes": 10, "advice_milestone": 20,
        "initial_epochs": 5, "followup_epochs": 2, "lambda_horizon": 200,
    },
    "run": {"total_steps": 200, "eval_interval": 50, "eval_episodes": 2},
}


def tiny_config(**sections: dict[str, Any]) -> ExperimentConfig:
    data = {name: dict(values) for name, values in TINY.items()}
    for name, values in sections.items():
        data.setdefault(name, {}).update(values)
    return build_config(data)


@pytest.fixture
def tiny() -> ExperimentConfig:
    return tiny_config()


@pytest.fixture(autouse=True)
def _close_log_handlers() -> Iterator[None]:
    yield
    root = logging.getLogger("a7")
    for handler in list(root.handlers):
        root.removeHandler(handler)
        handler.close()
