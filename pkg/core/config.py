"""
Experiment configuration - paths, defaults, and the config file format.

All packages import file-name constants from here. Defaults are the
reference GridWorld setup, so a bare ``a7 run`` trains it end to end.
"""

import math
from enum import Enum
from pathlib import Path
from typing import Any

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)
from pydantic_settings import BaseSettings, SettingsConfigDict

from core.errors import ConfigError

# ---------------------------------------------------------------------------
# Paths - the layout of a run directory
# ---------------------------------------------------------------------------

RUNS_DIR = Path("runs")
CONFIG_FILE = "config.ini"
METRICS_FILE = "metrics.csv"
TRACE_FILE = "trace.csv"
LOG_FILE = "run.log"
SUMMARY_FILE = "summary.csv"
CHECKPOINT_DIR = "checkpoints"

# ---------------------------------------------------------------------------
# Checkpoint format
# ---------------------------------------------------------------------------

CHECKPOINT_MAGIC = b"A7CKPT"
CHECKPOINT_VERSION = 1
CHECKPOINT_SUFFIX = ".a7ckpt"

# ---------------------------------------------------------------------------
# Enumerations
# ---------------------------------------------------------------------------


class Layout(str, Enum):
    OPEN = "open"
    FOUR_ROOMS = "four_rooms"
    RANDOM_WALLS = "random_walls"


class StrategyName(str, Enum):
    A7 = "a7"
    NA = "na"
    EA = "ea"
    RA = "ra"
    IAA = "iaa"
    ANA = "ana"
    A7_NO_SELECTOR = "a7-no-selector"
    A7_NO_GENERATOR = "a7-no-generator"


class DistanceMode(str, Enum):
    # novelty: d = 1 - x.mean, larger means less familiar
    NOVELTY = "novelty"
    # similarity: d = x.mean, the literal reading
    SIMILARITY = "similarity"


class UncertaintySource(str, Enum):
    LOGITS = "logits"
    PROBABILITIES = "probabilities"


# ---------------------------------------------------------------------------
# Sections
# ---------------------------------------------------------------------------


def _split_ints(value: Any) -> Any:
    if isinstance(value, str):
        return [int(part) for part in value.split(",") if part.strip()]
    return value


class EnvSection(BaseModel):
    """GridWorld layout and episode cap."""

    model_config = ConfigDict(extra="forbid")

    layout: Layout = Layout.RANDOM_WALLS
    width: int = Field(10, ge=2)
    height: int = Field(10, ge=2)
    wall_density: float = Field(0.2, ge=0.0, lt=1.0)
    map_seed: int = 0
    max_steps: int = Field(100, gt=0)
    map_file: Path | None = None
    # Append a one-hot cell index to the (x, y) + wall-window encoding
    one_hot_position: bool = True


class AgentSection(BaseModel):
    """Dueling double-DQN student."""

    model_config = ConfigDict(extra="forbid")

    hidden_sizes: list[int] = Field(default_factory=lambda: [64, 64])
    learning_rate: float = Field(1e-4, gt=0.0)
    batch_size: int = Field(32, gt=0)
    gamma: float = Field(0.99, ge=0.0, le=1.0)
    replay_min_size: int = Field(500, gt=0)
    replay_max_size: int = Field(5000, gt=0)
    target_update_interval: int = Field(100, gt=0)
    epsilon_start: float = Field(1.0, ge=0.0, le=1.0)
    epsilon_end: float = Field(0.01, ge=0.0, le=1.0)
    epsilon_anneal_steps: int = Field(5000, gt=0)
    # Uniform init bound of the value and advantage output layers, relative to Kaiming
    head_init_scale: float = Field(0.01, gt=0.0, le=1.0)
    # None disables clipping
    max_grad_norm: float | None = Field(10.0, gt=0.0)

    @field_validator("hidden_sizes", mode="before")
    @classmethod
    def split_hidden(cls, value: Any) -> Any:
        return _split_ints(value)


class AdvisingSection(BaseModel):
    """Which advising strategy runs, its budget, and baseline knobs."""

    model_config = ConfigDict(extra="forbid")

    strategy: StrategyName = StrategyName.A7
    budget: int = Field(5000, ge=0)
    random_probability: float = Field(0.5, ge=0.0, le=1.0)
    # None selects the adaptive importance queue
    iaa_threshold: float | None = None
    iaa_percentile: float = Field(0.5, gt=0.0, le=1.0)
    novelty_percentile: float = Field(0.7, gt=0.0, le=1.0)
    queue_length: int = Field(200, gt=0)
    rnd_hidden: int = Field(64, gt=0)
    rnd_output_dim: int = Field(16, gt=0)
    rnd_learning_rate: float = Field(1e-3, gt=0.0)


class SelectorSection(BaseModel):
    """Action-BYOL feature extractor and the adaptive threshold."""

    model_config = ConfigDict(extra="forbid")

    retrain_interval: int = Field(1000, gt=0)
    epochs: int = Field(20, gt=0)
    batch_size: int = Field(32, gt=0)
    learning_rate: float = Field(1e-3, gt=0.0)
    target_decay: float = Field(0.996, ge=0.0, le=1.0)
    encoder_hidden: int = Field(64, gt=0)
    feature_dim: int = Field(16, gt=0)
    projector_hidden: int = Field(32, gt=0)
    projection_dim: int = Field(16, gt=0)
    predictor_hidden: int = Field(32, gt=0)
    queue_length: int = Field(200, gt=0)
    threshold_percentile: float = Field(0.7, gt=0.0, le=1.0)
    distance_mode: DistanceMode = DistanceMode.NOVELTY


class ReuseSection(BaseModel):
    """Behaviour-cloned reuse model and the intrinsic reward schedule."""

    model_config = ConfigDict(extra="forbid")

    hidden_sizes: list[int] = Field(default_factory=lambda: [64, 64])
    dropout_rate: float = Field(0.35, ge=0.0, lt=1.0)
    mc_passes: int = Field(100, gt=1)
    reuse_probability: float = Field(0.5, ge=0.0, le=1.0)
    uncertainty_percentile: float = Field(0.9, gt=0.0, le=1.0)
    # Reuse also when u_s equals u_r
    inclusive_threshold: bool = False
    uncertainty_source: UncertaintySource = UncertaintySource.LOGITS
    learning_rate: float = Field(1e-4, gt=0.0)
    batch_size: int = Field(32, gt=0)
    advice_milestone: int = Field(500, gt=0)
    initial_epochs: int = Field(2000, gt=0)
    followup_epochs: int = Field(800, gt=0)
    lambda_initial: float = Field(0.1, ge=0.0)
    lambda_horizon: int = Field(20000, gt=0)

    @field_validator("hidden_sizes", mode="before")
    @classmethod
    def split_hidden(cls, value: Any) -> Any:
        return _split_ints(value)


class RunSection(BaseModel):
    """Seed, run length, evaluation protocol and outputs."""

    model_config = ConfigDict(extra="forbid")

    seed: int = 1
    total_steps: int = Field(30000, gt=0)
    eval_interval: int = Field(500, gt=0)
    eval_episodes: int = Field(20, gt=0)
    teacher_score: float = Field(1.0, gt=0.0)
    output_dir: Path = RUNS_DIR
    trace: bool = False
    save_checkpoints: bool = True


SECTIONS: dict[str, type[BaseModel]] = {
    "env": EnvSection,
    "agent": AgentSection,
    "advising": AdvisingSection,
    "selector": SelectorSection,
    "reuse": ReuseSection,
    "run": RunSection,
}


class ExperimentConfig(BaseSettings):
    """Full configuration of one training run.

    Values come from (highest priority first) explicit keyword arguments,
    ``A7_<SECTION>__<KEY>`` environment variables, then defaults.
    """

    model_config = SettingsConfigDict(
        env_prefix="A7_",
        env_nested_delimiter="__",
        case_sensitive=False,
        extra="forbid",
    )

    env: EnvSection = Field(default_factory=EnvSection)
    agent: AgentSection = Field(default_factory=AgentSection)
    advising: AdvisingSection = Field(default_factory=AdvisingSection)
    selector: SelectorSection = Field(default_factory=SelectorSection)
    reuse: ReuseSection = Field(default_factory=ReuseSection)
    run: RunSection = Field(default_factory=RunSection)

    @model_validator(mode="after")
    def check_consistency(self) -> "ExperimentConfig":
        """Reject combinations that no single field check can catch."""
        if self.agent.replay_min_size > self.agent.replay_max_size:
            raise ValueError("agent.replay_min_size exceeds agent.replay_max_size")
        if self.agent.batch_size > self.agent.replay_min_size:
            raise ValueError("agent.batch_size exceeds agent.replay_min_size")
        if not self.agent.hidden_sizes or not self.reuse.hidden_sizes:
            raise ValueError("hidden_sizes must name at least one layer")
        return self

    def run_dir(self) -> Path:
        """Directory that holds every artifact of this run."""
        name = f"{self.advising.strategy.value}-b{self.advising.budget}-seed{self.run.seed}"
        return self.run.output_dir / name


# ---------------------------------------------------------------------------
# Construction helpers
# ---------------------------------------------------------------------------


def build_config(sections: dict[str, dict[str, Any]] | None = None) -> ExperimentConfig:
    """Validate nested section values into an ExperimentConfig.

    Raises ConfigError listing every offending key.
    """
    try:
        return ExperimentConfig(**(sections or {}))
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"invalid configuration: {problems}") from e


def apply_overrides(
    config: ExperimentConfig, overrides: dict[str, dict[str, Any]],
) -> ExperimentConfig:
    """Return a re-validated copy of config with per-section overrides applied."""
    data = config.model_dump()
    for section, values in overrides.items():
        if section not in SECTIONS:
            raise ConfigError(f"unknown config section: [{section}]")
        data[section].update({k: v for k, v in values.items() if v is not None})
    return build_config(data)


# ---------------------------------------------------------------------------
# File format: [section] headers with key = value lines
# ---------------------------------------------------------------------------


def _parse_value(raw: str) -> Any:
    value = raw.strip().strip('"').strip("'")
    if value.lower() == "none":
        return None
    return value


def _format_value(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ConfigError(f"cannot store non-finite value {value!r}")
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    return str(value)


def parse_config_text(text: str, source: str = "<string>") -> dict[str, dict[str, Any]]:
    """Parse the sectioned key = value format into nested raw strings."""
    sections: dict[str, dict[str, Any]] = {}
    current: str | None = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if current not in SECTIONS:
                raise ConfigError(f"{source}:{lineno}: unknown section [{current}]")
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        if current is None:
            raise ConfigError(f"{source}:{lineno}: key outside of any [section]")
        key, _, value = line.partition("=")
        sections[current][key.strip()] = _parse_value(value)
    return sections


def load_config(path: Path) -> ExperimentConfig:
    """Load and validate a config file."""
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        return build_config(parse_config_text(text, source=str(path)))
    except ConfigError as e:
        raise ConfigError(f"{path}: {e}") from e


def dump_config(config: ExperimentConfig) -> str:
    """Render config in the file format; load(dump(c)) == c."""
    lines: list[str] = []
    for name in SECTIONS:
        section: BaseModel = getattr(config, name)
        lines.append(f"[{name}]")
        for key in type(section).model_fields:
            lines.append(f"{key} = {_format_value(getattr(section, key))}")
        lines.append("")
    return "\n".join(lines)


def save_config(config: ExperimentConfig, path: Path) -> None:
    """Write config to path, creating parent directories."""
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dump_config(config), encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot write config {path}: {e}") from e
