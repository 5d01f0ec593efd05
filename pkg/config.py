"""Configuration management for the event log anonymizer."""
from dataclasses import dataclass, field, fields, asdict
import json
import logging
import os
from typing import Any, Dict, List, Optional, Type, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar('T')

MATCHING_MODES = ("optimal", "greedy")


class ConfigError(Exception):
    """Raised when the configuration file is missing or invalid."""


@dataclass
class QueryConfig:
    """Trace variant query configuration."""
    # Required; there is no safe default privacy level
    epsilon: Optional[float] = None
    # Longest released variant; 30 covers over 95% of the traces of typical hospital logs
    max_depth: int = 30
    # Prefixes with a noisy count below this are pruned; required as well
    prune: Optional[int] = None


@dataclass
class NoiseConfig:
    """Timestamp noise and sensitivity configuration."""
    # Laplace scale (ms) of the per-trace shift
    shift_scale: float = 60 * 60 * 1000.0
    # Laplace scale (ms) of the noise on each interval between events
    interval_scale: float = 10 * 60 * 1000.0
    # Per-attribute sensitivity overrides; default is the domain width
    sensitivity: Dict[str, float] = field(default_factory=dict)


@dataclass
class MatchingConfig:
    """Sequence-to-trace matching configuration."""
    mode: str = "optimal"


@dataclass
class ReportConfig:
    """Utility report configuration."""
    bucket_hours: float = 24.0
    attributes: List[str] = field(default_factory=list)


@dataclass
class IOConfig:
    """Input/output paths."""
    input: Optional[str] = None
    output: Optional[str] = None
    schema: Optional[str] = None
    report: Optional[str] = None


def _build_section(section_cls: Type[T], data: dict, section: str) -> T:
    """Build a config section, warning about and ignoring unknown keys."""
    valid = {f.name for f in fields(section_cls)}  # type: ignore[arg-type]
    unknown = set(data) - valid
    if unknown:
        logger.warning("Ignoring unknown '%s' config keys: %s", section, ', '.join(sorted(unknown)))
    return section_cls(**{k: v for k, v in data.items() if k in valid})


@dataclass
class Config:
    """Main configuration class.

    `attributes` holds per-attribute overrides in the sidecar schema
    layout (kind, epsilon, min/max, categories, utility).
    """
    query: QueryConfig = field(default_factory=QueryConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    matching: MatchingConfig = field(default_factory=MatchingConfig)
    report: ReportConfig = field(default_factory=ReportConfig)
    io: IOConfig = field(default_factory=IOConfig)
    attributes: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    seed: int = 0

    @classmethod
    def from_dict(cls, data: dict) -> 'Config':
        """Create Config from dictionary."""
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            logger.warning("Ignoring unknown config sections: %s", ', '.join(sorted(unknown)))
        return cls(
            query=_build_section(QueryConfig, data.get('query', {}), 'query'),
            noise=_build_section(NoiseConfig, data.get('noise', {}), 'noise'),
            matching=_build_section(MatchingConfig, data.get('matching', {}), 'matching'),
            report=_build_section(ReportConfig, data.get('report', {}), 'report'),
            io=_build_section(IOConfig, data.get('io', {}), 'io'),
            attributes=dict(data.get('attributes', {})),
            seed=int(data.get('seed', 0))
        )

    @classmethod
    def from_file(cls, config_path: str = "config.json") -> 'Config':
        """Load configuration from JSON file.

        Raises ConfigError if the file is missing or invalid.
        """
        if not os.path.exists(config_path):
            raise ConfigError(
                f"Configuration file '{config_path}' not found. "
                "Create one by copying config.example.json."
            )

        try:
            with open(config_path, 'r') as f:
                data = json.load(f)
            return cls.from_dict(data)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Invalid JSON in '{config_path}': {e}") from e
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid configuration structure in '{config_path}': {e}") from e

    def validate(self) -> None:
        """Raise ConfigError unless the configuration can drive a pipeline run."""
        if self.query.epsilon is None:
            raise ConfigError("epsilon is required")
        if self.query.prune is None:
            raise ConfigError("prune (k) is required")
        if self.query.epsilon <= 0:
            raise ConfigError(f"epsilon must be positive, got {self.query.epsilon}")
        if self.query.max_depth < 1 or self.query.prune < 1:
            raise ConfigError("max_depth (n) and prune (k) must be at least 1")
        if self.noise.shift_scale <= 0 or self.noise.interval_scale <= 0:
            raise ConfigError("shift_scale and interval_scale must be positive")
        if any(value <= 0 for value in self.noise.sensitivity.values()):
            raise ConfigError("sensitivity overrides must be positive")
        if self.matching.mode not in MATCHING_MODES:
            raise ConfigError(f"matching mode must be one of {', '.join(MATCHING_MODES)}")
        if self.report.bucket_hours <= 0:
            raise ConfigError("bucket_hours must be positive")

    def to_dict(self) -> dict:
        """Convert Config to dictionary."""
        return asdict(self)

    def save_to_file(self, config_path: str = "config.json") -> None:
        """Save configuration to JSON file."""
        with open(config_path, 'w') as f:
            json.dump(self.to_dict(), f, indent=2)
