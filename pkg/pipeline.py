"""End-to-end anonymization: variant query, sequence enrichment, local DP."""
from dataclasses import asdict, dataclass, field
import json
import logging
import time
from typing import Any, Dict, List, Tuple

from config import Config
from enrichment import enrich_log
from eventlog import EventLog
from mechanisms import NoiseParams, anonymize_log
from rng import Step, derive_rng
from variant_query import QueryParams, flatten, trace_variant_query

logger = logging.getLogger(__name__)


@dataclass
class RunReport:
    original_traces: int = 0
    query_sequences: int = 0
    output_traces: int = 0
    # Wall time per step in seconds
    timings: Dict[str, float] = field(default_factory=dict)
    parameters: Dict[str, Any] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def save_to_file(self, path: str) -> None:
        with open(path, 'w') as f:
            json.dump(self.to_dict(), f, indent=2)


def query_params(config: Config) -> QueryParams:
    return QueryParams(epsilon=config.query.epsilon, n=config.query.max_depth,  # type: ignore[arg-type]
                       k=config.query.prune, seed=config.seed)  # type: ignore[arg-type]


def noise_params(config: Config) -> NoiseParams:
    return NoiseParams(config.noise.shift_scale, config.noise.interval_scale, dict(config.noise.sensitivity))


def run_pripel(log: EventLog, config: Config) -> Tuple[EventLog, RunReport]:
    """Anonymize `log`; every random draw derives from config.seed."""
    config.validate()
    params = query_params(config)
    schema = log.schema.with_overrides(config.attributes)
    report = RunReport(original_traces=len(log), parameters=config.to_dict())

    started = time.monotonic()
    bag = trace_variant_query(log, params)
    sequences = flatten(bag, derive_rng(config.seed, Step.FLATTEN))
    report.timings["variant_query"] = time.monotonic() - started
    report.query_sequences = len(sequences)
    if not sequences:
        message = "The variant query released no sequences; the anonymized log is empty"
        logger.warning(message)
        report.warnings.append(message)

    started = time.monotonic()
    matched = enrich_log(sequences, log, config.seed, config.matching.mode)
    report.timings["enrichment"] = time.monotonic() - started

    started = time.monotonic()
    anonymized = anonymize_log(matched, schema, noise_params(config), config.seed)
    report.timings["anonymization"] = time.monotonic() - started

    report.output_traces = len(anonymized)
    logger.info("Anonymized %d traces into %d (%.1fs)", len(log), len(anonymized), sum(report.timings.values()))
    return anonymized, report
