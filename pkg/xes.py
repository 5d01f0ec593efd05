"""XES reading and writing on top of pm4py.

pm4py does the XML work; this module converts its log objects to and
from EventLog and owns schema inference. Only flat event attributes are
modelled: string, int, float and boolean values become categorical,
numeric and boolean attributes. Nested attributes, lists and extra
dates are skipped on read.

Inferred bounds and categories come from the values in the file, so a
declared schema does not survive a write/read cycle by itself: pass the
same sidecar schema to `parse_xes` again to get it back.
"""
from datetime import datetime, timedelta, timezone
import logging
from typing import BinaryIO, Dict, List, Mapping, Optional, Set, Tuple

from lxml import etree
from pm4py.objects.log.exporter.xes import exporter as xes_exporter
from pm4py.objects.log.importer.xes import importer as xes_importer
from pm4py.objects.log.obj import Event as XesEvent
from pm4py.objects.log.obj import EventLog as XesLog
from pm4py.objects.log.obj import Trace as XesTrace

from eventlog import (AttributeKind, AttributeSchema, AttributeSpec, AttributeValue, Event,
                      EventLog, ParseError, SchemaError, Trace, kind_of)

logger = logging.getLogger(__name__)

ACTIVITY_KEY = "concept:name"
TIMESTAMP_KEY = "time:timestamp"

_EXTENSIONS = {
    "Concept": {"prefix": "concept", "uri": "http://www.xes-standard.org/concept.xesext"},
    "Time": {"prefix": "time", "uri": "http://www.xes-standard.org/time.xesext"},
}
_QUIET = {"show_progress_bar": False}
_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


def to_millis(moment: datetime) -> int:
    """Milliseconds since the epoch; naive datetimes are taken as UTC."""
    if moment.tzinfo is None:
        moment = moment.replace(tzinfo=timezone.utc)
    return (moment - _EPOCH) // timedelta(milliseconds=1)


def to_datetime(ts: int) -> datetime:
    return _EPOCH + timedelta(milliseconds=ts)


def _value(value: object) -> Optional[AttributeValue]:
    """Convert a pm4py attribute value; None for unsupported types."""
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        return value
    return None


def _convert_event(attributes: Mapping[str, object], case_id: str) -> Event:
    activity = attributes.get(ACTIVITY_KEY)
    moment = attributes.get(TIMESTAMP_KEY)
    if not isinstance(activity, str) or not activity:
        raise SchemaError(f"Trace '{case_id}': event without {ACTIVITY_KEY}")
    if not isinstance(moment, datetime):
        # pm4py drops dates it cannot parse
        raise SchemaError(f"Trace '{case_id}': event without a valid {TIMESTAMP_KEY}")
    payload: Dict[str, AttributeValue] = {}
    for key, raw in attributes.items():
        if key in (ACTIVITY_KEY, TIMESTAMP_KEY):
            continue
        value = _value(raw)
        if value is None:
            logger.debug("Skipping unsupported attribute '%s' (%s)", key, type(raw).__name__)
            continue
        payload[key] = value
    return Event(activity, to_millis(moment), payload)


def _convert_trace(trace: XesTrace, position: int) -> Optional[Trace]:
    case_id = trace.attributes.get(ACTIVITY_KEY)
    if not isinstance(case_id, str) or not case_id:
        raise SchemaError(f"Trace #{position} has no {ACTIVITY_KEY}")
    events = [_convert_event(event, case_id) for event in trace]
    if not events:
        logger.warning("Skipping trace '%s' without events", case_id)
        return None
    events.sort(key=lambda event: event.ts)
    return Trace(case_id, tuple(events))


def _infer_schema(traces: List[Trace], sidecar: AttributeSchema, default_epsilon: float) -> AttributeSchema:
    """Check values against the sidecar schema and infer the undeclared attributes.

    First-seen kind wins; a later value of another kind is an error.
    """
    kinds: Dict[str, AttributeKind] = {}
    observed: Dict[str, Set[AttributeValue]] = {}
    for trace in traces:
        for event in trace.events:
            for name, value in event.payload.items():
                if name in sidecar:
                    try:
                        sidecar[name].check(value)
                    except SchemaError as e:
                        raise SchemaError(f"Trace '{trace.case_id}': {e}") from e
                    continue
                kind = kind_of(value)
                known = kinds.setdefault(name, kind)
                if known != kind:
                    raise SchemaError(
                        f"Trace '{trace.case_id}': attribute '{name}' mixes {known.value} and {kind.value} values")
                observed.setdefault(name, set()).add(value)

    specs = dict(sidecar.attributes)
    for name, kind in kinds.items():
        values = observed[name]
        if kind == AttributeKind.NUMERIC:
            low, high = min(values), max(values)  # type: ignore[type-var]
            bounds: Optional[Tuple[float, float]] = (low, high) if low < high else None  # type: ignore[assignment]
            if bounds is None:
                logger.warning("Attribute '%s' only takes the value %s; it will not be anonymized", name, low)
            specs[name] = AttributeSpec(name, kind, default_epsilon, bounds=bounds)
        elif kind == AttributeKind.CATEGORICAL:
            specs[name] = AttributeSpec(name, kind, default_epsilon, categories=tuple(sorted(values)))  # type: ignore[arg-type]
        else:
            specs[name] = AttributeSpec(name, kind, default_epsilon)
    return AttributeSchema(specs)


def parse_xes(source: BinaryIO, schema: Optional[AttributeSchema] = None,
              default_epsilon: float = 1.0) -> EventLog:
    """Parse an XES document into an EventLog.

    Events are stably sorted by timestamp. Attributes missing from
    `schema` are inferred from the file and get `default_epsilon`.
    Declared bounds and categories are only known through `schema`.
    """
    try:
        imported = xes_importer.deserialize(source.read(), variant=xes_importer.Variants.ITERPARSE,
                                            parameters=_QUIET)
    except etree.XMLSyntaxError as e:
        line, column = e.position
        raise ParseError(f"Malformed XES: {e.msg}", line, column) from e

    traces: List[Trace] = []
    for position, xes_trace in enumerate(imported, start=1):
        trace = _convert_trace(xes_trace, position)
        if trace is not None:
            traces.append(trace)

    inferred = _infer_schema(traces, schema or AttributeSchema(), default_epsilon)
    log = EventLog.build(traces, inferred)
    logger.info("Parsed %d traces, %d events", len(log), log.num_events)
    return log


def read_xes(path: str, schema: Optional[AttributeSchema] = None, default_epsilon: float = 1.0) -> EventLog:
    with open(path, "rb") as f:
        return parse_xes(f, schema, default_epsilon)


def _export_value(kind: AttributeKind, value: AttributeValue) -> AttributeValue:
    # pm4py picks the XES tag from the Python type
    if kind == AttributeKind.BOOLEAN:
        return bool(value)
    if kind == AttributeKind.NUMERIC:
        return float(value)  # type: ignore[arg-type]
    return str(value)


def to_xes_log(log: EventLog) -> XesLog:
    """Build the pm4py log object for `log`. Payload keys are added in name order."""
    xes_traces = []
    for trace in log.traces:
        xes_events = []
        for event in trace.events:
            xes_event = XesEvent({ACTIVITY_KEY: event.activity, TIMESTAMP_KEY: to_datetime(event.ts)})
            for name in sorted(event.payload):
                value = event.payload[name]
                if value is None:
                    continue
                kind = log.schema[name].kind if name in log.schema else kind_of(value)
                xes_event[name] = _export_value(kind, value)
            xes_events.append(xes_event)
        xes_traces.append(XesTrace(xes_events, attributes={ACTIVITY_KEY: trace.case_id}))
    return XesLog(xes_traces, extensions=_EXTENSIONS)


def write_xes(log: EventLog) -> bytes:
    """Serialize a log as an XES document; equal logs give equal bytes."""
    return xes_exporter.serialize(to_xes_log(log), variant=xes_exporter.Variants.ETREE, parameters=_QUIET)


def save_xes(log: EventLog, path: str) -> None:
    with open(path, "wb") as f:
        f.write(write_xes(log))
