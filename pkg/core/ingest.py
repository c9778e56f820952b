"""
Feed ingestion.
Parses the static inventory, the dynamic status/price/stressor feed and the
extension feeds (queue, cyber, demand), and builds status timelines clipped to
the analysis window.
"""
import calendar
import hashlib
import json
import logging
from collections import defaultdict
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

from pydantic import ValidationError

from core import intervals
from core.schema import (
    DAY,
    AnalysisWindow,
    ComponentStatus,
    CyberTelemetry,
    DemandPoint,
    EnergySample,
    FeedModel,
    Interruption,
    Interval,
    KpiEngineError,
    OfflineSession,
    PowerSample,
    QueueRecord,
    RateObservation,
    RateSeries,
    SERVICE_LOSS_STATUSES,
    SiteInventory,
    StatusEvent,
    StatusTimeline,
    StressorLog,
    TimelineSegment,
)

logger = logging.getLogger(__name__)

DEFAULT_LOOKBACK_S = 7 * DAY

PathLike = Union[str, Path]


class IngestError(KpiEngineError):
    """Base class for feed ingestion errors."""
    pass


class MalformedDocument(IngestError):
    """The feed file is not syntactically valid JSON / JSON Lines."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class SchemaViolation(IngestError):
    """The feed is valid JSON but breaks the documented schema."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class ClockSkewReport(FeedModel):
    """An event whose timestamp runs backwards for its component."""
    component_id: str
    timestamp: int
    previous_timestamp: int
    line: int


class FeedProvenance(FeedModel):
    """Identifies an input file by name and content digest."""
    file_name: str
    sha256: str


# ============================================================================
# Helpers
# ============================================================================

def parse_timestamp(value: Any, where: str) -> int:
    """
    Convert an ISO-8601 string or epoch number into integer UTC seconds.
    Sub-second precision is truncated; naive ISO strings are read as UTC.
    """
    if isinstance(value, bool):
        raise SchemaViolation(where, f"timestamp {value!r} is not a time")
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        return int(value // 1)
    if isinstance(value, str):
        text = value.strip()
        if text.endswith(("Z", "z")):
            text = text[:-1] + "+00:00"
        try:
            parsed = datetime.fromisoformat(text)
        except ValueError:
            raise SchemaViolation(where, f"unparseable timestamp {value!r}")
        if parsed.tzinfo is None:
            parsed = parsed.replace(tzinfo=timezone.utc)
        return calendar.timegm(parsed.astimezone(timezone.utc).utctimetuple())
    raise SchemaViolation(where, f"timestamp {value!r} has unsupported type")


def format_timestamp(t: int) -> str:
    return datetime.fromtimestamp(t, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _loc_to_path(loc: Sequence[Any]) -> str:
    path = ""
    for part in loc:
        if isinstance(part, int):
            path += f"[{part}]"
        else:
            path += f".{part}" if path else str(part)
    return path or "$"


def _violation_from(error: ValidationError, prefix: str) -> SchemaViolation:
    first = error.errors()[0]
    location = _loc_to_path(first.get("loc", ()))
    return SchemaViolation(f"{prefix}:{location}", first.get("msg", "invalid value"))


def _load_json(path: Path) -> Any:
    try:
        with path.open("r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise MalformedDocument(str(path), "file not found")
    except json.JSONDecodeError as e:
        raise MalformedDocument(str(path), f"line {e.lineno} column {e.colno}: {e.msg}")


def _iter_jsonl(path: Path) -> Iterable[Tuple[int, Dict[str, Any]]]:
    try:
        with path.open("r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except FileNotFoundError:
        raise MalformedDocument(str(path), "file not found")
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise MalformedDocument(f"{path}:{line_no}", e.msg)
        if not isinstance(record, dict):
            raise SchemaViolation(f"{path.name}:{line_no}", "record must be a JSON object")
        yield line_no, record


def _require_version(document: Dict[str, Any], where: str) -> str:
    version = document.get("schemaVersion")
    if not isinstance(version, str):
        raise SchemaViolation(f"{where}:schemaVersion", "missing or non-string schemaVersion")
    return version


def _warn_unknown(document: Dict[str, Any], known: Set[str], where: str) -> None:
    for key in sorted(set(document) - known):
        logger.warning(f"{where}: ignoring unknown field {key!r}")


def file_provenance(path: PathLike) -> FeedProvenance:
    path = Path(path)
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    return FeedProvenance(file_name=path.name, sha256=digest)


# ============================================================================
# Static feed
# ============================================================================

_INVENTORY_FIELDS = {
    "schemaVersion", "siteId", "coordinates", "stations", "paymentMethods", "paymentShares",
    "energyMix", "operatorMeta", "backupPower", "temporaryOperatingHours",
}


def _check_unique_ids(document: Dict[str, Any], where: str) -> None:
    seen: Dict[str, str] = {}

    def claim(node_id: Any, path: str) -> None:
        if not isinstance(node_id, str) or not node_id:
            raise SchemaViolation(f"{where}:{path}", "identifier must be a non-empty string")
        if node_id in seen:
            raise SchemaViolation(f"{where}:{path}", f"duplicate identifier {node_id!r} (first at {seen[node_id]})")
        seen[node_id] = path

    claim(document.get("siteId"), "siteId")
    for i, station in enumerate(document.get("stations") or []):
        claim(station.get("stationId"), f"stations[{i}].stationId")
        for j, point in enumerate(station.get("refillPoints") or []):
            claim(point.get("refillPointId"), f"stations[{i}].refillPoints[{j}].refillPointId")
            for k, connector in enumerate(point.get("connectors") or []):
                claim(
                    connector.get("connectorId"),
                    f"stations[{i}].refillPoints[{j}].connectors[{k}].connectorId",
                )


def _nest_parent_ids(document: Dict[str, Any]) -> Dict[str, Any]:
    site_id = document.get("siteId")
    stations = []
    for station in document.get("stations") or []:
        points = []
        for point in station.get("refillPoints") or []:
            connectors = [
                {**connector, "refillPointId": point.get("refillPointId")}
                for connector in point.get("connectors") or []
            ]
            points.append({**point, "stationId": station.get("stationId"), "connectors": connectors})
        stations.append({**station, "siteId": site_id, "refillPoints": points})
    nested = {**document, "stations": stations}

    mix = document.get("energyMix")
    if isinstance(mix, dict):
        nested["energyMix"] = [{"source": k, "ratio": v} for k, v in mix.items()]
    return nested


def parse_static_feed(path: PathLike) -> SiteInventory:
    """
    Parse and validate the static inventory profile.

    Args:
        path: Path to inventory.json

    Returns:
        SiteInventory: Validated site hierarchy

    Raises:
        MalformedDocument: If the file is not valid JSON
        SchemaViolation: On missing/duplicate IDs or out-of-range values; names the offending path
    """
    path = Path(path)
    document = _load_json(path)
    if not isinstance(document, dict):
        raise SchemaViolation(f"{path.name}:$", "top-level value must be an object")

    _require_version(document, path.name)
    _warn_unknown(document, _INVENTORY_FIELDS, path.name)
    for i, station in enumerate(document.get("stations") or []):
        if not isinstance(station, dict):
            raise SchemaViolation(f"{path.name}:stations[{i}]", "station must be an object")
    _check_unique_ids(document, path.name)

    nested = _nest_parent_ids({k: v for k, v in document.items() if k in _INVENTORY_FIELDS})
    nested.pop("schemaVersion", None)
    try:
        inventory = SiteInventory.model_validate(nested)
    except ValidationError as e:
        raise _violation_from(e, path.name)

    logger.info(
        f"Parsed inventory {inventory.site_id}: {len(inventory.stations)} stations, "
        f"{len(inventory.refill_points())} refill points, {len(inventory.connectors())} connectors"
    )
    return inventory


# ============================================================================
# Dynamic feed
# ============================================================================

class DynamicFeed(FeedModel):
    """Parsed content of a status/stressor JSON Lines feed."""
    events: List[StatusEvent]
    rates: Dict[str, RateSeries]
    stressors: StressorLog
    energy: List[EnergySample]
    clock_skews: List[ClockSkewReport]
    record_kinds: Set[str]


_RECORD_FIELDS: Dict[str, Set[str]] = {
    "header": {"kind", "schemaVersion"},
    "status": {"kind", "componentId", "timestamp", "status", "reason"},
    "rate": {"kind", "scope", "currency", "timestamp", "rate"},
    "gridOutage": {"kind", "start", "end"},
    "commsOutage": {"kind", "start", "end"},
    "maintenance": {"kind", "start", "end", "componentId"},
    "interruption": {"kind", "start", "minRestore", "fullRestore", "repairStart", "stressor"},
    "power": {"kind", "timestamp", "availableKw"},
    "offlineSession": {"kind", "sessionId", "settled"},
    "energy": {"kind", "timestamp", "renewableShare", "deliveredKwh"},
}

_INTERVAL_KINDS = {"gridOutage": "grid_outages", "commsOutage": "comms_outages", "maintenance": "planned_maintenance"}


def _optional_ts(record: Dict[str, Any], key: str, where: str) -> Optional[int]:
    value = record.get(key)
    return None if value is None else parse_timestamp(value, f"{where}.{key}")


def parse_dynamic_feed(
    path: PathLike,
    window: AnalysisWindow,
    lookback_s: int = DEFAULT_LOOKBACK_S,
    skew_tolerance_s: int = 0,
) -> DynamicFeed:
    """
    Parse the dynamic status/price/stressor feed.

    Status events before t0 - lookback or at/after t1 are dropped; events in
    [t0 - lookback, t0) are kept as seed state. Rate observations are kept in
    full since price baselines may reach before the window.

    Args:
        path: Path to a JSON Lines feed whose first record is the header
        window: Analysis window
        lookback_s: Seed-state lookback before t0
        skew_tolerance_s: Backwards jump tolerated before a clock-skew report

    Returns:
        DynamicFeed: Events sorted by (componentId, timestamp), sorted rate series and stressor log

    Raises:
        MalformedDocument: On JSON syntax errors
        SchemaViolation: On missing header, unknown kinds or invalid fields
    """
    path = Path(path)
    records = list(_iter_jsonl(path))
    if not records or records[0][1].get("kind") != "header":
        raise SchemaViolation(f"{path.name}:1", "first record must be a header with schemaVersion")
    _require_version(records[0][1], f"{path.name}:1")

    events: List[Tuple[int, StatusEvent]] = []
    rate_points: Dict[str, Dict[int, float]] = defaultdict(dict)
    currencies: Dict[str, str] = {}
    spans: Dict[str, List[Interval]] = defaultdict(list)
    interruptions: List[Interruption] = []
    power: List[PowerSample] = []
    sessions: List[OfflineSession] = []
    energy: List[EnergySample] = []
    kinds: Set[str] = set()
    last_seen: Dict[str, int] = {}
    skews: List[ClockSkewReport] = []
    lower = window.t0 - lookback_s

    for line_no, record in records[1:]:
        where = f"{path.name}:{line_no}"
        kind = record.get("kind")
        if kind not in _RECORD_FIELDS or kind == "header":
            raise SchemaViolation(f"{where}.kind", f"unknown record kind {kind!r}")
        _warn_unknown(record, _RECORD_FIELDS[kind], where)
        kinds.add(kind)
        try:
            if kind == "status":
                ts = parse_timestamp(record.get("timestamp"), f"{where}.timestamp")
                event = StatusEvent(
                    component_id=record["componentId"], timestamp=ts,
                    status=record.get("status"), reason=record.get("reason"),
                )
                previous = last_seen.get(event.component_id)
                if previous is not None and ts < previous - skew_tolerance_s:
                    logger.warning(
                        f"{where}: clock skew for {event.component_id}: {ts} after {previous}"
                    )
                    skews.append(ClockSkewReport(
                        component_id=event.component_id, timestamp=ts,
                        previous_timestamp=previous, line=line_no,
                    ))
                last_seen[event.component_id] = max(ts, previous if previous is not None else ts)
                if lower <= ts < window.t1:
                    events.append((line_no, event))
            elif kind == "rate":
                scope = record.get("scope", "adhoc")
                ts = parse_timestamp(record.get("timestamp"), f"{where}.timestamp")
                rate = record.get("rate")
                if not isinstance(rate, (int, float)) or isinstance(rate, bool):
                    raise SchemaViolation(f"{where}.rate", "rate must be a number")
                rate_points[scope][ts] = float(rate)
                currencies.setdefault(scope, record.get("currency", "EUR"))
            elif kind in _INTERVAL_KINDS:
                spans[_INTERVAL_KINDS[kind]].append(Interval(
                    start=parse_timestamp(record.get("start"), f"{where}.start"),
                    end=parse_timestamp(record.get("end"), f"{where}.end"),
                ))
            elif kind == "interruption":
                interruptions.append(Interruption(
                    start=parse_timestamp(record.get("start"), f"{where}.start"),
                    min_restore=_optional_ts(record, "minRestore", where),
                    full_restore=_optional_ts(record, "fullRestore", where),
                    repair_start=_optional_ts(record, "repairStart", where),
                    stressor=record.get("stressor"),
                ))
            elif kind == "power":
                power.append(PowerSample(
                    timestamp=parse_timestamp(record.get("timestamp"), f"{where}.timestamp"),
                    available_kw=record.get("availableKw"),
                ))
            elif kind == "offlineSession":
                sessions.append(OfflineSession(session_id=record.get("sessionId"), settled=record.get("settled")))
            elif kind == "energy":
                energy.append(EnergySample(
                    timestamp=parse_timestamp(record.get("timestamp"), f"{where}.timestamp"),
                    renewable_share=record.get("renewableShare"),
                    delivered_kwh=record.get("deliveredKwh"),
                ))
        except ValidationError as e:
            raise _violation_from(e, where)
        except KeyError as e:
            raise SchemaViolation(where, f"missing field {e.args[0]!r}")

    # stable sort keeps file order for equal timestamps
    events.sort(key=lambda item: (item[1].component_id, item[1].timestamp, item[0]))
    rates = {
        scope: RateSeries(
            scope=scope, currency=currencies[scope],
            observations=[RateObservation(timestamp=t, rate=r) for t, r in sorted(points.items())],
        )
        for scope, points in sorted(rate_points.items())
    }
    stressors = StressorLog(
        grid_outages=sorted(spans["grid_outages"], key=lambda i: (i.start, i.end)),
        comms_outages=sorted(spans["comms_outages"], key=lambda i: (i.start, i.end)),
        planned_maintenance=sorted(spans["planned_maintenance"], key=lambda i: (i.start, i.end)),
        interruptions=sorted(interruptions, key=lambda i: i.start),
        power_samples=sorted(power, key=lambda p: p.timestamp),
        offline_sessions=sessions,
    )
    logger.info(
        f"Parsed {path.name}: {len(events)} status events, {len(rates)} rate scopes, "
        f"{len(skews)} clock-skew reports"
    )
    return DynamicFeed(
        events=[event for _, event in events],
        rates=rates,
        stressors=stressors,
        energy=sorted(energy, key=lambda e: e.timestamp),
        clock_skews=skews,
        record_kinds=kinds,
    )


def merge_stressors(*logs: Optional[StressorLog]) -> StressorLog:
    """Combine stressor logs from several feeds, keeping every list sorted."""
    present = [log for log in logs if log is not None]
    def gather(name: str, key) -> list:
        return sorted((item for log in present for item in getattr(log, name)), key=key)
    span_key = lambda i: (i.start, i.end)
    return StressorLog(
        grid_outages=gather("grid_outages", span_key),
        comms_outages=gather("comms_outages", span_key),
        planned_maintenance=gather("planned_maintenance", span_key),
        interruptions=gather("interruptions", lambda i: i.start),
        power_samples=gather("power_samples", lambda p: p.timestamp),
        offline_sessions=[s for log in present for s in log.offline_sessions],
    )


# ============================================================================
# Timelines
# ============================================================================

def build_timeline(
    events: Iterable[StatusEvent],
    component_id: str,
    window: AnalysisWindow,
    seed_status: Optional[Union[ComponentStatus, str]] = None,
) -> StatusTimeline:
    """
    Build the piecewise-constant timeline of one component over [t0, t1).

    The state before the first in-window event is `seed_status` if given, else
    the last event before t0, else `unknown`. Events at the same timestamp
    resolve to the last one in input order.
    """
    own = sorted((e for e in events if e.component_id == component_id), key=lambda e: e.timestamp)

    if seed_status is not None:
        current = ComponentStatus.parse(seed_status)
    else:
        prior = [e for e in own if e.timestamp < window.t0]
        current = prior[-1].status if prior else ComponentStatus.UNKNOWN

    changes: Dict[int, ComponentStatus] = {}
    for event in own:
        if window.t0 <= event.timestamp < window.t1:
            changes[event.timestamp] = event.status

    segments: List[TimelineSegment] = []
    start = window.t0
    for ts in sorted(changes):
        status = changes[ts]
        if ts == start:
            current = status
            continue
        if status != current:
            segments.append(TimelineSegment(start=start, end=ts, status=current))
            start, current = ts, status
    segments.append(TimelineSegment(start=start, end=window.t1, status=current))
    return StatusTimeline(component_id=component_id, segments=segments)


def fault_intervals(
    timeline: StatusTimeline,
    treat_out_of_service_as_fault: bool = True,
    exclude_maintenance: Iterable[Union[Interval, Tuple[int, int]]] = (),
) -> List[Interval]:
    """
    Maximal service-losing intervals of a timeline, minus planned maintenance.

    An interval still open at the timeline end is returned ending there and
    marked censored.
    """
    statuses = set(SERVICE_LOSS_STATUSES) if treat_out_of_service_as_fault else {ComponentStatus.FAULT}
    spans = timeline.spans_in(statuses)
    removed = [m.as_span() if isinstance(m, Interval) else tuple(m) for m in exclude_maintenance]
    if removed:
        spans = intervals.subtract(spans, removed)
    open_at_end = timeline.segments[-1].status in statuses
    return [
        Interval(start=s, end=e, censored=open_at_end and e == timeline.end)
        for s, e in spans
    ]


def group_events(events: Iterable[StatusEvent]) -> Dict[str, List[StatusEvent]]:
    grouped: Dict[str, List[StatusEvent]] = defaultdict(list)
    for event in events:
        grouped[event.component_id].append(event)
    return dict(grouped)


def resolve_connector_timelines(
    inventory: SiteInventory,
    events: Iterable[StatusEvent],
    window: AnalysisWindow,
) -> Dict[str, StatusTimeline]:
    """
    Timeline per connector. A connector without its own events inherits the
    timeline of its nearest ancestor (refill point, station, site) that has events.
    """
    grouped = group_events(events)
    timelines: Dict[str, StatusTimeline] = {}
    for connector in inventory.connectors():
        source = next((node for node in inventory.ancestors(connector.connector_id) if node in grouped), None)
        if source is None:
            timeline = StatusTimeline(
                component_id=connector.connector_id,
                segments=[TimelineSegment(start=window.t0, end=window.t1, status=ComponentStatus.UNKNOWN)],
            )
        else:
            timeline = build_timeline(grouped[source], source, window)
            if source != connector.connector_id:
                timeline = timeline.model_copy(update={"component_id": connector.connector_id})
        timelines[connector.connector_id] = timeline
    return timelines


_PARENT_PRIORITY = [
    ComponentStatus.AVAILABLE,
    ComponentStatus.OCCUPIED,
    ComponentStatus.UNKNOWN,
    ComponentStatus.FAULT,
    ComponentStatus.OUT_OF_SERVICE,
]


def derive_parent_timeline(component_id: str, children: Sequence[StatusTimeline]) -> StatusTimeline:
    """
    Combine child timelines: the parent is available if any child is, else
    occupied, unknown, fault, out of service in that order.
    """
    if not children:
        raise ValueError(f"no child timelines for {component_id}")
    if len(children) == 1:
        return children[0].model_copy(update={"component_id": component_id})
    start, end = children[0].start, children[0].end
    bounds = sorted({seg.start for child in children for seg in child.segments} | {end})
    segments: List[TimelineSegment] = []
    for lo, hi in zip(bounds, bounds[1:]):
        present = {child.status_at(lo) for child in children}
        status = next(s for s in _PARENT_PRIORITY if s in present)
        if segments and segments[-1].status == status:
            segments[-1] = TimelineSegment(start=segments[-1].start, end=hi, status=status)
        else:
            segments.append(TimelineSegment(start=lo, end=hi, status=status))
    return StatusTimeline(component_id=component_id, segments=segments)


def refill_point_timelines(
    inventory: SiteInventory,
    connector_timelines: Dict[str, StatusTimeline],
) -> Dict[str, StatusTimeline]:
    return {
        point.refill_point_id: derive_parent_timeline(
            point.refill_point_id,
            [connector_timelines[c.connector_id] for c in point.connectors],
        )
        for point in inventory.refill_points()
        if point.connectors
    }


def check_hierarchy_closure(inventory: SiteInventory, events: Iterable[StatusEvent], where: str) -> None:
    """Every event must reference a node of the inventory."""
    known = inventory.component_levels()
    for event in events:
        if event.component_id not in known:
            raise SchemaViolation(f"{where}:componentId", f"unknown component {event.component_id!r}")


# ============================================================================
# Extension feeds
# ============================================================================

def parse_queue_feed(path: PathLike) -> List[QueueRecord]:
    """Parse queue.jsonl (header line, then one record per vehicle arrival)."""
    path = Path(path)
    records = list(_iter_jsonl(path))
    if not records or records[0][1].get("kind") != "header":
        raise SchemaViolation(f"{path.name}:1", "first record must be a header with schemaVersion")
    _require_version(records[0][1], f"{path.name}:1")
    result: List[QueueRecord] = []
    for line_no, record in records[1:]:
        where = f"{path.name}:{line_no}"
        _warn_unknown(record, {"vehicleId", "tJoin", "tPlug"}, where)
        try:
            result.append(QueueRecord(
                vehicle_id=record.get("vehicleId"),
                t_join=_optional_ts(record, "tJoin", where),
                t_plug=parse_timestamp(record.get("tPlug"), f"{where}.tPlug"),
            ))
        except ValidationError as e:
            raise _violation_from(e, where)
    return result


def _cyber_document(document: Dict[str, Any]) -> Dict[str, Any]:
    converted = dict(document)
    if converted.get("certIssuedAt") is not None:
        converted["certIssuedAt"] = parse_timestamp(converted["certIssuedAt"], "cyber.json:certIssuedAt")
    accepted = converted.get("certAcceptedAt") or {}
    converted["certAcceptedAt"] = {
        device: None if ts is None else parse_timestamp(ts, f"cyber.json:certAcceptedAt.{device}")
        for device, ts in accepted.items()
    }
    return converted


def parse_cyber_feed(path: PathLike) -> CyberTelemetry:
    """Parse cyber.json into CyberTelemetry."""
    path = Path(path)
    document = _load_json(path)
    if not isinstance(document, dict):
        raise SchemaViolation(f"{path.name}:$", "top-level value must be an object")
    _require_version(document, path.name)
    known = {field.alias for field in CyberTelemetry.model_fields.values()} | {"schemaVersion"}
    _warn_unknown(document, known, path.name)
    body = {k: v for k, v in document.items() if k in known and k != "schemaVersion"}
    try:
        return CyberTelemetry.model_validate(_cyber_document(body))
    except ValidationError as e:
        raise _violation_from(e, path.name)


def parse_demand_feed(path: PathLike) -> Tuple[List[DemandPoint], List[Tuple[float, float]]]:
    """
    Parse demand.json: demand points plus optional coordinates of other sites
    serving the same area (`sites`).
    """
    path = Path(path)
    document = _load_json(path)
    if not isinstance(document, dict):
        raise SchemaViolation(f"{path.name}:$", "top-level value must be an object")
    _require_version(document, path.name)
    _warn_unknown(document, {"schemaVersion", "points", "sites"}, path.name)
    points: List[DemandPoint] = []
    for i, raw in enumerate(document.get("points") or []):
        try:
            points.append(DemandPoint.model_validate(raw))
        except ValidationError as e:
            raise _violation_from(e, f"{path.name}:points[{i}]")
    sites: List[Tuple[float, float]] = []
    for i, raw in enumerate(document.get("sites") or []):
        try:
            sites.append((float(raw["lat"]), float(raw["lon"])))
        except (KeyError, TypeError, ValueError):
            raise SchemaViolation(f"{path.name}:sites[{i}]", "site needs numeric lat and lon")
    return points, sites


# ============================================================================
# Bundle
# ============================================================================

class FeedBundle(FeedModel):
    """Everything ingested for one site and window."""
    inventory: SiteInventory
    status_events: List[StatusEvent] = []
    rates: Dict[str, RateSeries] = {}
    stressors: Optional[StressorLog] = None
    queue: Optional[List[QueueRecord]] = None
    cyber: Optional[CyberTelemetry] = None
    demand: Optional[List[DemandPoint]] = None
    other_sites: List[Tuple[float, float]] = []
    energy: List[EnergySample] = []
    declared_feeds: Set[str] = set()
    clock_skews: List[ClockSkewReport] = []
    provenance: Dict[str, FeedProvenance] = {}

    def standard_feeds(self) -> Set[str]:
        """Standardised source families present, as used by the readiness index."""
        feeds: Set[str] = {"datex_static"}
        if "status" in self.declared_feeds:
            feeds.add("datex_status")
        log = self.stressors
        if log and (log.comms_outages or log.interruptions or log.offline_sessions):
            feeds.add("ocpp")
        if log and (log.grid_outages or log.power_samples):
            feeds.add("ems")
        if self.energy:
            feeds.add("ems")
        cyber = self.cyber
        if cyber is not None:
            if cyber.heartbeats_expected or cyber.pings_expected or cyber.transactions or cyber.tls_attempts:
                feeds.add("ocpp")
            if (cyber.cert_issued_at is not None or cyber.cert_devices_total or cyber.patch_delays
                    or cyber.security_incidents or cyber.vulns_due_count or cyber.mfa_privileged_total):
                feeds.add("pki")
            if cyber.message_latencies or cyber.clock_errors:
                feeds.add("ems")
        if self.queue:
            feeds.add("hdv")
        return feeds


def load_bundle(
    window: AnalysisWindow,
    inventory_path: PathLike,
    status_path: Optional[PathLike] = None,
    queue_path: Optional[PathLike] = None,
    cyber_path: Optional[PathLike] = None,
    demand_path: Optional[PathLike] = None,
    stressors_path: Optional[PathLike] = None,
    lookback_s: int = DEFAULT_LOOKBACK_S,
    skew_tolerance_s: int = 0,
) -> FeedBundle:
    """
    Parse every given feed into a FeedBundle.

    Raises:
        MalformedDocument / SchemaViolation: From the individual parsers, or when
            a status event references a component missing from the inventory
    """
    inventory = parse_static_feed(inventory_path)
    declared = {"inventory"}
    provenance = {"inventory": file_provenance(inventory_path)}
    events: List[StatusEvent] = []
    rates: Dict[str, RateSeries] = {}
    energy: List[EnergySample] = []
    skews: List[ClockSkewReport] = []
    logs: List[StressorLog] = []

    for label, feed_path in (("status", status_path), ("stressors", stressors_path)):
        if feed_path is None:
            continue
        feed = parse_dynamic_feed(feed_path, window, lookback_s, skew_tolerance_s)
        check_hierarchy_closure(inventory, feed.events, Path(feed_path).name)
        declared.add(label)
        provenance[label] = file_provenance(feed_path)
        events.extend(feed.events)
        rates.update(feed.rates)
        energy.extend(feed.energy)
        skews.extend(feed.clock_skews)
        logs.append(feed.stressors)

    events.sort(key=lambda e: (e.component_id, e.timestamp))
    queue = cyber = demand = None
    other_sites: List[Tuple[float, float]] = []
    if queue_path is not None:
        queue = parse_queue_feed(queue_path)
        declared.add("queue")
        provenance["queue"] = file_provenance(queue_path)
    if cyber_path is not None:
        cyber = parse_cyber_feed(cyber_path)
        declared.add("cyber")
        provenance["cyber"] = file_provenance(cyber_path)
    if demand_path is not None:
        demand, other_sites = parse_demand_feed(demand_path)
        declared.add("demand")
        provenance["demand"] = file_provenance(demand_path)

    return FeedBundle(
        inventory=inventory,
        status_events=events,
        rates=rates,
        stressors=merge_stressors(*logs) if logs else None,
        queue=queue,
        cyber=cyber,
        demand=demand,
        other_sites=other_sites,
        energy=sorted(energy, key=lambda e: e.timestamp),
        declared_feeds=declared,
        clock_skews=skews,
        provenance=provenance,
    )
