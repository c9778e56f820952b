"""
Feed writer.
Serialises a FeedBundle into the files ingest reads back: inventory.json,
status.jsonl (status, rate, stressor and energy records), and when present
queue.jsonl, cyber.json and demand.json.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Union

from core.ingest import FeedBundle, format_timestamp
from core.schema import SCHEMA_VERSION, SiteInventory

logger = logging.getLogger(__name__)

INVENTORY_FILE = "inventory.json"
STATUS_FILE = "status.jsonl"
QUEUE_FILE = "queue.jsonl"
CYBER_FILE = "cyber.json"
DEMAND_FILE = "demand.json"


def _dumps(document: Any) -> str:
    return json.dumps(document, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _write_json(path: Path, document: Dict[str, Any]) -> None:
    path.write_text(json.dumps(document, sort_keys=True, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def _write_jsonl(path: Path, records: Iterable[Dict[str, Any]]) -> int:
    lines = [_dumps({"kind": "header", "schemaVersion": SCHEMA_VERSION})]
    lines.extend(_dumps(r) for r in records)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return len(lines) - 1


def inventory_document(inventory: SiteInventory) -> Dict[str, Any]:
    """Nested inventory document; parent ids are implied by nesting and left out."""
    document = inventory.model_dump(by_alias=True, exclude_none=True, mode="json")
    for station in document["stations"]:
        station.pop("siteId", None)
        for point in station["refillPoints"]:
            point.pop("stationId", None)
            for connector in point["connectors"]:
                connector.pop("refillPointId", None)
    document["schemaVersion"] = SCHEMA_VERSION
    return document


def _span(kind: str, start: int, end: int) -> Dict[str, Any]:
    return {"kind": kind, "start": format_timestamp(start), "end": format_timestamp(end)}


def dynamic_records(bundle: FeedBundle) -> List[Dict[str, Any]]:
    """Status, rate, stressor and energy records in a stable order."""
    records: List[Dict[str, Any]] = []
    for event in bundle.status_events:
        record = {"kind": "status", "componentId": event.component_id,
                  "timestamp": format_timestamp(event.timestamp), "status": event.status.value}
        if event.reason is not None:
            record["reason"] = event.reason
        records.append(record)
    for scope in sorted(bundle.rates):
        series = bundle.rates[scope]
        for obs in series.observations:
            records.append({"kind": "rate", "scope": scope, "currency": series.currency,
                            "timestamp": format_timestamp(obs.timestamp), "rate": obs.rate})

    log = bundle.stressors
    if log is not None:
        records.extend(_span("gridOutage", i.start, i.end) for i in log.grid_outages)
        records.extend(_span("commsOutage", i.start, i.end) for i in log.comms_outages)
        records.extend(_span("maintenance", i.start, i.end) for i in log.planned_maintenance)
        for i in log.interruptions:
            record = {"kind": "interruption", "start": format_timestamp(i.start)}
            for key, value in (("minRestore", i.min_restore), ("fullRestore", i.full_restore),
                               ("repairStart", i.repair_start)):
                if value is not None:
                    record[key] = format_timestamp(value)
            if i.stressor is not None:
                record["stressor"] = i.stressor
            records.append(record)
        records.extend(
            {"kind": "power", "timestamp": format_timestamp(p.timestamp), "availableKw": p.available_kw}
            for p in log.power_samples
        )
        records.extend(
            {"kind": "offlineSession", "sessionId": s.session_id, "settled": s.settled}
            for s in log.offline_sessions
        )
    for e in bundle.energy:
        records.append({"kind": "energy", "timestamp": format_timestamp(e.timestamp),
                        "renewableShare": e.renewable_share, "deliveredKwh": e.delivered_kwh})
    return records


def write_feeds(bundle: FeedBundle, out_dir: Union[str, Path]) -> Dict[str, Path]:
    """
    Write the bundle's feeds into `out_dir` (created if missing).

    Output is key-sorted and free of generation timestamps, so the same
    bundle always produces byte-identical files.

    Returns:
        Dict[str, Path]: Feed label -> written file
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: Dict[str, Path] = {}

    _write_json(out / INVENTORY_FILE, inventory_document(bundle.inventory))
    written["inventory"] = out / INVENTORY_FILE

    count = _write_jsonl(out / STATUS_FILE, dynamic_records(bundle))
    written["status"] = out / STATUS_FILE
    logger.info(f"Wrote {count} dynamic records to {out / STATUS_FILE}")

    if bundle.queue is not None:
        records = []
        for r in bundle.queue:
            record = {"vehicleId": r.vehicle_id, "tPlug": format_timestamp(r.t_plug)}
            if r.t_join is not None:
                record["tJoin"] = format_timestamp(r.t_join)
            records.append(record)
        _write_jsonl(out / QUEUE_FILE, records)
        written["queue"] = out / QUEUE_FILE

    if bundle.cyber is not None:
        document = bundle.cyber.model_dump(by_alias=True, exclude_none=True, mode="json")
        document["schemaVersion"] = SCHEMA_VERSION
        _write_json(out / CYBER_FILE, document)
        written["cyber"] = out / CYBER_FILE

    if bundle.demand is not None:
        _write_json(out / DEMAND_FILE, {
            "schemaVersion": SCHEMA_VERSION,
            "points": [p.model_dump(by_alias=True, mode="json") for p in bundle.demand],
            "sites": [{"lat": lat, "lon": lon} for lat, lon in bundle.other_sites],
        })
        written["demand"] = out / DEMAND_FILE
    return written
