"""
Report writer.
Emits report.json (full precision, deterministic), report.csv (human table),
radar.csv (normalized vector for plotting) and a sidecar carrying the
generation timestamp. Also reads a report back for `explain`.
"""
import csv
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import Field

from core.ingest import MalformedDocument, SchemaViolation
from core.pipeline import KpiReport
from core.schema import SCHEMA_VERSION, FeedModel, KpiValue

logger = logging.getLogger(__name__)

REPORT_JSON = "report.json"
REPORT_CSV = "report.csv"
RADAR_CSV = "radar.csv"
SIDECAR = "report.meta.json"

CSV_COLUMNS = ["kpiId", "display", "raw", "normalized", "unit", "undefinedReason"]
TIME_UNITS = {"s": 1.0 / 60.0, "h": 60.0}
SELF_AUDIT_TOLERANCE = 1e-9


def report_document(report: KpiReport) -> Dict[str, Any]:
    return report.model_dump(by_alias=True, mode="json")


def render_report_json(report: KpiReport) -> str:
    """Canonical JSON text: sorted keys, fixed indent, trailing newline."""
    return json.dumps(report_document(report), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def display_value(value: KpiValue) -> str:
    """Fractions as percent to one decimal, durations to the nearest minute."""
    if value.raw is None:
        return "undefined"
    if value.unit in ("fraction", "flag"):
        return f"{value.raw * 100.0:.1f}%"
    if value.unit in TIME_UNITS:
        return f"{round(value.raw * TIME_UNITS[value.unit])} min"
    if value.unit == "score":
        return f"{value.diagnostics.get('headline', value.raw * 100.0):.1f}"
    return f"{value.raw:.4g} {value.unit}"


def csv_rows(report: KpiReport) -> List[Dict[str, Any]]:
    rows = []
    for kpi_id, value in sorted(report.kpis.items()):
        rows.append({
            "kpiId": kpi_id,
            "display": display_value(value),
            "raw": "" if value.raw is None else repr(value.raw),
            "normalized": "" if value.normalized is None else repr(value.normalized),
            "unit": value.unit,
            "undefinedReason": value.diagnostics.get("undefinedReason", ""),
        })
    return rows


def write_report(report: KpiReport, out_dir: Union[str, Path], generated_at: Optional[datetime] = None) -> Dict[str, Path]:
    """
    Write every report artifact into `out_dir`.

    Returns:
        Dict[str, Path]: Artifact name -> path
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": out / REPORT_JSON,
        "csv": out / REPORT_CSV,
        "radar": out / RADAR_CSV,
        "sidecar": out / SIDECAR,
    }

    paths["json"].write_text(render_report_json(report), encoding="utf-8")

    with paths["csv"].open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(csv_rows(report))

    with paths["radar"].open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["kpiId", "normalized"])
        if report.srs is not None:
            for point in report.srs.radar_data:
                writer.writerow([point.kpi_id, repr(point.normalized)])

    stamp = (generated_at or datetime.now(timezone.utc)).strftime("%Y-%m-%dT%H:%M:%SZ")
    sidecar = {"generatedAt": stamp, "schemaVersion": SCHEMA_VERSION, "report": REPORT_JSON}
    paths["sidecar"].write_text(json.dumps(sidecar, sort_keys=True, indent=2) + "\n", encoding="utf-8")

    logger.info(f"Wrote report for {report.site_id} to {out}")
    return paths


# ============================================================================
# explain
# ============================================================================

class KpiExplanation(FeedModel):
    kpi_id: str
    raw: Optional[float] = None
    normalized: Optional[float] = None
    unit: str
    weight: Optional[float] = None
    contribution: Optional[float] = None
    undefined_reason: Optional[str] = None
    diagnostics: Dict[str, Any] = Field(default_factory=dict)


class Explanation(FeedModel):
    """Per-KPI provenance and the SRS self-audit of a written report."""
    site_id: str
    srs: Optional[float] = None
    recomputed_srs: Optional[float] = None
    audit_passed: bool
    fault_penalty: float = 0.0
    kpis: List[KpiExplanation] = Field(default_factory=list)
    provenance: Dict[str, Any] = Field(default_factory=dict)


def load_report(path: Union[str, Path]) -> KpiReport:
    """Read report.json back into a KpiReport."""
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise MalformedDocument(str(path), "file not found")
    except json.JSONDecodeError as e:
        raise MalformedDocument(str(path), f"line {e.lineno} column {e.colno}: {e.msg}")
    try:
        return KpiReport.model_validate(document)
    except ValueError as e:
        raise SchemaViolation(f"{path.name}:$", str(e))


def explain_report(report: KpiReport) -> Explanation:
    """
    Recompute SRS from the report's own components and list each KPI's provenance.

    The audit passes when the stored and recomputed scores agree to 1e-9, or
    when both are undefined.
    """
    components = report.srs.components if report.srs else {}
    entries = []
    for kpi_id, value in sorted(report.kpis.items()):
        component = components.get(kpi_id)
        entries.append(KpiExplanation(
            kpi_id=kpi_id,
            raw=value.raw,
            normalized=value.normalized,
            unit=value.unit,
            weight=component.weight if component else None,
            contribution=component.weight * component.normalized if component else None,
            undefined_reason=value.diagnostics.get("undefinedReason"),
            diagnostics=value.diagnostics,
        ))

    if report.srs is None:
        return Explanation(site_id=report.site_id, audit_passed=True, kpis=entries,
                           provenance={k: v.model_dump(by_alias=True) for k, v in report.provenance.items()})

    recomputed = report.srs.recompute()
    passed = abs(recomputed - report.srs.srs) <= SELF_AUDIT_TOLERANCE
    if not passed:
        logger.warning(f"SRS self-audit failed: stored {report.srs.srs}, recomputed {recomputed}")
    return Explanation(
        site_id=report.site_id,
        srs=report.srs.srs,
        recomputed_srs=recomputed,
        audit_passed=passed,
        fault_penalty=report.srs.w_fault * report.srs.fault_rate,
        kpis=entries,
        provenance={k: v.model_dump(by_alias=True) for k, v in report.provenance.items()},
    )
