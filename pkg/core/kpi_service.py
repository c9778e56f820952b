"""
Service KPIs.
Availability and recovery indicators computed from status timelines and the
stressor log: K6 (instantaneous availability), K9 (time-weighted availability),
K10 (uptime, MTBF, MDF, MTTR), K11 (interruption responsiveness), K7 (grid
outage tolerance) and K8 (comms outage continuity).
"""
import logging
from collections import defaultdict
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import Field

from core import intervals
from core.intervals import Span
from core.observability import observe
from core.schema import (
    SERVICE_LOSS_STATUSES,
    SERVING_STATUSES,
    AnalysisWindow,
    ComponentStatus,
    FeedModel,
    Interruption,
    Interval,
    KpiId,
    KpiValue,
    OfflineSession,
    PowerSample,
    StatusTimeline,
)

logger = logging.getLogger(__name__)

UNTAGGED = "untagged"


def _select(
    timelines: Mapping[str, StatusTimeline],
    connector_types: Mapping[str, str],
    connector_type: Optional[str],
) -> List[StatusTimeline]:
    return [
        timelines[cid] for cid in sorted(timelines)
        if connector_type is None or connector_types.get(cid) == connector_type
    ]


# ============================================================================
# K6, K9
# ============================================================================

@observe(kpi_id=KpiId.K6.value)
def functional_availability_instant(
    timelines: Mapping[str, StatusTimeline],
    connector_types: Mapping[str, str],
    connector_type: Optional[str],
    t: int,
) -> KpiValue:
    """
    Share of connectors of a type that are `available` at instant t.

    Args:
        timelines: Connector id -> timeline
        connector_types: Connector id -> connector type label
        connector_type: Type to evaluate; None evaluates every connector
        t: Instant inside the timelines' window
    """
    selected = _select(timelines, connector_types, connector_type)
    if not selected:
        return KpiValue.undefined(KpiId.K6.value, "emptyClass", connectorType=connector_type, t=t)
    available = sum(1 for tl in selected if tl.status_at(t) == ComponentStatus.AVAILABLE)
    return KpiValue.fraction(
        KpiId.K6.value, available / len(selected),
        connectorType=connector_type, t=t, available=available, connectors=len(selected),
    )


@observe(kpi_id=KpiId.K9.value)
def availability_by_connector(
    timelines: Mapping[str, StatusTimeline],
    connector_types: Mapping[str, str],
    connector_type: Optional[str],
    window: AnalysisWindow,
    excluded: Sequence[Span] = (),
) -> KpiValue:
    """
    Mean over connectors of the time share spent `available`.

    Spans in `excluded` (planned maintenance) are removed from both the
    available time and the exposure. Diagnostics include the mean downtime
    (fault or out-of-service seconds) per connector.
    """
    selected = _select(timelines, connector_types, connector_type)
    if not selected:
        return KpiValue.undefined(KpiId.K9.value, "emptyClass", connectorType=connector_type)

    removed = intervals.clip(excluded, window.t0, window.t1)
    exposure = window.duration - intervals.measure(removed)
    if exposure <= 0:
        return KpiValue.undefined(KpiId.K9.value, "windowFullyExcluded", connectorType=connector_type)

    def available_s(tl: StatusTimeline) -> int:
        spans = tl.spans_in({ComponentStatus.AVAILABLE})
        return intervals.measure(intervals.subtract(spans, removed)) if removed else intervals.measure(spans)

    shares = np.array([available_s(tl) / exposure for tl in selected])
    downtime = np.array([tl.time_in(SERVICE_LOSS_STATUSES) for tl in selected], dtype=float)
    return KpiValue.fraction(
        KpiId.K9.value, float(shares.mean()),
        connectorType=connector_type, connectors=len(selected),
        meanDowntimeS=float(downtime.mean()), exposureS=exposure,
        perConnector={tl.component_id: float(s) for tl, s in zip(selected, shares)},
    )


# ============================================================================
# K10
# ============================================================================

class UptimeResult(FeedModel):
    """Uptime with its mean-time companions."""
    uptime: KpiValue
    mtbf: KpiValue
    mdf: KpiValue
    downtime_s: int
    episodes: int
    exposure_s: int


@observe(kpi_id=KpiId.K10.value)
def uptime_mtbf_mdf(faults: Sequence[Interval], window: AnalysisWindow, units: int = 1) -> UptimeResult:
    """
    Uptime = 1 - D/T, MTBF = (T - D)/K, MDF = D/K over `units` components.

    `faults` may come from several components; each interval is clipped to the
    window and counted as its own episode. T = units * (t1 - t0).

    Returns:
        UptimeResult: MTBF undefined when K = 0; MDF is 0 when K = 0
    """
    if units < 1:
        raise ValueError(f"units must be >= 1, got {units}")
    clipped = [
        (max(f.start, window.t0), min(f.end, window.t1))
        for f in faults if min(f.end, window.t1) > max(f.start, window.t0)
    ]
    exposure = units * window.duration
    downtime = sum(e - s for s, e in clipped)
    episodes = len(clipped)
    censored = sum(1 for f in faults if f.censored)

    uptime = KpiValue.fraction(
        KpiId.K10.value, 1.0 - downtime / exposure,
        downtimeS=downtime, episodes=episodes, exposureS=exposure, censoredEpisodes=censored,
    )
    if episodes:
        mtbf = KpiValue(kpi_id=KpiId.MTBF.value, raw=(exposure - downtime) / episodes, unit="s")
        mdf = KpiValue(kpi_id=KpiId.MDF.value, raw=downtime / episodes, unit="s")
    else:
        mtbf = KpiValue.undefined(KpiId.MTBF.value, "noFaults", unit="s")
        mdf = KpiValue(kpi_id=KpiId.MDF.value, raw=0.0, unit="s")
    return UptimeResult(
        uptime=uptime, mtbf=mtbf, mdf=mdf,
        downtime_s=downtime, episodes=episodes, exposure_s=exposure,
    )


@observe(kpi_id=KpiId.MTTR.value)
def mttr_repair_phase(interruptions: Iterable[Interruption]) -> KpiValue:
    """Mean repair-phase duration (full restore - repair start) in seconds."""
    phases = [
        i.full_restore - i.repair_start
        for i in interruptions
        if i.repair_start is not None and i.full_restore is not None
    ]
    if not phases:
        return KpiValue.undefined(KpiId.MTTR.value, "noQualifyingEvents", unit="s")
    return KpiValue(
        kpi_id=KpiId.MTTR.value, raw=float(np.mean(phases)), unit="s",
        diagnostics={"events": len(phases), "medianS": float(np.median(phases))},
    )


# ============================================================================
# K11
# ============================================================================

class ResponsivenessResult(FeedModel):
    """Interruption responsiveness over a window; means and medians in seconds."""
    ir_min: Optional[float] = None
    ir_full: Optional[float] = None
    ir_min_median: Optional[float] = None
    ir_full_median: Optional[float] = None
    events: int = 0
    censored_count: int = 0
    share_with_both: Optional[float] = None
    per_stressor: Dict[str, Dict[str, Optional[float]]] = Field(default_factory=dict)

    def to_kpis(self) -> Dict[str, KpiValue]:
        """K11 (IR_min, IR_full as fallback) and IR_FULL as KPI values."""
        diagnostics = {
            "events": self.events, "censoredCount": self.censored_count,
            "shareWithBoth": self.share_with_both, "medianS": self.ir_min_median,
            "perStressor": self.per_stressor,
        }
        if self.ir_min is not None:
            k11 = KpiValue(kpi_id=KpiId.K11.value, raw=self.ir_min, unit="s",
                           diagnostics={**diagnostics, "source": "minRestore"})
        elif self.ir_full is not None:
            k11 = KpiValue(kpi_id=KpiId.K11.value, raw=self.ir_full, unit="s",
                           diagnostics={**diagnostics, "source": "fullRestore"})
        else:
            k11 = KpiValue.undefined(KpiId.K11.value, "noRestoredEvents", unit="s", **diagnostics)

        if self.ir_full is not None:
            full = KpiValue(kpi_id=KpiId.IR_FULL.value, raw=self.ir_full, unit="s",
                            diagnostics={"medianS": self.ir_full_median})
        else:
            full = KpiValue.undefined(KpiId.IR_FULL.value, "noFullRestores", unit="s")
        return {KpiId.K11.value: k11, KpiId.IR_FULL.value: full}


def _restore_delays(events: Sequence[Interruption], field: str, t1: int) -> List[int]:
    delays = []
    for event in events:
        restored = getattr(event, field)
        if restored is not None and restored < t1:
            delays.append(restored - event.start)
    return delays


def _mean(values: Sequence[float]) -> Optional[float]:
    return float(np.mean(values)) if values else None


def _median(values: Sequence[float]) -> Optional[float]:
    return float(np.median(values)) if values else None


@observe(kpi_id=KpiId.K11.value)
def interruption_responsiveness(
    interruptions: Sequence[Interruption],
    window: AnalysisWindow,
    maintenance: Iterable[Interval] = (),
) -> ResponsivenessResult:
    """
    Mean time to minimum and full restoration of interruptions starting in the window.

    A restore at or after t1 counts as still open. Events with no restore of
    either kind before t1 are censored: excluded from the means, counted.
    Interruptions starting inside a `maintenance` interval are dropped.

    Args:
        interruptions: Interruption records
        window: Analysis window
        maintenance: Planned maintenance intervals to exclude

    Returns:
        ResponsivenessResult: Means/medians, K, censored count, per-stressor means
    """
    planned = intervals.merge(m.as_span() for m in maintenance)

    def in_maintenance(t: int) -> bool:
        return any(s <= t < e for s, e in planned)

    events = [i for i in interruptions if window.contains(i.start) and not in_maintenance(i.start)]
    if not events:
        return ResponsivenessResult()

    mins = _restore_delays(events, "min_restore", window.t1)
    fulls = _restore_delays(events, "full_restore", window.t1)

    def restored(value: Optional[int]) -> bool:
        return value is not None and value < window.t1

    censored = sum(1 for e in events if not restored(e.min_restore) and not restored(e.full_restore))
    both = sum(1 for e in events if restored(e.min_restore) and restored(e.full_restore))
    if censored:
        logger.warning(f"{censored} interruption(s) still open at window end; censored")

    by_stressor: Dict[str, List[Interruption]] = defaultdict(list)
    for event in events:
        by_stressor[event.stressor or UNTAGGED].append(event)
    per_stressor = {}
    if set(by_stressor) != {UNTAGGED}:
        per_stressor = {
            tag: {
                "irMin": _mean(_restore_delays(group, "min_restore", window.t1)),
                "irFull": _mean(_restore_delays(group, "full_restore", window.t1)),
                "events": float(len(group)),
            }
            for tag, group in sorted(by_stressor.items())
        }

    return ResponsivenessResult(
        ir_min=_mean(mins),
        ir_full=_mean(fulls),
        ir_min_median=_median(mins),
        ir_full_median=_median(fulls),
        events=len(events),
        censored_count=censored,
        share_with_both=both / len(events),
        per_stressor=per_stressor,
    )


# ============================================================================
# K7, K8
# ============================================================================

@observe(kpi_id=KpiId.K7.value)
def grid_outage_tolerance(
    outages: Sequence[Interval],
    power_samples: Sequence[PowerSample],
    pmin_kw: float,
    backup_power: bool = True,
    window: Optional[AnalysisWindow] = None,
) -> KpiValue:
    """
    Discrete grid-outage tolerance: share of in-outage power samples at or above Pmin.

    Undefined when no outage time is observed or when any outage has no
    samples (the gaps are listed). A site without backup scores 0 whenever
    outages exist.
    """
    spans = [o.as_span() for o in outages]
    if window is not None:
        spans = intervals.clip(spans, window.t0, window.t1)
    else:
        spans = intervals.merge(spans)
    total = intervals.measure(spans)
    if total == 0:
        return KpiValue.undefined(KpiId.K7.value, "noOutages", pminKw=pmin_kw)
    if not backup_power:
        return KpiValue.fraction(KpiId.K7.value, 0.0, pminKw=pmin_kw, noBackup=True, outageS=total)

    times = np.array([p.timestamp for p in power_samples], dtype=np.int64)
    power = np.array([p.available_kw for p in power_samples], dtype=float)
    hits, count, gaps = 0, 0, []
    for start, end in spans:
        inside = (times >= start) & (times < end)
        n = int(inside.sum())
        if n == 0:
            gaps.append([start, end])
            continue
        count += n
        hits += int(np.count_nonzero(power[inside] >= pmin_kw))
    if gaps:
        logger.warning(f"{len(gaps)} grid outage(s) without power samples")
        return KpiValue.undefined(KpiId.K7.value, "noSamplesInOutage", pminKw=pmin_kw, gaps=gaps)
    return KpiValue.fraction(
        KpiId.K7.value, hits / count, pminKw=pmin_kw, samples=count, outages=len(spans), outageS=total,
    )


def serviceable_spans(timelines: Iterable[StatusTimeline]) -> List[Span]:
    """Spans where at least one connector is available or occupied."""
    return intervals.union(*(tl.spans_in(SERVING_STATUSES) for tl in timelines))


class ContinuityResult(FeedModel):
    cosc_time: KpiValue
    cosc_sessions: KpiValue


@observe(kpi_id=KpiId.K8.value)
def comms_outage_continuity(
    comms_outages: Sequence[Interval],
    serviceability: Sequence[Span],
    offline_sessions: Sequence[OfflineSession],
    window: Optional[AnalysisWindow] = None,
) -> ContinuityResult:
    """
    Continuity of service through CSMS connectivity loss.

    COSC_time is the serviced share of outage time; COSC_sessions the settled
    share of offline sessions. Each is undefined when its denominator is 0.
    """
    spans = [o.as_span() for o in comms_outages]
    spans = intervals.clip(spans, window.t0, window.t1) if window else intervals.merge(spans)
    outage_s = intervals.measure(spans)
    if outage_s:
        served = intervals.measure(intervals.intersect(spans, serviceability))
        cosc_time = KpiValue.fraction(KpiId.K8.value, served / outage_s, outageS=outage_s, servedS=served)
    else:
        cosc_time = KpiValue.undefined(KpiId.K8.value, "noCommsOutages")

    if offline_sessions:
        settled = sum(1 for s in offline_sessions if s.settled)
        cosc_sessions = KpiValue.fraction(
            KpiId.COSC_SESSIONS.value, settled / len(offline_sessions),
            settled=settled, sessions=len(offline_sessions),
        )
    else:
        cosc_sessions = KpiValue.undefined(KpiId.COSC_SESSIONS.value, "noOfflineSessions")
    return ContinuityResult(cosc_time=cosc_time, cosc_sessions=cosc_sessions)


def pooled_fault_intervals(
    fault_sets: Mapping[str, Sequence[Interval]],
) -> Tuple[List[Interval], int]:
    """Concatenate per-component fault intervals; returns (intervals, component count)."""
    pooled = [f for cid in sorted(fault_sets) for f in fault_sets[cid]]
    return pooled, max(len(fault_sets), 1)
