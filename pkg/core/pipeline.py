"""
KPI pipeline.
Turns an ingested FeedBundle into a KpiReport: structural, service, market,
queue and cyber KPIs, normalization, cyber sub-indices, fault rate, SRS,
sensitivity, IRI and the optional hierarchy breakdown.
"""
import logging
from typing import Any, Dict, List, Optional, Tuple

from pydantic import Field

from core import composite, kpi_cyber, kpi_market_queue, kpi_service, kpi_structural
from core.ingest import (
    ClockSkewReport,
    FeedBundle,
    FeedProvenance,
    fault_intervals,
    refill_point_timelines,
    resolve_connector_timelines,
)
from core.kpi_market_queue import SurgeReading
from core.observability import get_tracer
from core.schema import (
    DEFAULT_NORMALIZATION,
    SCHEMA_VERSION,
    AnalysisWindow,
    FeedModel,
    HierarchyLevel,
    Interval,
    KpiId,
    KpiValue,
    RateSeries,
    StatusTimeline,
    WeightConfig,
)

logger = logging.getLogger(__name__)

NOTE_OCCUPIED = (
    "K9 counts only 'available' time; K8 serviceability also counts 'occupied' "
    "because a charging connector is delivering service."
)
NOTE_OPERATING_HOURS = "Temporary operating hours are parsed and reported but not folded into K9."
NOTE_CSP = "CSP is the mean nearest-site distance; a reporting convention, not a scoring input."
NOTE_MMS = "MMS_WQ is an Erlang-C MODEL-PROXY; see its assumptions."
NOTE_NO_STATUS = "No status feed: service KPIs are undefined and the fault rate is taken as 0."
NOTE_RECOVERY_K8_ONLY = (
    "CYBER_RECOVERY rests on K8 alone (no certificate deployment data), so K8 counts "
    "through its own weight and the recovery weight."
)
NOTE_SURGE_SHARE = "K13 is the share of instants with a defined PSI that were flagged as surges."

FRACTION_UNITS = {"fraction", "flag"}


class KpiReport(FeedModel):
    """Everything `compute` publishes for one site and window."""
    schema_version: str = SCHEMA_VERSION
    site_id: str
    window: AnalysisWindow
    kpis: Dict[str, KpiValue]
    srs: Optional[composite.SrsResult] = None
    srs_undefined_reason: Optional[str] = None
    fault_rate: float
    iri: composite.IriResult
    level: HierarchyLevel
    hierarchy: List[composite.HierarchyNode] = Field(default_factory=list)
    piv_series: List[Tuple[int, Optional[float]]] = Field(default_factory=list)
    surge_readings: List[SurgeReading] = Field(default_factory=list)
    config: WeightConfig
    maintenance_exclusion: Dict[str, bool] = Field(default_factory=dict)
    provenance: Dict[str, FeedProvenance] = Field(default_factory=dict)
    declared_feeds: List[str] = Field(default_factory=list)
    standard_feeds: List[str] = Field(default_factory=list)
    clock_skews: List[ClockSkewReport] = Field(default_factory=list)
    temporary_operating_hours: List[Dict[str, Any]] = Field(default_factory=list)
    notes: List[str] = Field(default_factory=list)

    def insufficient_data(self) -> bool:
        """True when no weighted KPI is defined, so no score could be formed."""
        return self.srs is None


def _pick_rates(rates: Dict[str, RateSeries]) -> Optional[RateSeries]:
    if not rates:
        return None
    return rates.get("adhoc") or rates[sorted(rates)[0]]


def _normalized(values: Dict[str, KpiValue], config: WeightConfig) -> Dict[str, KpiValue]:
    """Apply configured normalization; unbounded KPIs without a spec keep no normalized value."""
    result = {}
    for kpi_id, value in values.items():
        if kpi_id in config.normalization or kpi_id in DEFAULT_NORMALIZATION:
            value = composite.normalize_value(value, config.normalization_for(kpi_id))
        elif value.unit not in FRACTION_UNITS:
            value = value.model_copy(update={"normalized": None})
        result[kpi_id] = value
    return result


def _structural(bundle: FeedBundle, config: WeightConfig, window: AnalysisWindow) -> Dict[str, KpiValue]:
    inv, th = bundle.inventory, config.thresholds
    values: Dict[str, KpiValue] = {}
    values[KpiId.K1.value] = kpi_structural.redundancy_at_site(
        inv, th.n_target, feeder_map=kpi_structural.feeder_map_of(inv))

    k2 = kpi_structural.high_power_share(inv, th.pthr_kw)
    values[KpiId.K2.value] = k2
    for kpi, key in ((KpiId.HP_SHARE_750, "hpShare750"), (KpiId.HP_SHARE_1000, "hpShare1000")):
        if k2.is_defined:
            values[kpi.value] = KpiValue.fraction(kpi.value, k2.diagnostics[key])
        else:
            values[kpi.value] = KpiValue.undefined(kpi.value, "emptyInventory")

    values[KpiId.K3.value] = kpi_structural.green_supply_ratio(inv.energy_mix, config.renewable_labels)
    if bundle.energy:
        shares, energy = kpi_structural.split_energy_samples(bundle.energy)
        try:
            values[KpiId.GSR_DYNAMIC.value] = kpi_structural.green_supply_ratio_dynamic(
                shares, energy, window)
        except kpi_structural.MisalignedSeries as e:
            logger.warning(f"Dynamic GSR undefined: {str(e)}")
            values[KpiId.GSR_DYNAMIC.value] = KpiValue.undefined(
                KpiId.GSR_DYNAMIC.value, "misalignedSeries", detail=str(e))

    try:
        if inv.payment_shares is not None:
            values[KpiId.K4.value] = kpi_structural.user_access_resilience(shares=inv.payment_shares)
        else:
            values[KpiId.K4.value] = kpi_structural.user_access_resilience(methods=inv.payment_methods)
    except kpi_structural.BadDistribution as e:
        logger.warning(f"K4 undefined: {str(e)}")
        values[KpiId.K4.value] = KpiValue.undefined(KpiId.K4.value, "badDistribution", detail=str(e))

    if bundle.demand is not None:
        sites = [inv.coordinates] + list(bundle.other_sites)
        values[KpiId.K5.value] = kpi_structural.spatial_coverage(bundle.demand, sites, th.coverage_radius_km)
        values[KpiId.CSP.value] = kpi_structural.coverage_proximity(bundle.demand, sites)
    else:
        values[KpiId.K5.value] = KpiValue.undefined(KpiId.K5.value, "noDemandFeed")
    return values


def _service(
    bundle: FeedBundle,
    config: WeightConfig,
    window: AnalysisWindow,
    timelines: Dict[str, StatusTimeline],
) -> Dict[str, KpiValue]:
    th, log = config.thresholds, bundle.stressors
    maintenance: List[Interval] = list(log.planned_maintenance) if log else []

    def excluded(kpi: KpiId) -> List[Interval]:
        return maintenance if config.excludes_maintenance(kpi.value) else []

    values: Dict[str, KpiValue] = {}
    has_status = "status" in bundle.declared_feeds
    if has_status:
        types = {c.connector_id: c.connector_type for c in bundle.inventory.connectors()}
        t_eval = window.t1 - 1
        by_type = sorted(set(types.values()))
        k6 = kpi_service.functional_availability_instant(timelines, types, None, t_eval)
        k6_types = {t: kpi_service.functional_availability_instant(timelines, types, t, t_eval).raw
                    for t in by_type}
        values[KpiId.K6.value] = k6.model_copy(update={"diagnostics": {**k6.diagnostics, "byType": k6_types}})

        k9_spans = [m.as_span() for m in excluded(KpiId.K9)]
        k9 = kpi_service.availability_by_connector(timelines, types, None, window, k9_spans)
        k9_types = {t: kpi_service.availability_by_connector(timelines, types, t, window, k9_spans).raw
                    for t in by_type}
        values[KpiId.K9.value] = k9.model_copy(update={"diagnostics": {**k9.diagnostics, "byType": k9_types}})

        faults = {
            cid: fault_intervals(tl, config.treat_out_of_service_as_fault, excluded(KpiId.K10))
            for cid, tl in timelines.items()
        }
        pooled, units = kpi_service.pooled_fault_intervals(faults)
        uptime = kpi_service.uptime_mtbf_mdf(pooled, window, units)
        values[KpiId.K10.value] = uptime.uptime
        values[KpiId.MTBF.value] = uptime.mtbf
        values[KpiId.MDF.value] = uptime.mdf
    else:
        for kpi in (KpiId.K6, KpiId.K9, KpiId.K10, KpiId.MTBF, KpiId.MDF):
            values[kpi.value] = KpiValue.undefined(kpi.value, "noStatusFeed")

    if log is None:
        for kpi in (KpiId.K7, KpiId.K8, KpiId.K11, KpiId.MTTR):
            values[kpi.value] = KpiValue.undefined(kpi.value, "noStressorFeed")
        return values

    values[KpiId.MTTR.value] = kpi_service.mttr_repair_phase(log.interruptions)
    ir = kpi_service.interruption_responsiveness(log.interruptions, window, excluded(KpiId.K11))
    values.update(ir.to_kpis())
    values[KpiId.K7.value] = kpi_service.grid_outage_tolerance(
        log.grid_outages, log.power_samples, th.pmin_kw, bundle.inventory.backup_power, window)
    if has_status:
        cosc = kpi_service.comms_outage_continuity(
            log.comms_outages, kpi_service.serviceable_spans(timelines.values()),
            log.offline_sessions, window)
        values[KpiId.K8.value] = cosc.cosc_time
        values[KpiId.COSC_SESSIONS.value] = cosc.cosc_sessions
    else:
        values[KpiId.K8.value] = KpiValue.undefined(KpiId.K8.value, "noStatusFeed")
    return values


def _market(bundle: FeedBundle, config: WeightConfig, window: AnalysisWindow):
    th = config.thresholds
    rates = _pick_rates(bundle.rates)
    if rates is None:
        return {
            KpiId.K12.value: KpiValue.undefined(KpiId.K12.value, "noRates", unit="cv"),
            KpiId.K13.value: KpiValue.undefined(KpiId.K13.value, "noRates"),
        }, [], []
    series = kpi_market_queue.price_instability_series(rates, window, th.piv_window_s, th.piv_step_s, th.n_min)
    readings = kpi_market_queue.price_surge_series(rates, window, th.psi_baseline_s, th.surge_threshold, th.n_min)
    k12 = kpi_market_queue.price_instability_summary(series, th.piv_window_s)
    k13 = kpi_market_queue.price_surge_summary(readings, th.surge_threshold)
    scope = {"scope": rates.scope, "currency": rates.currency}
    return {
        KpiId.K12.value: k12.model_copy(update={"diagnostics": {**k12.diagnostics, **scope}}),
        KpiId.K13.value: k13.model_copy(update={"diagnostics": {**k13.diagnostics, **scope}}),
    }, series, readings


def compute_report(
    bundle: FeedBundle,
    window: AnalysisWindow,
    config: WeightConfig,
    level: Optional[HierarchyLevel] = None,
) -> KpiReport:
    """
    Compute every KPI the bundle supports and assemble the report.

    Args:
        bundle: Ingested feeds
        window: Analysis window
        config: Weights, normalization and thresholds
        level: Hierarchy level for the availability breakdown (defaults to config.level)

    Returns:
        KpiReport: Values keyed by KPI id, SRS (or the reason it is undefined), IRI and provenance
    """
    level = level or config.level
    tracer = get_tracer()
    with tracer.start_as_current_span("compute_report") as span:
        span.set_attribute("site.id", bundle.inventory.site_id)
        report = _compute(bundle, window, config, level)
        span.set_attribute("srs.defined", report.srs is not None)
        return report


def _compute(bundle: FeedBundle, window: AnalysisWindow, config: WeightConfig, level: HierarchyLevel) -> KpiReport:
    inv = bundle.inventory
    logger.info(f"Computing KPIs for {inv.site_id} over [{window.t0}, {window.t1})")
    timelines = resolve_connector_timelines(inv, bundle.status_events, window)
    has_status = "status" in bundle.declared_feeds
    notes = [NOTE_OCCUPIED, NOTE_OPERATING_HOURS]

    values: Dict[str, KpiValue] = {}
    values.update(_structural(bundle, config, window))
    values.update(_service(bundle, config, window, timelines))
    market, series, readings = _market(bundle, config, window)
    values.update(market)

    if bundle.queue is not None:
        th = config.thresholds
        chargers = th.chargers or len(inv.refill_points()) or None
        values.update(kpi_market_queue.queue_kpis(bundle.queue, window, th.service_rate_per_charger, chargers))
        notes.append(NOTE_MMS)
    else:
        values[KpiId.K14.value] = KpiValue.undefined(KpiId.K14.value, "noQueueFeed", unit="s")

    if bundle.cyber is not None:
        values.update(kpi_cyber.cyber_kpis(bundle.cyber, config.thresholds.clock_tolerance_s))
    if KpiId.CSP.value in values:
        notes.append(NOTE_CSP)

    values = _normalized(values, config)
    link, recovery = kpi_cyber.cyber_sub_indices(values)
    values[link.kpi_id] = link
    values[recovery.kpi_id] = recovery
    if recovery.is_defined and "CDL_norm" in recovery.diagnostics.get("dropped", []):
        notes.append(NOTE_RECOVERY_K8_ONLY)
    if values[KpiId.K13.value].is_defined:
        notes.append(NOTE_SURGE_SHARE)

    maintenance = list(bundle.stressors.planned_maintenance) if bundle.stressors else []
    if has_status:
        point_timelines = list(refill_point_timelines(inv, timelines).values())
        k15_maintenance = maintenance if config.excludes_maintenance(KpiId.K15.value) else []
        rate = composite.fault_rate(point_timelines, window, config.treat_out_of_service_as_fault, k15_maintenance)
    else:
        rate = 0.0
        notes.append(NOTE_NO_STATUS)

    srs, reason = None, None
    try:
        srs = composite.site_resilience_score(values, config, rate)
        values[KpiId.K15.value] = KpiValue(
            kpi_id=KpiId.K15.value, raw=srs.srs, normalized=srs.headline / 100.0, unit="score",
            diagnostics={"headline": srs.headline, "faultRate": rate, "dropped": srs.dropped},
        )
    except composite.NoDefinedKpis as e:
        logger.warning(f"SRS undefined: {str(e)}")
        reason = "noDefinedKpis"
        values[KpiId.K15.value] = KpiValue.undefined(KpiId.K15.value, reason, unit="score")

    hierarchy = []
    if has_status:
        k10_maintenance = maintenance if config.excludes_maintenance(KpiId.K10.value) else []
        hierarchy = composite.roll_up_availability(
            inv, timelines, window, level, config.treat_out_of_service_as_fault, k10_maintenance)

    standard = bundle.standard_feeds()
    for kpi_id, value in sorted(values.items()):
        logger.debug(f"{kpi_id} raw={value.raw} normalized={value.normalized}")

    return KpiReport(
        site_id=inv.site_id,
        window=window,
        kpis=dict(sorted(values.items())),
        srs=srs,
        srs_undefined_reason=reason,
        fault_rate=rate,
        iri=composite.interoperability_readiness(standard),
        level=level,
        hierarchy=hierarchy,
        piv_series=series,
        surge_readings=readings,
        config=config,
        maintenance_exclusion={k: config.excludes_maintenance(k) for k in
                               (KpiId.K9.value, KpiId.K10.value, KpiId.K11.value, KpiId.K15.value)},
        provenance=dict(sorted(bundle.provenance.items())),
        declared_feeds=sorted(bundle.declared_feeds),
        standard_feeds=sorted(standard),
        clock_skews=bundle.clock_skews,
        temporary_operating_hours=inv.temporary_operating_hours,
        notes=notes,
    )
