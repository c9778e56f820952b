"""
Composite scoring.
Normalization of sub-KPIs, the fault-rate penalty, the Site Resilience Score
(K15) with weight-sensitivity ablation, hierarchy roll-ups and the
Interoperability Readiness Index.
"""
import logging
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from pydantic import Field

from core.ingest import fault_intervals
from core.observability import observe
from core.schema import (
    AnalysisWindow,
    ComponentStatus,
    FeedModel,
    HierarchyLevel,
    Interval,
    KpiEngineError,
    KpiId,
    KpiValue,
    NormalizationKind,
    NormalizationSpec,
    SiteInventory,
    StatusTimeline,
    WeightConfig,
)

logger = logging.getLogger(__name__)


class CompositeError(KpiEngineError):
    """Base class for composite scoring errors."""
    pass


class BadSpec(CompositeError):
    """Normalization spec with lo >= hi."""
    pass


class NoDefinedKpis(CompositeError):
    """No weighted sub-KPI is defined, so no score can be formed."""
    pass


# ============================================================================
# Normalization
# ============================================================================

def normalize(raw: Optional[float], spec: NormalizationSpec) -> Optional[float]:
    """
    Map a raw value onto [0, 1] with a monotone transform.

    Args:
        raw: Raw KPI value; None propagates
        spec: identity, minmax(lo, hi) or inverted-minmax(lo, hi)

    Returns:
        Optional[float]: Normalized value, clamped to [0, 1]

    Raises:
        BadSpec: If a min-max spec has lo >= hi
    """
    if spec.kind != NormalizationKind.IDENTITY and spec.lo >= spec.hi:
        raise BadSpec(f"normalization range lo={spec.lo} must be below hi={spec.hi}")
    if raw is None:
        return None
    if spec.kind == NormalizationKind.IDENTITY:
        if not 0.0 <= raw <= 1.0:
            logger.warning(f"Identity normalization of {raw} outside [0, 1]; clamped")
        return min(max(raw, 0.0), 1.0)
    scaled = min(max((raw - spec.lo) / (spec.hi - spec.lo), 0.0), 1.0)
    if spec.kind == NormalizationKind.INVERTED_MINMAX:
        return 1.0 - scaled
    return scaled


def normalize_value(value: KpiValue, spec: NormalizationSpec) -> KpiValue:
    """Copy of `value` with `normalized` set by `spec`."""
    return value.model_copy(update={"normalized": normalize(value.raw, spec)})


# ============================================================================
# Fault rate
# ============================================================================

@observe(name="fault_rate")
def fault_rate(
    timelines: Sequence[StatusTimeline],
    window: AnalysisWindow,
    treat_out_of_service_as_fault: bool = True,
    maintenance: Iterable[Interval] = (),
) -> float:
    """
    Aggregate service-loss time across refill points over (#points * window).

    Planned maintenance is removed from each point's fault time when given.
    """
    if not timelines:
        logger.warning("Fault rate over zero refill points taken as 0")
        return 0.0
    maintenance = list(maintenance)
    lost = sum(
        f.duration
        for tl in timelines
        for f in fault_intervals(tl, treat_out_of_service_as_fault, maintenance)
    )
    return lost / (len(timelines) * window.duration)


# ============================================================================
# Site Resilience Score
# ============================================================================

class SrsComponent(FeedModel):
    """One weighted member of the score."""
    raw: Optional[float] = None
    normalized: float
    weight: float
    configured_weight: float


class SensitivityEntry(FeedModel):
    kpi_id: str
    direction: str
    srs: float
    srs_delta: float


class SensitivityReport(FeedModel):
    perturbation_fraction: float
    entries: List[SensitivityEntry] = Field(default_factory=list)
    max_abs_delta: float = 0.0


class RadarPoint(FeedModel):
    kpi_id: str
    normalized: float


class SrsResult(FeedModel):
    """Score, its components and the sensitivity table."""
    srs: float
    headline: float
    components: Dict[str, SrsComponent]
    fault_rate: float
    w_fault: float
    dropped: List[str] = Field(default_factory=list)
    sensitivity: SensitivityReport
    radar_data: List[RadarPoint] = Field(default_factory=list)

    def recompute(self) -> float:
        """Score rebuilt from the stored components."""
        return sum(c.weight * c.normalized for c in self.components.values()) - self.w_fault * self.fault_rate


def _score(
    values: Mapping[str, KpiValue],
    weights: Mapping[str, float],
    w_fault: float,
    fault_rate_value: float,
) -> Tuple[float, Dict[str, float], List[str]]:
    defined = {
        kpi: w for kpi, w in weights.items()
        if kpi in values and values[kpi].normalized is not None
    }
    dropped = [kpi for kpi in weights if kpi not in defined]
    total = sum(defined.values())
    if not defined or total <= 0.0:
        raise NoDefinedKpis(f"none of {sorted(weights)} has a defined normalized value")
    used = {kpi: w / total for kpi, w in defined.items()}
    srs = sum(used[kpi] * values[kpi].normalized for kpi in used) - w_fault * fault_rate_value
    return srs, used, dropped


def weight_sensitivity(
    values: Mapping[str, KpiValue],
    config: WeightConfig,
    fault_rate_value: float,
) -> SensitivityReport:
    """
    Scale each weight by (1 +/- perturbationFraction), renormalize, rescore.

    Returns:
        SensitivityReport: One entry per (KPI, direction), plus max |delta|
    """
    fraction = config.perturbation_fraction
    report = SensitivityReport(perturbation_fraction=fraction)
    if fraction == 0.0:
        return report

    baseline, _, _ = _score(values, config.weights, config.w_fault, fault_rate_value)
    entries = []
    for kpi in config.weights:
        for direction, factor in (("+", 1.0 + fraction), ("-", 1.0 - fraction)):
            perturbed = dict(config.weights)
            perturbed[kpi] *= factor
            total = sum(perturbed.values())
            perturbed = {k: w / total for k, w in perturbed.items()}
            srs, _, _ = _score(values, perturbed, config.w_fault, fault_rate_value)
            entries.append(SensitivityEntry(kpi_id=kpi, direction=direction, srs=srs, srs_delta=srs - baseline))
    max_delta = max((abs(e.srs_delta) for e in entries), default=0.0)
    return SensitivityReport(perturbation_fraction=fraction, entries=entries, max_abs_delta=max_delta)


@observe(kpi_id=KpiId.K15.value)
def site_resilience_score(
    values: Mapping[str, KpiValue],
    config: WeightConfig,
    fault_rate_value: float,
) -> SrsResult:
    """
    SRS = sum(w_i * norm_i) - w_fault * FaultRate.

    Undefined members are dropped and the remaining weights renormalized to 1;
    the dropped ids are recorded. The headline is clamp(SRS, 0, 1) * 100.

    Raises:
        NoDefinedKpis: If no weighted member has a normalized value
    """
    srs, used, dropped = _score(values, config.weights, config.w_fault, fault_rate_value)
    if dropped:
        logger.info(f"SRS dropped undefined members {dropped}; weights renormalized")
    components = {
        kpi: SrsComponent(
            raw=values[kpi].raw,
            normalized=values[kpi].normalized,
            weight=weight,
            configured_weight=config.weights[kpi],
        )
        for kpi, weight in used.items()
    }
    return SrsResult(
        srs=srs,
        headline=min(max(srs, 0.0), 1.0) * 100.0,
        components=components,
        fault_rate=fault_rate_value,
        w_fault=config.w_fault,
        dropped=dropped,
        sensitivity=weight_sensitivity(values, config, fault_rate_value),
        radar_data=[RadarPoint(kpi_id=kpi, normalized=c.normalized) for kpi, c in components.items()],
    )


# ============================================================================
# Roll-ups
# ============================================================================

class AggregationRule(str, Enum):
    TIME_WEIGHTED = "duration-weighted mean"
    POOLED = "pooled numerator/denominator"


class NodeMeasure(FeedModel):
    """A ratio kept as numerator and denominator so it can be pooled."""
    node_id: str
    numerator: float
    denominator: float

    @property
    def value(self) -> Optional[float]:
        return self.numerator / self.denominator if self.denominator > 0 else None


def group_of(inventory: SiteInventory, level: HierarchyLevel) -> Dict[str, str]:
    """Connector id -> id of its ancestor at `level`. Stations without a pool form their own."""
    mapping: Dict[str, str] = {}
    for station in inventory.stations:
        for point in station.refill_points:
            for connector in point.connectors:
                mapping[connector.connector_id] = {
                    HierarchyLevel.CONNECTOR: connector.connector_id,
                    HierarchyLevel.POINT: point.refill_point_id,
                    HierarchyLevel.STATION: station.station_id,
                    HierarchyLevel.POOL: station.pool_id or station.station_id,
                    HierarchyLevel.SITE: inventory.site_id,
                }[level]
    return mapping


def roll_up(
    level: HierarchyLevel,
    measures: Mapping[str, NodeMeasure],
    inventory: SiteInventory,
) -> Dict[str, NodeMeasure]:
    """
    Aggregate connector-level measures to `level` by pooling numerators and denominators.

    Duration-weighted means of time shares and pooled count ratios are the same
    operation once each measure keeps its own denominator.
    """
    groups = group_of(inventory, level)
    pooled: Dict[str, List[float]] = {}
    for connector_id, measure in measures.items():
        node = groups.get(connector_id)
        if node is None:
            raise KeyError(f"{connector_id} is not a connector of {inventory.site_id}")
        acc = pooled.setdefault(node, [0.0, 0.0])
        acc[0] += measure.numerator
        acc[1] += measure.denominator
    return {
        node: NodeMeasure(node_id=node, numerator=num, denominator=den)
        for node, (num, den) in sorted(pooled.items())
    }


class HierarchyNode(FeedModel):
    node_id: str
    level: HierarchyLevel
    availability: Optional[float] = None
    uptime: Optional[float] = None
    connectors: int


def roll_up_availability(
    inventory: SiteInventory,
    timelines: Mapping[str, StatusTimeline],
    window: AnalysisWindow,
    level: HierarchyLevel,
    treat_out_of_service_as_fault: bool = True,
    maintenance: Iterable[Interval] = (),
) -> List[HierarchyNode]:
    """Per-node time-weighted availability (K9) and uptime (K10) at `level`."""
    maintenance = list(maintenance)
    available, up = {}, {}
    for cid, tl in timelines.items():
        available[cid] = NodeMeasure(
            node_id=cid, numerator=tl.time_in({ComponentStatus.AVAILABLE}), denominator=window.duration)
        lost = sum(f.duration for f in fault_intervals(tl, treat_out_of_service_as_fault, maintenance))
        up[cid] = NodeMeasure(node_id=cid, numerator=window.duration - lost, denominator=window.duration)

    avail_nodes = roll_up(level, available, inventory)
    up_nodes = roll_up(level, up, inventory)
    counts: Dict[str, int] = {}
    for cid, node in group_of(inventory, level).items():
        if cid in timelines:
            counts[node] = counts.get(node, 0) + 1
    return [
        HierarchyNode(
            node_id=node, level=level,
            availability=avail_nodes[node].value, uptime=up_nodes[node].value,
            connectors=counts[node],
        )
        for node in avail_nodes
    ]


# ============================================================================
# Interoperability Readiness Index
# ============================================================================

class Tier(str, Enum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"


class CatalogEntry(FeedModel):
    kpi_id: str
    tier: Tier
    category: str
    required_feeds: Set[str]


TIER_A_FEEDS = {"datex_static", "datex_status"}
TIER_B_FEEDS = TIER_A_FEEDS | {"ocpp"}

AVAILABILITY = "Availability"
GRID_FLEX = "Grid/Flex"
USER_SPATIAL = "User/Spatial"
MARKET_SOURCING = "Market/Sourcing"
CYBER = "Cyber"
HDV_OPS = "HDV Ops"


def _entry(kpi: KpiId, tier: Tier, category: str, feeds: Set[str]) -> CatalogEntry:
    return CatalogEntry(kpi_id=kpi.value, tier=tier, category=category, required_feeds=feeds)


KPI_CATALOG: List[CatalogEntry] = [
    _entry(KpiId.K1, Tier.A, AVAILABILITY, TIER_A_FEEDS),
    _entry(KpiId.K2, Tier.A, GRID_FLEX, TIER_A_FEEDS),
    _entry(KpiId.K4, Tier.A, USER_SPATIAL, TIER_A_FEEDS),
    _entry(KpiId.K5, Tier.A, USER_SPATIAL, TIER_A_FEEDS),
    _entry(KpiId.K6, Tier.A, AVAILABILITY, TIER_A_FEEDS),
    _entry(KpiId.K9, Tier.A, AVAILABILITY, TIER_A_FEEDS),
    _entry(KpiId.K10, Tier.A, AVAILABILITY, TIER_A_FEEDS),
    _entry(KpiId.K12, Tier.A, MARKET_SOURCING, TIER_A_FEEDS),
    _entry(KpiId.K13, Tier.A, MARKET_SOURCING, TIER_A_FEEDS),
    _entry(KpiId.K15, Tier.A, AVAILABILITY, TIER_A_FEEDS),
    _entry(KpiId.K8, Tier.B, AVAILABILITY, TIER_B_FEEDS),
    _entry(KpiId.K11, Tier.B, AVAILABILITY, TIER_B_FEEDS),
    _entry(KpiId.LKFR, Tier.B, CYBER, TIER_B_FEEDS),
    _entry(KpiId.CTR, Tier.B, CYBER, TIER_B_FEEDS),
    _entry(KpiId.SSES, Tier.B, CYBER, TIER_B_FEEDS),
    _entry(KpiId.K3, Tier.C, MARKET_SOURCING, TIER_B_FEEDS | {"ems"}),
    _entry(KpiId.K7, Tier.C, GRID_FLEX, TIER_B_FEEDS | {"ems"}),
    _entry(KpiId.TFS, Tier.C, CYBER, TIER_B_FEEDS | {"ems"}),
    _entry(KpiId.TSH, Tier.C, CYBER, TIER_B_FEEDS | {"ems"}),
    _entry(KpiId.CDL, Tier.C, CYBER, TIER_B_FEEDS | {"pki"}),
    _entry(KpiId.CERT_HEALTH, Tier.C, CYBER, TIER_B_FEEDS | {"pki"}),
    _entry(KpiId.PATCH_LATENCY, Tier.C, CYBER, TIER_B_FEEDS | {"pki"}),
    _entry(KpiId.MFA_COVERAGE, Tier.C, CYBER, TIER_B_FEEDS | {"pki"}),
    _entry(KpiId.FIRMWARE_ADOPTION, Tier.C, CYBER, TIER_B_FEEDS | {"pki"}),
    _entry(KpiId.SEC_MTTD, Tier.C, CYBER, TIER_B_FEEDS | {"pki"}),
    _entry(KpiId.SEC_MTTR, Tier.C, CYBER, TIER_B_FEEDS | {"pki"}),
    _entry(KpiId.VULN_CLOSURE, Tier.C, CYBER, TIER_B_FEEDS | {"pki"}),
    _entry(KpiId.NET_SEPARATION, Tier.C, CYBER, TIER_B_FEEDS | {"pki"}),
    _entry(KpiId.K14, Tier.D, HDV_OPS, TIER_B_FEEDS | {"hdv"}),
]

CATEGORIES = [AVAILABILITY, GRID_FLEX, USER_SPATIAL, MARKET_SOURCING, CYBER, HDV_OPS]


class TierBreakdown(FeedModel):
    computable: int
    total: int


class IriResult(FeedModel):
    """Readiness index with per-tier and per-category breakdowns."""
    iri_percent: float
    computable: List[str]
    missing: Dict[str, List[str]]
    per_tier: Dict[str, TierBreakdown]
    per_category: Dict[str, Optional[float]]


@observe(name="interoperability_readiness")
def interoperability_readiness(
    declared_feeds: Iterable[str],
    catalog: Sequence[CatalogEntry] = tuple(KPI_CATALOG),
) -> IriResult:
    """
    Percent of catalog KPIs computable from the declared standardised feeds.

    Args:
        declared_feeds: Feed labels (datex_static, datex_status, ocpp, ems, pki, hdv)
        catalog: KPI -> tier, category and required feeds

    Returns:
        IriResult: Overall percent, per-tier counts and per-category percents
    """
    feeds = set(declared_feeds)
    computable, missing = [], {}
    per_tier: Dict[str, List[int]] = {tier.value: [0, 0] for tier in Tier}
    per_category: Dict[str, List[int]] = {cat: [0, 0] for cat in CATEGORIES}
    for entry in catalog:
        ok = entry.required_feeds <= feeds
        tier_acc = per_tier.setdefault(entry.tier.value, [0, 0])
        cat_acc = per_category.setdefault(entry.category, [0, 0])
        tier_acc[1] += 1
        cat_acc[1] += 1
        if ok:
            computable.append(entry.kpi_id)
            tier_acc[0] += 1
            cat_acc[0] += 1
        else:
            missing[entry.kpi_id] = sorted(entry.required_feeds - feeds)

    total = len(catalog)
    return IriResult(
        iri_percent=100.0 * len(computable) / total if total else 0.0,
        computable=computable,
        missing=missing,
        per_tier={t: TierBreakdown(computable=c, total=n) for t, (c, n) in per_tier.items()},
        per_category={cat: (100.0 * c / n if n else None) for cat, (c, n) in per_category.items()},
    )
